#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpn/synthdata.hpp"

namespace dpn {

/// One prediction: the dataset record layout with `pose` replaced by
/// `pred_pose` and `confidence`, plus optional refinement diagnostics.
struct PredictionRecord {
  Crop crop;
  SymmetrySpec symmetry;
  Pose pred;
  double confidence = 1.0;
  std::optional<int> refine_iters;
  std::optional<double> refine_loss;
  std::vector<double> refine_trace;
};

std::string prediction_line(const PredictionRecord& record);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
/// Accepts prediction files and dataset files (whose `pose` is read as the
/// prediction with confidence 1).
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
std::vector<PredictionRecord> parse_predictions(const std::string& text);

}  // namespace dpn
