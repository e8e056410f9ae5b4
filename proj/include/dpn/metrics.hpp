#pragma once

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "dpn/geometry.hpp"

namespace dpn {

struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 extents = Vec3::Ones();

  /// Extents are taken as |s| so raw size-head outputs always give a valid box.
  static OrientedBox from_pose(const Pose& pose) { return {pose.t, pose.R, pose.s.cwiseAbs()}; }
  double volume() const { return extents.prod(); }
  std::vector<Vec3> corners() const;
  bool contains(const Vec3& p, double tol = 0.0) const;
};

/// Exact intersection volume: b's polytope clipped by the six face planes of a.
double intersection_volume(const OrientedBox& a, const OrientedBox& b);
double iou3d(const OrientedBox& a, const OrientedBox& b);

/// ‖t − t*‖ / ‖s*‖.
double relative_translation_error(const Pose& pred, const Pose& gt);

/// Errors of one prediction against one ground truth.
struct PairErrors {
  double iou = 0.0;
  double rotation_deg = 0.0;
  double relative_translation = 0.0;
  double translation_m = 0.0;
};

PairErrors pair_errors(const Pose& pred, const Pose& gt, const SymmetrySpec& sym);

struct GroundTruth {
  int scene = 0;
  Pose pose;
  SymmetrySpec symmetry;
};

struct Detection {
  int scene = 0;
  Pose pose;
  double confidence = 1.0;
};

using MatchPredicate = std::function<bool(const PairErrors&)>;

/// Average precision for one category. Detections are taken in descending
/// confidence (ties keep input order); each is paired with the unmatched
/// ground truth of its scene with the highest IoU and counts as a true
/// positive iff the predicate holds, which consumes that ground truth.
/// All-point interpolated area under the precision/recall curve. Returns NaN
/// when there are no ground truths.
double average_precision(const std::vector<Detection>& detections, const std::vector<GroundTruth>& gts,
                         const MatchPredicate& predicate);

/// One column of the mAP table. Unset thresholds do not constrain.
struct MetricCell {
  std::string name;
  double iou = -1.0;
  double rotation_deg = -1.0;
  double relative_translation = -1.0;
  double translation_m = -1.0;

  bool accepts(const PairErrors& e) const;
};

struct MetricGrid {
  std::vector<double> iou{0.50, 0.75};
  std::vector<double> rotation_deg{5.0, 10.0};
  std::vector<double> relative_translation{0.05, 0.10, 0.20};
  std::vector<std::pair<double, double>> absolute{{5.0, 0.02}, {5.0, 0.05}, {10.0, 0.02}, {10.0, 0.05}};

  /// The twelve reported columns: six combined IoU/rotation/relative-translation
  /// cells, IoU50, IoU75, then the four degree/centimetre cells.
  std::vector<MetricCell> cells() const;
};

struct CategoryResults {
  std::vector<Detection> detections;
  std::vector<GroundTruth> ground_truths;
};

struct MapTable {
  std::vector<std::string> columns;
  std::vector<double> values;  // percent
};

MapTable map_table(const std::map<std::string, CategoryResults>& results, const MetricGrid& grid = {});

void write_map_csv(std::ostream& out, const std::vector<std::pair<std::string, MapTable>>& rows);
void print_map_table(std::ostream& out, const std::vector<std::pair<std::string, MapTable>>& rows);

}  // namespace dpn
