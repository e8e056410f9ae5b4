#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpn/model.hpp"
#include "dpn/pipeline.hpp"
#include "dpn/synthdata.hpp"

namespace dpn::cli {

/// Effective configuration of a run. Built from the defaults, then a JSON
/// config file, then command-line flags.
struct RunConfig {
  std::uint64_t seed = 1;
  DatasetConfig data;
  ModelConfig model;
  TrainConfig train;
  RefineConfig refine;
  std::string split = "test";  // dataset file read by infer, refine and eval
};

/// Throws kInvalidConfig on unknown keys or values of the wrong type.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// FNV-1a of the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// Worker count from DPN_THREADS (default 1, capped by `jobs`).
int worker_count(std::size_t jobs);

/// Entry point of the `dpn` tool. `args` excludes the program name. Returns
/// the process exit code: 0 success, 1 user or configuration error, 2
/// internal fault. Diagnostics go to `err` as a single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpn::cli
