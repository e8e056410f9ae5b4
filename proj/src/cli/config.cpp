#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "dpn/checkpoint.hpp"
#include "dpn/cli.hpp"
#include "dpn/error.hpp"

namespace dpn::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, std::string(section) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + std::string(section) + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config key '") + section + "." + key + "' has the wrong type");
  }
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"W", c.encoder.W},
          {"H", c.encoder.H},
          {"channels", c.encoder.channels},
          {"fusion_layers", c.encoder.fusion_layers},
          {"pool_after", c.encoder.pool_after},
          {"feature_dim", c.encoder.feature_dim},
          {"head_hidden", c.head_hidden},
          {"implicit_hidden", c.implicit_hidden}};
}

ModelConfig model_config_from_json(const json& j) {
  check_keys(j, "model", {"W", "H", "channels", "fusion_layers", "pool_after", "feature_dim", "head_hidden", "implicit_hidden"});
  ModelConfig c;
  read(j, "W", c.encoder.W, "model");
  read(j, "H", c.encoder.H, "model");
  read(j, "channels", c.encoder.channels, "model");
  read(j, "fusion_layers", c.encoder.fusion_layers, "model");
  read(j, "pool_after", c.encoder.pool_after, "model");
  read(j, "feature_dim", c.encoder.feature_dim, "model");
  read(j, "head_hidden", c.head_hidden, "model");
  read(j, "implicit_hidden", c.implicit_hidden, "model");
  c.validate();
  return c;
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "config", {"seed", "split", "data", "model", "train", "refine"});
  RunConfig c;
  read(j, "seed", c.seed, "config");
  read(j, "split", c.split, "config");
  if (c.split != "train" && c.split != "test") {
    throw Error(ErrorCode::kInvalidConfig, "split must be 'train' or 'test'");
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, "data", {"train_count", "test_count", "categories", "size_min", "size_max", "noise_sigma",
                           "bins_across", "max_points"});
    read(d, "train_count", c.data.train_count, "data");
    read(d, "test_count", c.data.test_count, "data");
    read(d, "categories", c.data.categories, "data");
    read(d, "size_min", c.data.size_min, "data");
    read(d, "size_max", c.data.size_max, "data");
    read(d, "noise_sigma", c.data.render.noise_sigma, "data");
    read(d, "bins_across", c.data.render.bins_across, "data");
    read(d, "max_points", c.data.render.max_points, "data");
  }
  if (j.contains("model")) c.model = model_config_from_json(j["model"]);
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, "train", {"lambda", "lr", "lr_halve_every", "iterations", "batch_size"});
    read(t, "lambda", c.train.lambda, "train");
    read(t, "lr", c.train.lr, "train");
    read(t, "lr_halve_every", c.train.lr_halve_every, "train");
    read(t, "iterations", c.train.iterations, "train");
    read(t, "batch_size", c.train.batch_size, "train");
  }
  if (j.contains("refine")) {
    const auto& r = j["refine"];
    check_keys(r, "refine", {"lr", "eps", "max_iters"});
    read(r, "lr", c.refine.lr, "refine");
    read(r, "eps", c.refine.tolerance, "refine");
    read(r, "max_iters", c.refine.max_iters, "refine");
  }
  c.data.seed = c.seed;
  c.train.seed = c.seed;

  if (c.data.train_count < 0 || c.data.test_count < 0) throw Error(ErrorCode::kInvalidConfig, "negative crop count");
  if (c.data.categories.empty()) throw Error(ErrorCode::kInvalidConfig, "no categories");
  if (!(c.data.size_min > 0.0 && c.data.size_min <= c.data.size_max)) {
    throw Error(ErrorCode::kInvalidConfig, "need 0 < size_min <= size_max");
  }
  c.model.validate();
  c.train.validate();
  c.refine.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"split", c.split},
          {"data",
           {{"train_count", c.data.train_count},
            {"test_count", c.data.test_count},
            {"categories", c.data.categories},
            {"size_min", c.data.size_min},
            {"size_max", c.data.size_max},
            {"noise_sigma", c.data.render.noise_sigma},
            {"bins_across", c.data.render.bins_across},
            {"max_points", c.data.render.max_points}}},
          {"model", model_config_to_json(c.model)},
          {"train",
           {{"lambda", c.train.lambda},
            {"lr", c.train.lr},
            {"lr_halve_every", c.train.lr_halve_every},
            {"iterations", c.train.iterations},
            {"batch_size", c.train.batch_size}}},
          {"refine", {{"lr", c.refine.lr}, {"eps", c.refine.tolerance}, {"max_iters", c.refine.max_iters}}}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const json& j) {
  const std::string text = j.dump();
  const auto h = nn::fnv1a64(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int worker_count(std::size_t jobs) {
  int n = 1;
  if (const char* env = std::getenv("DPN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw Error(ErrorCode::kInvalidConfig, std::string("DPN_THREADS must be a positive integer, got '") + env + "'");
    }
    n = static_cast<int>(std::min<long>(v, 256));
  }
  return static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(n), jobs)));
}

}  // namespace dpn::cli
