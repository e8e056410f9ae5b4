#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "dpn/checkpoint.hpp"
#include "dpn/cli.hpp"
#include "dpn/error.hpp"
#include "dpn/metrics.hpp"
#include "dpn/records.hpp"

#ifndef DPN_VERSION
#define DPN_VERSION "0.0.0"
#endif

namespace dpn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

json versions() {
  return {{"dpn", DPN_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

void write_run_record(const fs::path& dir, const std::string& command, const json& config,
                      const std::vector<std::string>& outputs) {
  json rec = {{"command", command},
              {"config", config},
              {"config_hash", config_hash(config)},
              {"versions", versions()},
              {"outputs", outputs}};
  if (config.contains("seed")) rec["seed"] = config["seed"];
  write_text(dir / "run.json", rec.dump(2) + "\n");
}

fs::path dir_of(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<RenderedCrop> load_split(const fs::path& dir, const std::string& split) {
  auto data = read_dataset(dir / (split + ".jsonl"));
  std::stable_sort(data.begin(), data.end(),
                   [](const RenderedCrop& a, const RenderedCrop& b) { return a.crop.instance < b.crop.instance; });
  return data;
}

fs::path sidecar_path(const fs::path& ckpt) { return fs::path(ckpt.string() + ".json"); }

void save_network(const Network& net, const fs::path& ckpt) {
  nn::ParameterSet all;
  for (const auto* set : {&net.encoder, &net.explicit_head, &net.implicit_head}) {
    for (const auto& p : *set) all.add(p.name, p.value);
  }
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  nn::save_checkpoint(all, ckpt);
  write_text(sidecar_path(ckpt), json{{"format", "DPN1"}, {"model", model_config_to_json(net.config)}}.dump(2) + "\n");
}

Network load_network(const fs::path& ckpt) {
  std::ifstream side(sidecar_path(ckpt));
  if (!side) throw Error(ErrorCode::kIoError, "missing model config " + sidecar_path(ckpt).string());
  json meta;
  try {
    meta = json::parse(side);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, "model config " + sidecar_path(ckpt).string() + ": " + e.what());
  }
  if (!meta.contains("model")) throw Error(ErrorCode::kParseError, "model config lacks 'model'");
  // A freshly initialized network provides the expected names and shapes.
  Network net = init_network(model_config_from_json(meta["model"]), 0);
  const auto stored = nn::load_checkpoint(ckpt);
  std::size_t expected = 0;
  for (auto* set : {&net.encoder, &net.explicit_head, &net.implicit_head}) {
    for (auto& p : *set) {
      if (!stored.contains(p.name)) throw Error(ErrorCode::kParseError, "checkpoint lacks parameter " + p.name);
      const auto& v = stored.get(p.name).value;
      if (v.shape != p.value.shape) {
        throw Error(ErrorCode::kParseError, "checkpoint parameter " + p.name + " has shape " +
                                                nn::shape_string(v.shape) + ", expected " +
                                                nn::shape_string(p.value.shape));
      }
      p.value = v;
      ++expected;
    }
  }
  if (stored.size() != expected) throw Error(ErrorCode::kParseError, "checkpoint has unexpected parameters");
  return net;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> split;
  std::optional<int> train_count, test_count, iterations, batch_size, max_iters;
  std::optional<double> lr, lambda, refine_lr, eps;
};

RunConfig effective_config(const std::string& path, const Overrides& o) {
  json j = path.empty() ? json::object() : config_to_json(load_config(path));
  if (o.seed) j["seed"] = *o.seed;
  if (o.split) j["split"] = *o.split;
  if (o.train_count) j["data"]["train_count"] = *o.train_count;
  if (o.test_count) j["data"]["test_count"] = *o.test_count;
  if (o.iterations) j["train"]["iterations"] = *o.iterations;
  if (o.batch_size) j["train"]["batch_size"] = *o.batch_size;
  if (o.lr) j["train"]["lr"] = *o.lr;
  if (o.lambda) j["train"]["lambda"] = *o.lambda;
  if (o.refine_lr) j["refine"]["lr"] = *o.refine_lr;
  if (o.eps) j["refine"]["eps"] = *o.eps;
  if (o.max_iters) j["refine"]["max_iters"] = *o.max_iters;
  return config_from_json(j);
}

int cmd_gen(const std::string& config_path, const Overrides& o, const fs::path& out_dir, std::ostream& out) {
  const RunConfig cfg = effective_config(config_path, o);
  fs::create_directories(out_dir);
  const auto train = generate_dataset(cfg.data, "train");
  const auto test = generate_dataset(cfg.data, "test");
  write_dataset(out_dir / "train.jsonl", train);
  write_dataset(out_dir / "test.jsonl", test);
  const json manifest = {{"seed", cfg.seed},
                         {"train_count", train.size()},
                         {"test_count", test.size()},
                         {"categories", cfg.data.categories}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  write_run_record(out_dir, "gen", config_to_json(cfg), {"train.jsonl", "test.jsonl", "manifest.json"});
  out << "wrote " << train.size() << " train and " << test.size() << " test crops to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const Overrides& o, const fs::path& data_dir, const fs::path& ckpt,
              std::string log_path, std::ostream& out) {
  const RunConfig cfg = effective_config(config_path, o);
  const auto data = load_split(data_dir, "train");
  if (data.empty()) throw Error(ErrorCode::kInvalidConfig, "training set " + (data_dir / "train.jsonl").string() + " is empty");
  const auto grid = make_grid(cfg.model.encoder.W, cfg.model.encoder.H);
  std::vector<Sample> samples;
  samples.reserve(data.size());
  for (const auto& r : data) {
    samples.push_back({r.crop.instance, prepare_crop(r.crop, grid), training_target(r.annotation.pose, r.annotation.symmetry)});
  }
  Network net = init_network(cfg.model, cfg.seed);

  if (log_path.empty()) log_path = ckpt.string() + ".csv";
  std::ostringstream log;
  log << "iteration,lr,explicit_loss,implicit_loss,lambda,total\n";
  LossBreakdown last;
  train(net, samples, cfg.train, [&](long it, double lr, const LossBreakdown& b) {
    log << it << ',' << format_double(lr) << ',' << format_double(b.explicit_loss) << ','
        << format_double(b.implicit_loss) << ',' << format_double(b.lambda) << ',' << format_double(b.total) << '\n';
    last = b;
  });
  save_network(net, ckpt);
  write_text(log_path, log.str());
  write_run_record(dir_of(ckpt), "train", config_to_json(cfg),
                   {ckpt.filename().string(), sidecar_path(ckpt).filename().string(), fs::path(log_path).filename().string()});
  out << "trained " << cfg.train.iterations << " iterations on " << samples.size() << " crops; final loss "
      << last.total << " (explicit " << last.explicit_loss << ", implicit " << last.implicit_loss << ")\n";
  return 0;
}

int cmd_predict(const std::string& command, const std::string& config_path, const Overrides& o, const fs::path& ckpt,
                const fs::path& data_dir, const std::string& mode, const fs::path& pred_path, std::ostream& out) {
  const RunConfig cfg = effective_config(config_path, o);
  const Network net = load_network(ckpt);
  const auto data = load_split(data_dir, cfg.split);
  const auto grid = make_grid(net.config.encoder.W, net.config.encoder.H);
  std::vector<PredictionRecord> records(data.size());
  parallel_for(data.size(), worker_count(data.size()), [&](std::size_t i) {
    const auto crop = prepare_crop(data[i].crop, grid);
    PredictionRecord& rec = records[i];
    rec.crop = data[i].crop;
    rec.symmetry = data[i].annotation.symmetry;
    rec.confidence = 1.0;
    if (command == "refine") {
      const auto r = refine(net, crop, cfg.refine);
      rec.pred = r.pose;
      rec.refine_iters = r.iterations;
      rec.refine_loss = r.final_loss;
      rec.refine_trace = r.trace;
    } else if (mode == "align") {
      rec.pred = predict_via_alignment(net, crop);
    } else {
      rec.pred = predict(net, crop);
    }
  });
  if (pred_path.has_parent_path()) fs::create_directories(pred_path.parent_path());
  write_predictions(pred_path, records);

  json run_cfg = config_to_json(cfg);
  run_cfg["model"] = model_config_to_json(net.config);
  run_cfg["checkpoint"] = ckpt.string();
  run_cfg["data"] = data_dir.string();
  if (command == "infer") {
    run_cfg["mode"] = mode;
    run_cfg.erase("refine");
  }
  run_cfg.erase("train");
  write_run_record(dir_of(pred_path), command, run_cfg, {pred_path.filename().string()});
  if (command == "refine") {
    long steps = 0;
    for (const auto& r : records) steps += *r.refine_iters;
    out << "refined " << records.size() << " crops (" << steps << " encoder updates) -> " << pred_path.string() << "\n";
  } else {
    out << "predicted " << records.size() << " crops (" << mode << ") -> " << pred_path.string() << "\n";
  }
  return 0;
}

int cmd_eval(const fs::path& pred_path, const fs::path& gt_dir, const std::string& split, const fs::path& csv_path,
             std::string name, std::ostream& out) {
  const auto preds = read_predictions(pred_path);
  const auto gts = load_split(gt_dir, split);
  std::map<int, const RenderedCrop*> by_id;
  for (const auto& g : gts) {
    if (!by_id.emplace(g.crop.instance, &g).second) {
      throw Error(ErrorCode::kParseError, "duplicate ground-truth instance " + std::to_string(g.crop.instance));
    }
  }
  // Each crop is its own scene: one ground truth, matched only by predictions of that crop.
  std::map<std::string, CategoryResults> results;
  for (const auto& g : gts) {
    results[g.crop.category].ground_truths.push_back({g.crop.instance, g.annotation.pose, g.annotation.symmetry});
  }
  for (const auto& p : preds) {
    const auto it = by_id.find(p.crop.instance);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kInvalidConfig, "prediction for instance " + std::to_string(p.crop.instance) +
                                                 " has no ground truth in " + (gt_dir / (split + ".jsonl")).string());
    }
    results[it->second->crop.category].detections.push_back({p.crop.instance, p.pred, p.confidence});
  }
  if (results.empty()) throw Error(ErrorCode::kInvalidConfig, "no ground truths to evaluate");
  if (name.empty()) name = pred_path.stem().string();
  const auto table = map_table(results);
  std::ostringstream csv;
  write_map_csv(csv, {{name, table}});
  write_text(csv_path, csv.str());
  print_map_table(out, {{name, table}});

  const json run_cfg = {{"pred", pred_path.string()}, {"gt", gt_dir.string()}, {"split", split}, {"name", name}};
  write_run_record(dir_of(csv_path), "eval", run_cfg, {csv_path.filename().string()});
  return 0;
}

bool is_user_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kParseError:
    case ErrorCode::kIoError:
    case ErrorCode::kInvalidCategory:
    case ErrorCode::kInvalidGrid:
    case ErrorCode::kBandwidthExceedsGrid:
      return true;
    default:
      return false;
  }
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Category-level 6D pose and size estimation on synthetic RGB-D crops", "dpn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DPN_VERSION);

  Overrides o;
  std::string config, out_path, data_dir, ckpt, mode = "direct", log_path, pred, gt, name;

  auto* gen = app.add_subcommand("gen", "Generate train/test datasets");
  gen->add_option("--config", config, "JSON config file")->required();
  gen->add_option("--out", out_path, "Output directory")->required();
  gen->add_option("--seed", o.seed, "Override the seed");
  gen->add_option("--train-count", o.train_count, "Override data.train_count");
  gen->add_option("--test-count", o.test_count, "Override data.test_count");

  auto* tr = app.add_subcommand("train", "Train a network");
  tr->add_option("--config", config, "JSON config file")->required();
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--out", out_path, "Checkpoint path")->required();
  tr->add_option("--log", log_path, "Per-iteration loss CSV (default <out>.csv)");
  tr->add_option("--seed", o.seed, "Override the seed");
  tr->add_option("--iterations", o.iterations, "Override train.iterations");
  tr->add_option("--batch-size", o.batch_size, "Override train.batch_size");
  tr->add_option("--lr", o.lr, "Override train.lr");
  tr->add_option("--lambda", o.lambda, "Override train.lambda");

  auto* inf = app.add_subcommand("infer", "Predict poses");
  inf->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  inf->add_option("--data", data_dir, "Dataset directory")->required();
  inf->add_option("--mode", mode, "direct (explicit decoder) or align (implicit decoder + Umeyama)")
      ->check(CLI::IsMember({"direct", "align"}));
  inf->add_option("--out", out_path, "Prediction (or dataset) file")->required();
  inf->add_option("--config", config, "JSON config file");
  inf->add_option("--split", o.split, "Dataset split (train or test)");

  auto* ref = app.add_subcommand("refine", "Predict poses with test-time refinement");
  ref->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  ref->add_option("--data", data_dir, "Dataset directory")->required();
  ref->add_option("--out", out_path, "Prediction (or dataset) file")->required();
  ref->add_option("--lr", o.refine_lr, "Override refine.lr");
  ref->add_option("--eps", o.eps, "Override refine.eps");
  ref->add_option("--max-iters", o.max_iters, "Override refine.max_iters");
  ref->add_option("--config", config, "JSON config file");
  ref->add_option("--split", o.split, "Dataset split (train or test)");

  auto* ev = app.add_subcommand("eval", "Compute the mAP table");
  ev->add_option("--pred", pred, "Prediction (or dataset) file")->required();
  ev->add_option("--gt", gt, "Ground-truth dataset directory")->required();
  ev->add_option("--out", out_path, "CSV output")->required();
  std::string eval_split = "test";
  ev->add_option("--split", eval_split, "Dataset split (train or test)")->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--name", name, "Row label (default: prediction file stem)");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << DPN_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "dpn: error: " << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(config, o, out_path, out);
    if (tr->parsed()) return cmd_train(config, o, data_dir, out_path, log_path, out);
    if (inf->parsed()) return cmd_predict("infer", config, o, ckpt, data_dir, mode, out_path, out);
    if (ref->parsed()) return cmd_predict("refine", config, o, ckpt, data_dir, mode, out_path, out);
    if (ev->parsed()) return cmd_eval(pred, gt, eval_split, out_path, name, out);
  } catch (const Error& e) {
    err << "dpn: error: " << one_line(e.what()) << "\n";
    return is_user_error(e.code()) ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "dpn: error: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "dpn: internal error: " << one_line(e.what()) << "\n";
    return 2;
  }
  return 1;
}

}  // namespace dpn::cli
