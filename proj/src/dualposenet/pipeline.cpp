#include "dpn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dpn/error.hpp"

namespace dpn {

using nn::Graph;
using nn::Var;

OptimizerState::OptimizerState(const Network& net)
    : encoder(net.encoder), explicit_head(net.explicit_head), implicit_head(net.implicit_head) {}

namespace {

std::string batch_ids(std::span<const Sample* const> batch) {
  std::string ids;
  for (const auto* s : batch) ids += (ids.empty() ? "" : ",") + std::to_string(s->id);
  return ids;
}

// Frozen bindings never write through the parameter sets, so inference and
// refinement can run on a const network.
Network& mutable_view(const Network& net) { return const_cast<Network&>(net); }

}  // namespace

LossBreakdown train_step(Network& net, OptimizerState& opt, std::span<const Sample* const> batch, double lambda,
                         double lr) {
  if (batch.empty()) throw Error(ErrorCode::kTrainingFault, "empty batch");
  net.encoder.zero_grad();
  net.explicit_head.zero_grad();
  net.implicit_head.zero_grad();
  LossBreakdown out;
  out.lambda = lambda;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const Binding all{Bind::kTrainable, Bind::kTrainable, Bind::kTrainable};
  try {
    for (const Sample* s : batch) {
      Graph g;
      const auto fw = forward(g, net, s->crop, all);
      const Var le = loss_explicit(g, fw.pose, s->crop.center, s->target);
      const Var li = loss_implicit(g, fw.canonical, s->crop, s->target);
      const Var total = nn::scale(nn::add(le, nn::scale(li, lambda)), inv);
      g.backward(total);
      out.explicit_loss += inv * le.value().item();
      out.implicit_loss += inv * li.value().item();
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::kTrainingFault, "batch [" + batch_ids(batch) + "]: " + e.what());
  }
  out.total = out.explicit_loss + lambda * out.implicit_loss;
  if (!std::isfinite(out.total)) {
    throw Error(ErrorCode::kTrainingFault, "non-finite loss in batch [" + batch_ids(batch) + "]");
  }
  nn::adam_step(net.encoder, opt.encoder, lr);
  nn::adam_step(net.explicit_head, opt.explicit_head, lr);
  nn::adam_step(net.implicit_head, opt.implicit_head, lr);
  return out;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "lambda must be >= 0");
  if (!(lr > 0.0)) throw Error(ErrorCode::kInvalidConfig, "lr must be > 0");
  if (iterations < 0 || batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "bad iteration/batch settings");
  if (lr_halve_every < 0) throw Error(ErrorCode::kInvalidConfig, "lr_halve_every must be >= 0");
}

double TrainConfig::lr_at(long iteration) const {
  if (lr_halve_every <= 0) return lr;
  return lr * std::pow(0.5, static_cast<double>(iteration / lr_halve_every));
}

void train(Network& net, const std::vector<Sample>& samples, const TrainConfig& config, const TrainLogger& log) {
  config.validate();
  if (samples.empty()) throw Error(ErrorCode::kTrainingFault, "no training samples");
  OptimizerState opt(net);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const auto batch_size = std::min<std::size_t>(config.batch_size, samples.size());
  std::vector<const Sample*> batch;
  for (long it = 0; it < config.iterations; ++it) {
    batch.clear();
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&samples[order[cursor++]]);
    }
    const double lr = config.lr_at(it);
    const auto losses = train_step(net, opt, batch, config.lambda, lr);
    if (log) log(it, lr, losses);
  }
}

Pose predict(const Network& net, const PreparedCrop& crop) {
  Graph g;
  const auto fw = forward(g, mutable_view(net), crop, Binding{});
  return pose_from_output(fw.pose, crop.center);
}

Pose predict_via_alignment(const Network& net, const PreparedCrop& crop) {
  Graph g;
  const auto fw = forward(g, mutable_view(net), crop, Binding{});
  const PointSet Q = points_from_tensor(fw.canonical.value());
  const Similarity sim = umeyama(Q, crop.raw_points);
  Pose pose;
  pose.R = sim.R;
  pose.t = sim.t;
  pose.s = size_from_canonical(Q, sim.scale);
  return pose;
}

void RefineConfig::validate() const {
  if (!(lr > 0.0) || !(tolerance > 0.0) || max_iters < 1) {
    throw Error(ErrorCode::kInvalidConfig, "refine needs lr > 0, tolerance > 0, max_iters >= 1");
  }
}

double consistency_loss(const Network& net, const PreparedCrop& crop) {
  Graph g;
  const auto fw = forward(g, mutable_view(net), crop, Binding{});
  return loss_refine(g, fw.canonical, fw.pose, crop).value().item();
}

RefineResult refine(const Network& net, const PreparedCrop& crop, const RefineConfig& config) {
  config.validate();
  Network local = net;
  nn::AdamState adam(local.encoder);
  const Binding encoder_only{Bind::kTrainable, Bind::kFrozen, Bind::kFrozen};
  RefineResult result;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    Graph g;
    local.encoder.zero_grad();
    double loss = 0.0;
    Var loss_var;
    Pose pose;
    try {
      const auto fw = forward(g, local, crop, encoder_only);
      loss_var = loss_refine(g, fw.canonical, fw.pose, crop);
      loss = loss_var.value().item();
      pose = pose_from_output(fw.pose, crop.center);
    } catch (const Error& e) {
      throw Error(ErrorCode::kRefineFault, std::string("iteration ") + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(loss)) throw Error(ErrorCode::kRefineFault, "non-finite refinement loss");
    result.trace.push_back(loss);
    if (it == 0) result.initial_loss = loss;
    if (loss < best) {
      best = loss;
      result.pose = pose;
      result.final_loss = loss;
    }
    if (loss <= config.tolerance || it == config.max_iters) break;
    g.backward(loss_var);
    nn::adam_step(local.encoder, adam, config.lr);
    result.iterations = it + 1;
  }
  return result;
}

}  // namespace dpn
