#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dpn/adam.hpp"
#include "dpn/losses.hpp"
#include "dpn/model.hpp"

namespace dpn {

/// A training example: prepared inputs plus the symmetry-resolved target.
struct Sample {
  int id = 0;
  PreparedCrop crop;
  Pose target;
};

struct OptimizerState {
  nn::AdamState encoder;
  nn::AdamState explicit_head;
  nn::AdamState implicit_head;

  explicit OptimizerState(const Network& net);
};

/// One ADAM step on the batch-mean of L_exp + λ·L_im. Throws kTrainingFault
/// (naming the batch ids) if any loss or activation is non-finite.
LossBreakdown train_step(Network& net, OptimizerState& opt, std::span<const Sample* const> batch,
                         double lambda, double lr);

struct TrainConfig {
  double lambda = 10.0;
  double lr = 1e-3;
  int lr_halve_every = 1000;
  int iterations = 3000;
  int batch_size = 8;
  std::uint64_t seed = 0;

  void validate() const;
  double lr_at(long iteration) const;
};

using TrainLogger = std::function<void(long iteration, double lr, const LossBreakdown&)>;

/// Deterministic mini-batch training: batches are drawn from a per-epoch
/// shuffle seeded by `config.seed`.
void train(Network& net, const std::vector<Sample>& samples, const TrainConfig& config,
           const TrainLogger& log = {});

/// Way 1: forward pass of the explicit decoder.
Pose predict(const Network& net, const PreparedCrop& crop);
/// Way 2: implicit canonical points aligned to the observation with Umeyama.
Pose predict_via_alignment(const Network& net, const PreparedCrop& crop);

struct RefineConfig {
  double lr = 1e-6;
  double tolerance = 5e-5;
  int max_iters = 200;

  void validate() const;
};

struct RefineResult {
  Pose pose;               // pose at the lowest-loss iterate
  int iterations = 0;      // encoder updates taken
  double initial_loss = 0.0;
  double final_loss = 0.0;  // loss at the returned pose
  std::vector<double> trace;  // L_refine at every evaluated iterate
};

/// Encoder-only test-time fine-tuning towards agreement between the two
/// decoders. Works on a private copy of the network; `net` is not modified.
/// Throws kRefineFault on a non-finite loss.
RefineResult refine(const Network& net, const PreparedCrop& crop, const RefineConfig& config);

/// Current consistency loss L_refine of a crop under `net`.
double consistency_loss(const Network& net, const PreparedCrop& crop);

}  // namespace dpn
