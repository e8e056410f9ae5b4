#pragma once

#include <vector>

#include "dpn/graph.hpp"

namespace dpn::nn {

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const ParameterSet& params);
};

/// One bias-corrected ADAM update of every parameter from its grad slot.
void adam_step(ParameterSet& params, AdamState& state, double lr);

}  // namespace dpn::nn
