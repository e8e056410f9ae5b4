#include "dpn/adam.hpp"

#include <cmath>

#include "dpn/error.hpp"

namespace dpn::nn {

AdamState::AdamState(const ParameterSet& params) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.value.shape);
    second_moment.emplace_back(p.value.shape);
  }
}

void adam_step(ParameterSet& params, AdamState& state, double lr) {
  if (state.first_moment.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adam state does not match parameter set");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = state.first_moment[k].data;
    auto& v = state.second_moment[k].data;
    if (m.size() != p.value.size()) throw Error(ErrorCode::kShapeMismatch, "adam moment shape for " + p.name);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

}  // namespace dpn::nn
