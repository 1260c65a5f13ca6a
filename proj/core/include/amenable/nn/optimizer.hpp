#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "amenable/nn/network.hpp"

namespace amenable::nn {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators mirror the parameter shapes of the network they were
/// created for; `step` counts applied updates.
struct OptimizerState {
  OptimizerConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::size_t step = 0;

  OptimizerState() = default;
  OptimizerState(const Network& net, OptimizerConfig cfg);
};

/// Applies one descent step: SGD `w -= lr g`, or bias-corrected Adam.
void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state);

}  // namespace amenable::nn
