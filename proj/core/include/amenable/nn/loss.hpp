#pragma once

#include <span>
#include <string>
#include <vector>

#include "amenable/nn/network.hpp"

namespace amenable::nn {

enum class LossKind {
  /// Binary (one output unit, sigmoid) or categorical (softmax) cross-entropy
  /// on logits. Targets hold a class id per sample.
  kCrossEntropy,
  /// Per-pixel sigmoid cross-entropy blended with a smoothed soft-Dice loss.
  kPixelCrossEntropyDice,
  kMeanSquaredError,
};

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

struct LossSpec {
  LossKind kind = LossKind::kCrossEntropy;
  /// Weight of (1 - soft Dice); cross-entropy gets 1 - dice_weight.
  double dice_weight = 0.5;
  /// Added to numerator and denominator of the soft Dice.
  double dice_smooth = 1.0;
};

/// Loss of a batch of network outputs against targets.
struct LossEvaluation {
  double loss = 0.0;                // sum_i w_i L_i / sum_i w_i
  std::vector<double> per_sample;   // L_i
  Tensor grad_output;               // dloss / doutput
};

/// Per-sample losses and the gradient of their weighted mean. Empty `weights`
/// means all ones. Throws NumericalError naming the first non-finite sample.
LossEvaluation evaluate_loss(const LossSpec& spec, const Tensor& output, const Tensor& targets,
                             std::span<const double> weights = {});

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> per_sample;
  Gradients grads;
};

LossAndGrad loss_and_grad(const Network& net, const Tensor& batch, const Tensor& targets,
                          const LossSpec& spec, std::span<const double> weights = {});

}  // namespace amenable::nn
