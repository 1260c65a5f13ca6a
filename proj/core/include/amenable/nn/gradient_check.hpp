#pragma once

#include <functional>
#include <string>

#include "amenable/nn/loss.hpp"

namespace amenable::nn {

struct GradientCheckReport {
  /// max over entries of |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool flagged = false;
};

/// Entries whose gradients are both below this magnitude are compared in
/// absolute terms; central differences cannot resolve them relatively.
inline constexpr double kGradientCheckFloor = 1e-6;

/// Compares `analytic` against central differences of `objective` with step
/// `step` over every parameter of `net`. The network is copied, not modified.
GradientCheckReport compare_gradients(const Network& net, const Gradients& analytic,
                                      const std::function<double(const Network&)>& objective,
                                      double tolerance, double step = 1e-5);

/// Checks loss_and_grad for `net` on one batch. Intended for small networks.
GradientCheckReport gradient_check(const Network& net, const Tensor& batch, const Tensor& targets,
                                   const LossSpec& spec, double tolerance, std::span<const double> weights = {});

}  // namespace amenable::nn
