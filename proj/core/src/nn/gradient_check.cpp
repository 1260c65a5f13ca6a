#include "amenable/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace amenable::nn {

GradientCheckReport compare_gradients(const Network& net, const Gradients& analytic,
                                      const std::function<double(const Network&)>& objective,
                                      double tolerance, double step) {
  if (analytic.size() != net.parameters().size()) throw ShapeError("gradient count does not match parameters");
  Network probe = net;
  GradientCheckReport report;
  for (std::size_t p = 0; p < probe.parameters().size(); ++p) {
    auto values = probe.parameters()[p].value.values();
    const auto grad = analytic[p].values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double up = objective(probe);
      values[k] = saved - step;
      const double down = objective(probe);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double abs_err = std::abs(grad[k] - numeric);
      const double rel_err = abs_err / std::max({std::abs(grad[k]), std::abs(numeric), kGradientCheckFloor});
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      if (rel_err > report.max_relative_error || !std::isfinite(rel_err)) {
        report.max_relative_error = rel_err;
        report.worst_parameter = probe.parameters()[p].name;
        report.worst_index = k;
      }
      ++report.checked;
    }
  }
  report.flagged = !(report.max_relative_error <= tolerance);
  return report;
}

GradientCheckReport gradient_check(const Network& net, const Tensor& batch, const Tensor& targets,
                                   const LossSpec& spec, double tolerance, std::span<const double> weights) {
  const auto analytic = loss_and_grad(net, batch, targets, spec, weights);
  const std::vector<double> w(weights.begin(), weights.end());
  return compare_gradients(
      net, analytic.grads,
      [&](const Network& probe) { return evaluate_loss(spec, forward(probe, batch), targets, w).loss; },
      tolerance);
}

}  // namespace amenable::nn
