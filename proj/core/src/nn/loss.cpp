#include "amenable/nn/loss.hpp"

#include <algorithm>
#include <cmath>

namespace amenable::nn {

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(1 + exp(-|z|)) + max(z, 0) - z*y, stable for any logit.
double bce_with_logits(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kPixelCrossEntropyDice: return "pixel_ce_dice";
    case LossKind::kMeanSquaredError: return "mse";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  for (auto k : {LossKind::kCrossEntropy, LossKind::kPixelCrossEntropyDice, LossKind::kMeanSquaredError})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown loss '" + s + "'");
}

LossEvaluation evaluate_loss(const LossSpec& spec, const Tensor& output, const Tensor& targets,
                             std::span<const double> weights) {
  const std::size_t n = output.batch();
  if (n == 0) throw ShapeError("loss needs a nonempty batch");
  if (targets.batch() != n) throw ShapeError("targets batch does not match outputs");
  if (!weights.empty() && weights.size() != n) throw ShapeError("one weight per sample required");

  LossEvaluation ev;
  ev.per_sample.assign(n, 0.0);
  ev.grad_output = Tensor(output.shape());
  const std::size_t m = output.sample_size();

  // Unnormalized per-sample gradients dL_i/doutput_i first, then scaled by w_i / sum w.
  switch (spec.kind) {
    case LossKind::kCrossEntropy: {
      if (targets.sample_size() != 1) throw ShapeError("cross-entropy targets hold one class id per sample");
      for (std::size_t i = 0; i < n; ++i) {
        const auto z = output.sample(i);
        auto g = ev.grad_output.sample(i);
        const double t = targets.sample(i)[0];
        if (m == 1) {
          ev.per_sample[i] = bce_with_logits(z[0], t);
          g[0] = sigmoid(z[0]) - t;
        } else {
          const auto cls = static_cast<std::size_t>(t);
          if (t < 0 || cls >= m || static_cast<double>(cls) != t)
            throw ShapeError("class id " + std::to_string(t) + " out of range");
          const double zmax = *std::max_element(z.begin(), z.end());
          double sum = 0.0;
          for (std::size_t k = 0; k < m; ++k) sum += std::exp(z[k] - zmax);
          const double lse = zmax + std::log(sum);
          ev.per_sample[i] = lse - z[cls];
          for (std::size_t k = 0; k < m; ++k) g[k] = std::exp(z[k] - lse) - (k == cls ? 1.0 : 0.0);
        }
      }
      break;
    }
    case LossKind::kPixelCrossEntropyDice: {
      if (targets.sample_size() != m) throw ShapeError("mask targets must match output size");
      const double wd = spec.dice_weight, wc = 1.0 - spec.dice_weight, eps = spec.dice_smooth;
      const double inv_m = 1.0 / static_cast<double>(m);
      std::vector<double> p(m);
      for (std::size_t i = 0; i < n; ++i) {
        const auto z = output.sample(i);
        const auto y = targets.sample(i);
        auto g = ev.grad_output.sample(i);
        double ce = 0.0, inter = 0.0, psum = 0.0, ysum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          p[k] = sigmoid(z[k]);
          ce += bce_with_logits(z[k], y[k]);
          inter += p[k] * y[k];
          psum += p[k];
          ysum += y[k];
        }
        const double num = 2.0 * inter + eps, den = psum + ysum + eps;
        const double soft_dice = num / den;
        ev.per_sample[i] = wc * ce * inv_m + wd * (1.0 - soft_dice);
        for (std::size_t k = 0; k < m; ++k) {
          const double ddice_dp = (2.0 * y[k] * den - num) / (den * den);
          g[k] = wc * (p[k] - y[k]) * inv_m - wd * ddice_dp * p[k] * (1.0 - p[k]);
        }
      }
      break;
    }
    case LossKind::kMeanSquaredError: {
      if (targets.sample_size() != m) throw ShapeError("regression targets must match output size");
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) {
        const auto o = output.sample(i);
        const auto y = targets.sample(i);
        auto g = ev.grad_output.sample(i);
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          const double d = o[k] - y[k];
          s += d * d;
          g[k] = 2.0 * d * inv_m;
        }
        ev.per_sample[i] = s * inv_m;
      }
      break;
    }
  }

  double wsum = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(ev.per_sample[i])) throw NumericalError("non-finite loss", static_cast<long>(i));
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w < 0.0 || !std::isfinite(w)) throw NumericalError("invalid sample weight", static_cast<long>(i));
    wsum += w;
    total += w * ev.per_sample[i];
  }
  if (wsum <= 0.0) throw NumericalError("sample weights sum to zero");
  ev.loss = total / wsum;
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = (weights.empty() ? 1.0 : weights[i]) / wsum;
    for (auto& g : ev.grad_output.sample(i)) g *= scale;
  }
  return ev;
}

LossAndGrad loss_and_grad(const Network& net, const Tensor& batch, const Tensor& targets,
                          const LossSpec& spec, std::span<const double> weights) {
  const ForwardTrace trace = forward_trace(net, batch);
  LossEvaluation ev = evaluate_loss(spec, trace.output(), targets, weights);
  LossAndGrad out;
  out.loss = ev.loss;
  out.per_sample = std::move(ev.per_sample);
  out.grads = backward(net, trace, ev.grad_output);
  return out;
}

}  // namespace amenable::nn
