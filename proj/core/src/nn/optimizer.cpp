#include "amenable/nn/optimizer.hpp"

#include <cmath>

namespace amenable::nn {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

OptimizerState::OptimizerState(const Network& net, OptimizerConfig cfg) : config(cfg) {
  if (config.kind == OptimizerKind::kAdam) {
    first_moment = zero_gradients(net);
    second_moment = zero_gradients(net);
  }
}

void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state) {
  auto& params = net.parameters();
  if (grads.size() != params.size()) throw ShapeError("gradient count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].shape() != params[i].value.shape())
      throw ShapeError("gradient shape mismatch for " + params[i].name);

  const auto& cfg = state.config;
  ++state.step;
  if (cfg.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].value.values();
      const auto g = grads[i].values();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.learning_rate * g[k];
    }
    return;
  }

  if (state.first_moment.size() != params.size()) throw ShapeError("optimizer state belongs to another network");
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    const auto g = grads[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      w[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
    }
  }
}

}  // namespace amenable::nn
