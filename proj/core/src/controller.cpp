#include "amenable/controller.hpp"

#include <algorithm>
#include <cmath>

namespace amenable {

using nn::LayerSpec;
using nn::Tensor;

std::vector<LayerSpec> default_controller_architecture(const ControllerSpec& spec) {
  const std::size_t w = spec.width, h = spec.hidden;
  return {LayerSpec::conv2d(w), LayerSpec::relu(), LayerSpec::max_pool(), LayerSpec::conv2d(w),
          LayerSpec::relu(),    LayerSpec::max_pool(), LayerSpec::conv2d(w), LayerSpec::relu(),
          LayerSpec::max_pool(), LayerSpec::flatten(), LayerSpec::dense(h), LayerSpec::relu(),
          LayerSpec::dense(h),  LayerSpec::relu(),    LayerSpec::dense(1)};
}

nn::Network make_controller(const nn::Shape& input, const ControllerSpec& spec, Rng& rng) {
  auto layers = spec.architecture.empty() ? default_controller_architecture(spec) : spec.architecture;
  nn::Network net(input, std::move(layers));
  if (nn::shape_size(net.output_shape()) != 1) throw ShapeError("controller must end in a single logit");
  net.initialize(rng);
  return net;
}

double logistic(double z) {
  const double h = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(h, kScoreEpsilon, 1.0 - kScoreEpsilon);
}

std::vector<double> logits(const nn::Network& ctrl, const Tensor& inputs) {
  const Tensor out = nn::forward(ctrl, inputs);
  return {out.values().begin(), out.values().end()};
}

std::vector<double> score(const nn::Network& ctrl, const Tensor& inputs) {
  auto z = logits(ctrl, inputs);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw NumericalError("non-finite controller logit", static_cast<long>(i));
    z[i] = logistic(z[i]);
  }
  return z;
}

ActionBatch sample_actions(std::span<const double> scores, Rng& rng, std::span<const std::size_t> ids) {
  if (!ids.empty() && ids.size() != scores.size()) throw ShapeError("sample_actions: ids and scores differ");
  ActionBatch out;
  out.scores.assign(scores.begin(), scores.end());
  out.ids.assign(ids.begin(), ids.end());
  out.actions.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.actions[i] = uniform01(rng) < scores[i] ? 1 : 0;
  return out;
}

double log_policy(std::span<const double> scores, std::span<const int> actions) {
  if (scores.size() != actions.size()) throw ShapeError("log_policy: scores and actions differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) acc += std::log(actions[i] ? scores[i] : 1.0 - scores[i]);
  return acc;
}

void attach_scalar_reward(StepRecord& step, double r) {
  step.r = r;
  step.shared_reward = r;
  step.sample_rewards.assign(step.rows.size(), r);
}

std::string to_string(UpdateRule rule) {
  return rule == UpdateRule::kReinforce ? "reinforce" : "clipped_surrogate";
}

UpdateRule update_rule_from_string(const std::string& s) {
  if (s == "reinforce") return UpdateRule::kReinforce;
  if (s == "clipped_surrogate") return UpdateRule::kClippedSurrogate;
  throw ConfigError("unknown policy rule '" + s + "'");
}

void PolicyUpdateConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("policy.gamma must lie in [0,1]");
  if (!(clip_ratio > 0.0)) throw ConfigError("policy.clip_ratio must be > 0");
  if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("policy.learning_rate must be >= 0");
  if (entropy_coef < 0.0 || pathwise_weight < 0.0 || regression_weight < 0.0)
    throw ConfigError("policy term weights must be nonnegative");
  if (rule == UpdateRule::kClippedSurrogate && epochs == 0) throw ConfigError("policy.epochs must be >= 1");
}

PolicyBatch prepare_policy_batch(std::span<const EpisodeTrace> episodes, const PolicyUpdateConfig& cfg) {
  if (episodes.empty()) throw Error("policy update needs at least one episode");
  PolicyBatch batch;
  for (const auto& ep : episodes) {
    const std::size_t T = ep.steps.size();
    if (T == 0) throw Error("episode " + std::to_string(ep.index) + " has no steps");
    std::vector<double> future(T, 0.0);
    for (std::size_t t = T - 1; t-- > 0;) future[t] = cfg.gamma * (ep.steps[t + 1].shared_reward + future[t + 1]);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& st = ep.steps[t];
      const std::size_t b = st.rows.size();
      if (st.sample_rewards.size() < b)
        throw Error("episode " + std::to_string(ep.index) + " step " + std::to_string(t) + " is missing rewards");
      if (st.actions.size() != b || st.scores.size() != b) throw ShapeError("step record fields differ in length");
      for (std::size_t i = 0; i < b; ++i) {
        const double g = st.sample_rewards[i] + future[t];
        if (!std::isfinite(g)) throw NumericalError("non-finite return", static_cast<long>(i));
        batch.rows.push_back(st.rows[i]);
        batch.actions.push_back(st.actions[i]);
        batch.returns.push_back(g);
        batch.old_scores.push_back(st.scores[i]);
      }
    }
  }
  if (cfg.normalize_returns && !batch.returns.empty()) {
    double ss = 0.0;
    for (double g : batch.returns) ss += g * g;
    const double rms = std::sqrt(ss / static_cast<double>(batch.returns.size()));
    if (rms > 0.0)
      for (double& g : batch.returns) g /= rms;
  }
  return batch;
}

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double entropy(double h) {
  h = std::clamp(h, kScoreEpsilon, 1.0 - kScoreEpsilon);
  return -h * std::log(h) - (1.0 - h) * std::log(1.0 - h);
}

void accumulate(nn::Gradients& into, const nn::Gradients& add) {
  for (std::size_t p = 0; p < into.size(); ++p) {
    auto dst = into[p].values();
    const auto src = add[p].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

}  // namespace

double surrogate_objective(const nn::Network& ctrl, const PolicyBatch& batch, const Tensor& train_inputs,
                           const PolicyUpdateConfig& cfg, const ValidationTerms* val, nn::Gradients* grads) {
  double objective = 0.0;
  if (grads) *grads = nn::zero_gradients(ctrl);

  const std::size_t n = batch.rows.size();
  if (n > 0) {
    const auto trace = nn::forward_trace(ctrl, train_inputs.gather(batch.rows));
    const Tensor& z = trace.output();
    Tensor dz(z.shape());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = sigmoid(z[i]);
      const int a = batch.actions[i];
      const double adv = batch.returns[i];
      const double logp = std::log(std::clamp(a ? h : 1.0 - h, kScoreEpsilon, 1.0));
      double term = 0.0, slope = 0.0;
      if (cfg.rule == UpdateRule::kReinforce) {
        term = adv * logp;
        slope = adv * (a - h);
      } else {
        const double old = std::clamp(a ? batch.old_scores[i] : 1.0 - batch.old_scores[i], kScoreEpsilon, 1.0);
        const double ratio = std::exp(logp - std::log(old));
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
        const bool use_clipped = clipped * adv < ratio * adv;
        term = use_clipped ? clipped * adv : ratio * adv;
        slope = use_clipped ? 0.0 : adv * ratio * (a - h);
      }
      term += cfg.entropy_coef * entropy(h);
      slope += cfg.entropy_coef * (-z[i] * h * (1.0 - h));
      objective += term * inv_n;
      dz[i] = slope * inv_n;
    }
    if (grads) accumulate(*grads, nn::backward(ctrl, trace, dz));
  }

  if (val && val->active()) {
    const std::size_t m = val->inputs->batch();
    if ((!val->pathwise.empty() && val->pathwise.size() != m) ||
        (!val->regression_target.empty() && val->regression_target.size() != m))
      throw ShapeError("validation terms do not match validation inputs");
    const auto trace = nn::forward_trace(ctrl, *val->inputs);
    const Tensor& z = trace.output();
    Tensor dz(z.shape());
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double h = sigmoid(z[j]);
      const double dh = h * (1.0 - h);
      double slope = 0.0;
      if (!val->pathwise.empty()) {
        objective += val->pathwise[j] * h * inv_m;
        slope += val->pathwise[j] * dh;
      }
      if (!val->regression_target.empty()) {
        const double e = h - val->regression_target[j];
        objective -= val->regression_weight * e * e * inv_m;
        slope -= 2.0 * val->regression_weight * e * dh;
      }
      dz[j] = slope * inv_m;
    }
    if (grads) accumulate(*grads, nn::backward(ctrl, trace, dz));
  }
  if (!std::isfinite(objective)) throw NumericalError("non-finite policy objective");
  return objective;
}

PolicyUpdateStats policy_update(nn::Network& ctrl, nn::OptimizerState& opt, std::span<const EpisodeTrace> episodes,
                                const Tensor& train_inputs, const PolicyUpdateConfig& cfg, const ValidationTerms* val) {
  const PolicyBatch batch = prepare_policy_batch(episodes, cfg);
  const std::size_t steps = cfg.rule == UpdateRule::kReinforce ? 1 : cfg.epochs;
  PolicyUpdateStats stats;
  stats.samples = batch.rows.size();
  for (std::size_t e = 0; e < steps; ++e) {
    nn::Gradients g;
    const double obj = surrogate_objective(ctrl, batch, train_inputs, cfg, val, &g);
    if (e == 0) stats.objective = obj;
    // Ascent on the objective is descent on its negation.
    for (auto& t : g)
      for (auto& v : t.values()) v = -v;
    nn::optimizer_step(ctrl, g, opt);
  }
  return stats;
}

}  // namespace amenable
