#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amenable/nn/optimizer.hpp"

namespace amenable {

/// Scores are kept inside [eps, 1 - eps] so log-policies stay finite.
inline constexpr double kScoreEpsilon = 1e-12;

struct ControllerSpec {
  std::size_t width = 8;
  std::size_t hidden = 16;
  /// Empty selects default_controller_architecture.
  std::vector<nn::LayerSpec> architecture;
};

/// Three conv blocks (conv, relu, max-pool) and three dense layers ending in
/// one logit. Input is C x H x W with H and W divisible by 8.
std::vector<nn::LayerSpec> default_controller_architecture(const ControllerSpec& spec);

nn::Network make_controller(const nn::Shape& input, const ControllerSpec& spec, Rng& rng);

double logistic(double z);

/// Controller logits, one per sample.
std::vector<double> logits(const nn::Network& ctrl, const nn::Tensor& inputs);
/// h(x; theta) in (0,1), one per sample.
std::vector<double> score(const nn::Network& ctrl, const nn::Tensor& inputs);

struct ActionBatch {
  std::vector<double> scores;
  std::vector<int> actions;
  std::vector<std::size_t> ids;
};

/// Independent a_i ~ Bernoulli(h_i).
ActionBatch sample_actions(std::span<const double> scores, Rng& rng, std::span<const std::size_t> ids = {});

/// sum_i log[h_i a_i + (1 - h_i)(1 - a_i)]
double log_policy(std::span<const double> scores, std::span<const int> actions);

/// One step of an episode.
struct StepRecord {
  std::vector<std::size_t> rows;      // positions in the training split
  std::vector<std::size_t> ids;       // sample ids of the mini-batch
  std::vector<double> scores;
  std::vector<int> actions;
  std::vector<std::size_t> selected;  // ids with action 1
  double r_tilde = 0.0;
  double r_bar = 0.0;
  double r = 0.0;
  /// Part of every sample's reward shared with later steps (phi R).
  double shared_reward = 0.0;
  /// Per-sample rewards over the P = B + M samples; the first B belong to
  /// the mini-batch.
  std::vector<double> sample_rewards;
  /// Mean task performance on the validation split after this step.
  double val_metric = 0.0;
  bool predictor_stepped = false;
};

/// Sets a scalar reward R on every sample of the step.
void attach_scalar_reward(StepRecord& step, double r);

struct EpisodeTrace {
  std::size_t index = 0;
  std::vector<StepRecord> steps;
};

enum class UpdateRule { kReinforce, kClippedSurrogate };

std::string to_string(UpdateRule rule);
UpdateRule update_rule_from_string(const std::string& s);

struct PolicyUpdateConfig {
  UpdateRule rule = UpdateRule::kReinforce;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 1e-3};
  double entropy_coef = 0.01;
  double gamma = 0.95;
  double clip_ratio = 0.2;
  /// Gradient steps per update for the clipped-surrogate rule.
  std::size_t epochs = 4;
  /// Divide returns by their root-mean-square before use.
  bool normalize_returns = true;
  /// Weight of the direct gradient of the weighted reward through the
  /// validation scores. Shaped training adds the frozen task-agnostic scores
  /// to this term with weight 1 - phi.
  double pathwise_weight = 1.0;
  /// Divide the centred validation losses by their standard deviation so the
  /// pathwise term does not depend on the metric's scale.
  bool standardize_pathwise = true;
  /// Weight of the validation-score regression toward h_a (scaled by 1 - phi).
  double regression_weight = 0.1;

  void validate() const;
};

/// Action-free terms over the validation samples. The objective gains
///   (1/M) sum_j c_j h_j  -  (w/M) sum_j (h_j - t_j)^2
/// where c_j are the pathwise coefficients and t_j the regression targets.
/// Either vector may be empty to disable its term.
struct ValidationTerms {
  const nn::Tensor* inputs = nullptr;
  std::vector<double> pathwise;
  std::vector<double> regression_target;
  double regression_weight = 0.0;

  bool active() const { return inputs && (!pathwise.empty() || !regression_target.empty()); }
};

/// Flattened (step, sample) entries of the episodes with their returns.
struct PolicyBatch {
  std::vector<std::size_t> rows;
  std::vector<int> actions;
  std::vector<double> returns;  // G, possibly normalized
  std::vector<double> old_scores;
};

/// G_{t,i} = r_{t,i} + sum_{k>t} gamma^{k-t} shared_k. Throws Error when a
/// step carries no rewards.
PolicyBatch prepare_policy_batch(std::span<const EpisodeTrace> episodes, const PolicyUpdateConfig& cfg);

/// Surrogate objective (to be maximized) and, when `grads` is non-null, its
/// gradient with respect to the controller parameters.
double surrogate_objective(const nn::Network& ctrl, const PolicyBatch& batch, const nn::Tensor& train_inputs,
                           const PolicyUpdateConfig& cfg, const ValidationTerms* val, nn::Gradients* grads);

struct PolicyUpdateStats {
  double objective = 0.0;
  std::size_t samples = 0;
};

/// One ascent step (REINFORCE) or `epochs` steps (clipped surrogate).
PolicyUpdateStats policy_update(nn::Network& ctrl, nn::OptimizerState& opt, std::span<const EpisodeTrace> episodes,
                                const nn::Tensor& train_inputs, const PolicyUpdateConfig& cfg,
                                const ValidationTerms* val = nullptr);

}  // namespace amenable
