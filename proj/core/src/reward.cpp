#include "amenable/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace amenable {

std::string to_string(RewardStrategy s) {
  switch (s) {
    case RewardStrategy::kFixedCleanAvg: return "fixed_clean_avg";
    case RewardStrategy::kWeighted: return "weighted";
    case RewardStrategy::kSelective: return "selective";
  }
  return "?";
}

RewardStrategy reward_strategy_from_string(const std::string& s) {
  for (auto k : {RewardStrategy::kFixedCleanAvg, RewardStrategy::kWeighted, RewardStrategy::kSelective})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown reward strategy '" + s + "'");
}

void RewardConfig::validate() const {
  if (!(s_rej >= 0.0 && s_rej < 1.0)) throw ConfigError("reward.s_rej must lie in [0,1)");
  if (s_rej > 0.0 && strategy != RewardStrategy::kSelective)
    throw ConfigError("reward.s_rej is only used by the selective strategy");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("reward.alpha must lie in [0,1]");
  if (!(phi >= 0.0 && phi <= 1.0)) throw ConfigError("reward.phi must lie in [0,1]");
}

std::size_t selective_kept_count(std::size_t m, double s_rej) {
  const double exact = (1.0 - s_rej) * static_cast<double>(m);
  return static_cast<std::size_t>(std::floor(exact + 1e-9));
}

std::vector<std::size_t> selective_subset(std::span<const double> scores, std::span<const std::size_t> ids,
                                          double s_rej, bool keep_lowest) {
  const std::size_t m = scores.size();
  if (!ids.empty() && ids.size() != m) throw ShapeError("selective: ids and scores differ in length");
  const std::size_t kept = selective_kept_count(m, s_rej);
  if (kept == 0) throw Error("rejection ratio leaves empty validation set");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  auto id = [&](std::size_t i) { return ids.empty() ? i : ids[i]; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return keep_lowest ? scores[a] < scores[b] : scores[a] > scores[b];
    return id(a) < id(b);
  });
  order.resize(kept);
  return order;
}

double unclipped_reward(RewardStrategy strategy, std::span<const double> losses, std::span<const double> scores,
                        double s_rej, std::span<const std::size_t> ids, bool keep_lowest) {
  const std::size_t m = losses.size();
  if (m == 0) throw Error("reward needs a nonempty validation set");
  if (strategy != RewardStrategy::kFixedCleanAvg && scores.size() != m)
    throw ShapeError("reward: one controller score per validation loss required");
  double acc = 0.0;
  switch (strategy) {
    case RewardStrategy::kFixedCleanAvg:
      for (double l : losses) acc += l;
      return -acc / static_cast<double>(m);
    case RewardStrategy::kWeighted:
      for (std::size_t j = 0; j < m; ++j) acc += losses[j] * scores[j];
      return -acc / static_cast<double>(m);
    case RewardStrategy::kSelective: {
      const auto kept = selective_subset(scores, ids, s_rej, keep_lowest);
      for (std::size_t j : kept) acc += losses[j];
      return -acc / static_cast<double>(kept.size());
    }
  }
  throw Error("unknown reward strategy");
}

double unclipped_reward(const RewardConfig& cfg, std::span<const double> losses, std::span<const double> scores,
                        std::span<const std::size_t> ids) {
  return unclipped_reward(cfg.strategy, losses, scores, cfg.s_rej, ids, cfg.selective_keep_lowest);
}

double clip(double r_tilde, RewardState& state, double alpha) {
  if (!std::isfinite(r_tilde)) throw NumericalError("non-finite unclipped reward");
  if (!state.initialized) {
    state.baseline = r_tilde;
    state.initialized = true;
  } else {
    state.baseline = alpha * state.baseline + (1.0 - alpha) * r_tilde;
  }
  return r_tilde - state.baseline;
}

std::vector<double> shaped_reward(double r_clipped, std::span<const double> h_a, double phi) {
  std::vector<double> out(h_a.size());
  for (std::size_t i = 0; i < h_a.size(); ++i) out[i] = phi * r_clipped + (1.0 - phi) * h_a[i];
  return out;
}

}  // namespace amenable
