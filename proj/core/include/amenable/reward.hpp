#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amenable/common.hpp"

namespace amenable {

enum class RewardStrategy { kFixedCleanAvg, kWeighted, kSelective };

std::string to_string(RewardStrategy s);
RewardStrategy reward_strategy_from_string(const std::string& s);

struct RewardConfig {
  RewardStrategy strategy = RewardStrategy::kWeighted;
  /// Fraction of lowest-scored validation samples dropped by `selective`.
  double s_rej = 0.0;
  double alpha = 0.9;
  /// Shaping weight; 1 is the plain task reward.
  double phi = 1.0;
  /// Ablation: keep the lowest-scored samples instead of the highest.
  bool selective_keep_lowest = false;

  void validate() const;
};

/// M' = floor((1 - s_rej) M), robust to representation error in s_rej.
std::size_t selective_kept_count(std::size_t m, double s_rej);

/// Positions of the kept validation samples, ordered by score (descending, or
/// ascending with keep_lowest). Ties go to the smaller id. Empty `ids` means
/// ids equal positions. Throws Error when M' = 0.
std::vector<std::size_t> selective_subset(std::span<const double> scores, std::span<const std::size_t> ids,
                                          double s_rej, bool keep_lowest = false);

/// R~ from validation losses l_j and controller scores h_j:
///   fixed_clean_avg  -mean(l)
///   weighted         -mean(l h)
///   selective        -mean of l over selective_subset
double unclipped_reward(RewardStrategy strategy, std::span<const double> losses, std::span<const double> scores = {},
                        double s_rej = 0.0, std::span<const std::size_t> ids = {}, bool keep_lowest = false);
double unclipped_reward(const RewardConfig& cfg, std::span<const double> losses, std::span<const double> scores,
                        std::span<const std::size_t> ids = {});

/// Running clip baseline R-bar.
struct RewardState {
  double baseline = 0.0;
  bool initialized = false;
};

/// Updates R-bar <- alpha R-bar + (1 - alpha) R~ (R-bar := R~ on the first
/// call) and returns R = R~ - R-bar.
double clip(double r_tilde, RewardState& state, double alpha);

/// R_i = phi R + (1 - phi) h_a(x_i) for every sample.
std::vector<double> shaped_reward(double r_clipped, std::span<const double> h_a, double phi);

}  // namespace amenable
