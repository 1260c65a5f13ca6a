#pragma once

// Worked reward examples and algebraic identities, shared by the unit tests
// and the acceptance runner. Each check reports pass or fail with a detail.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "amenable/common.hpp"
#include "amenable/reward.hpp"

namespace amenable::testing {

struct OracleResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string show(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline OracleResult equal(std::string name, double got, double want) {
  return {std::move(name), got == want, "got " + show(got) + " want " + show(want)};
}

// Every subset of size kept; returns the one with the largest score sum
// (ties: lexicographically smallest index set).
inline std::vector<std::size_t> best_subset_by_enumeration(const std::vector<double>& h, std::size_t kept) {
  const std::size_t m = h.size();
  std::vector<std::size_t> best;
  double best_sum = -1e300;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != kept) continue;
    std::vector<std::size_t> s;
    double sum = 0;
    for (std::size_t j = 0; j < m; ++j)
      if (mask & (1u << j)) {
        s.push_back(j);
        sum += h[j];
      }
    if (sum > best_sum || (sum == best_sum && s < best)) {
      best_sum = sum;
      best = s;
    }
  }
  return best;
}

}  // namespace detail

inline std::vector<OracleResult> reward_oracles() {
  using detail::equal;
  std::vector<OracleResult> out;
  const auto avg = RewardStrategy::kFixedCleanAvg, wtd = RewardStrategy::kWeighted, sel = RewardStrategy::kSelective;

  out.push_back(equal("average l=[1,2,3]", unclipped_reward(avg, std::vector<double>{1, 2, 3}), -2.0));
  out.push_back(equal("weighted l=[1,2] h=[0.5,1]",
                      unclipped_reward(wtd, std::vector<double>{1, 2}, std::vector<double>{0.5, 1.0}), -1.25));
  {
    const std::vector<double> l{1, 4, 2, 3}, h{0.9, 0.1, 0.5, 0.7};
    out.push_back(equal("selective s_rej=0.25", unclipped_reward(sel, l, h, 0.25), -2.0));
    auto kept = selective_subset(h, {}, 0.25);
    std::sort(kept.begin(), kept.end());
    const auto oracle = detail::best_subset_by_enumeration(h, 3);
    out.push_back({"selective kept set equals enumeration oracle", kept == oracle, ""});
  }
  {
    bool ok = true;
    std::string bad;
    for (std::size_t m = 1; m <= 10 && ok; ++m)
      for (double s : {0.0, 0.1, 0.2, 0.25, 0.3, 0.5, 0.7, 0.9}) {
        if (selective_kept_count(m, s) == 0) continue;
        std::vector<double> h(m);
        for (std::size_t j = 0; j < m; ++j) h[j] = std::fmod(0.37 * static_cast<double>(j * j + 3), 1.0);
        auto kept = selective_subset(h, {}, s);
        std::sort(kept.begin(), kept.end());
        if (kept != detail::best_subset_by_enumeration(h, selective_kept_count(m, s))) {
          ok = false;
          bad = "m=" + std::to_string(m) + " s_rej=" + detail::show(s);
        }
      }
    out.push_back({"selective top-score subset over all small M", ok, bad});
  }
  {
    bool thrown = false;
    try {
      unclipped_reward(sel, std::vector<double>{1, 2}, std::vector<double>{0.3, 0.4}, 0.6);
    } catch (const Error& e) {
      thrown = std::string(e.what()) == "rejection ratio leaves empty validation set";
    }
    out.push_back({"selective with empty kept set is an error", thrown, ""});
  }
  {
    const std::vector<double> l{0.3, 1.7, 0.25, 2.5, 0.125}, ones(5, 1.0), h{0.2, 0.9, 0.4, 0.6, 0.8};
    out.push_back(equal("weighted at h=1 equals average", unclipped_reward(wtd, l, ones), unclipped_reward(avg, l)));
    out.push_back(equal("selective at s_rej=0 equals average", unclipped_reward(sel, l, h, 0.0), unclipped_reward(avg, l)));
    auto l2 = l;
    l2[0] = 1e6;  // sample 0 has the lowest score and is rejected at s_rej=0.2
    out.push_back(equal("selective ignores rejected losses", unclipped_reward(sel, l2, h, 0.2),
                        unclipped_reward(sel, l, h, 0.2)));
  }
  {
    RewardState st;
    const double r = clip(-2.0, st, 0.9);
    out.push_back({"clip first call", r == 0.0 && st.baseline == -2.0 && st.initialized,
                   "R " + detail::show(r) + " baseline " + detail::show(st.baseline)});
  }
  {
    RewardState st{0.0, true};
    const double r = clip(1.0, st, 0.9);
    out.push_back({"clip substitution", std::abs(st.baseline - 0.1) < 1e-15 && std::abs(r - 0.9) < 1e-15,
                   "R " + detail::show(r) + " baseline " + detail::show(st.baseline)});
  }
  {
    // Constant stream from a zero baseline: R_t = c alpha^t.
    RewardState st{0.0, true};
    const double c = 1.5, alpha = 0.9;
    bool ok = true;
    double worst = 0;
    for (int t = 1; t <= 40; ++t) {
      const double r = clip(c, st, alpha);
      const double want = c * std::pow(alpha, t);
      worst = std::max(worst, std::abs(r - want));
      ok = ok && std::abs(r - want) <= 1e-12;
    }
    out.push_back({"clip recursion closed form", ok, "max error " + detail::show(worst)});
  }
  {
    RewardState st;
    bool ok = true;
    double lo = 1e300, hi = -1e300;
    for (int t = 0; t < 50; ++t) {
      const double r = std::sin(1.3 * t) * 3.0 + 0.1 * t;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      clip(r, st, 0.7);
      ok = ok && st.baseline >= lo - 1e-12 && st.baseline <= hi + 1e-12;
    }
    out.push_back({"clip baseline stays in observed envelope", ok, ""});
  }
  {
    const std::vector<double> h_a{0.1, 0.55, 0.8, 0.999};
    const auto r1 = shaped_reward(0.37, h_a, 1.0);
    out.push_back({"shaped phi=1 broadcasts R", std::all_of(r1.begin(), r1.end(), [](double v) { return v == 0.37; }),
                   ""});
    out.push_back({"shaped phi=0 returns h_a verbatim", shaped_reward(0.37, h_a, 0.0) == h_a, ""});
    const double got = shaped_reward(0.5, std::vector<double>{0.8}, 0.9)[0];
    out.push_back({"shaped phi=0.9 R=0.5 h_a=0.8", std::abs(got - 0.53) <= 1e-15, "got " + detail::show(got)});
    bool affine = true;
    for (double phi : {0.0, 0.1, 0.35, 0.5, 0.85, 0.95, 1.0}) {
      const auto r = shaped_reward(0.37, h_a, phi);
      for (std::size_t i = 0; i < h_a.size(); ++i)
        affine = affine && r[i] >= std::min(0.37, h_a[i]) - 1e-15 && r[i] <= std::max(0.37, h_a[i]) + 1e-15;
    }
    out.push_back({"shaped reward lies between R and h_a", affine, ""});
  }
  return out;
}

}  // namespace amenable::testing
