// Acceptance runner: one pass/fail line per criterion.
//
//   amenable_acceptance [--work DIR] [--only 1,2,8] [--seeds N]
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "amenable/controller.hpp"
#include "amenable/evaluation.hpp"
#include "amenable/experiment/runner.hpp"
#include "amenable/reward.hpp"
#include "amenable/synthdata.hpp"
#include "amenable/tasks.hpp"
#include "amenable/trainer.hpp"
#include "support/gradient_cases.hpp"
#include "support/reward_oracles.hpp"

namespace {

using namespace amenable;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string join(const std::vector<double>& v, const char* f = "%.3f") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s;
}

std::vector<double> negated(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

// Gradient fidelity over every layer and loss type.

Verdict gradient_fidelity() {
  constexpr std::size_t kInstances = 100;
  constexpr double kTolerance = 1e-4;
  const auto t0 = Clock::now();
  Rng rng = make_rng(2024, "acceptance_gradients");
  double worst = 0.0;
  std::string worst_case;
  std::size_t failures = 0, checks = 0;
  for (const auto& c : testing::gradient_cases())
    for (std::size_t i = 0; i < kInstances; ++i) {
      const auto r = testing::check_case(c, rng, i % 2 == 1, kTolerance);
      ++checks;
      if (r.flagged || r.max_relative_error > kTolerance) ++failures;
      if (r.max_relative_error > worst) {
        worst = r.max_relative_error;
        worst_case = c.name + "/" + r.worst_parameter;
      }
    }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << checks << " instances over " << testing::gradient_cases().size() << " cases, " << failures
    << " failures, worst rel " << fmt("%.2e", worst) << " (" << worst_case << "), " << fmt("%.1f", secs) << "s";
  return {failures == 0 && secs < 60.0, d.str()};
}

// Reward algebra oracles.

Verdict reward_algebra() {
  const auto t0 = Clock::now();
  const auto results = testing::reward_oracles();
  const double secs = seconds_since(t0);
  std::string failed;
  for (const auto& r : results)
    if (!r.pass) failed += " " + r.name + "[" + r.detail + "]";
  std::ostringstream d;
  d << results.size() << " oracles, " << fmt("%.3f", secs) << "s";
  if (!failed.empty()) d << ", failed:" << failed;
  return {failed.empty() && secs < 1.0, d.str()};
}

// Classification benchmark with in-ROI artefacts.

synth::GeneratorConfig classification_data(std::uint64_t seed) {
  synth::GeneratorConfig g;
  g.train = 2000;
  g.validation = 256;
  g.holdout = 512;
  g.height = g.width = 16;
  g.target_rate = 0.5;
  g.artefact_rate = 0.3;
  g.artefact_in_roi_rate = 1.0;
  g.hard_rate = 0.0;
  g.artefact_kind_weights = {0.5, 0.5, 0, 0};
  g.contrast_min = 0.3;
  g.contrast_max = 0.55;
  g.strength.noise_sigma = 0.9;
  g.strength.stripe_amplitude = 0.8;
  g.seed = seed;
  return g;
}

TrainerConfig classification_trainer(std::uint64_t seed) {
  TrainerConfig c;
  c.task = TaskSpec::classification();
  c.steps = 5;
  c.episodes = 2;
  c.max_updates = 100;
  c.convergence_tolerance = 0.0;
  c.policy.pathwise_weight = 2.0;
  c.pathwise_source = PathwiseSource::kMetric;
  c.seed = seed;
  return c;
}

struct ClassificationRun {
  double auc = 0.0;
  double baseline = 0.0;  // holdout accuracy at k = 0
  double selective = 0.0;  // holdout accuracy at k = 0.10
  double seconds = 0.0;
};

ClassificationRun run_classification(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto data = synth::generate(classification_data(seed));
  const auto cfg = classification_trainer(seed);
  const auto r = train_iqa(cfg, data);
  const auto train = make_task_data(cfg.task, data.train);
  std::vector<bool> corrupted;
  for (const auto& s : data.train) corrupted.push_back(s.artefact_flag);
  ClassificationRun out;
  out.auc = roc_auc(negated(score(r.controller, train.inputs)), corrupted);
  const auto holdout = make_task_data(cfg.task, data.holdout);
  const TrainedPair pair{&r.controller, &r.predictor};
  const std::vector<double> ks{0.0, 0.1};
  const auto curve = rejection_sweep(cfg.task, std::span(&pair, 1), holdout, ks);
  out.baseline = curve.points[0].mean;
  out.selective = curve.points[1].mean;
  out.seconds = seconds_since(t0);
  return out;
}

// Segmentation benchmark with independent artefact and hard flags.

synth::GeneratorConfig segmentation_data(std::uint64_t seed) {
  synth::GeneratorConfig g;
  g.train = 2000;
  g.validation = 256;
  g.holdout = 1000;
  g.height = g.width = 16;
  g.target_rate = 1.0;
  g.artefact_rate = 0.3;
  g.artefact_in_roi_rate = 0.5;
  g.hard_rate = 0.2;
  g.artefact_kind_weights = {0.5, 0.5, 0, 0};
  g.contrast_min = 0.3;
  g.contrast_max = 0.55;
  g.strength.noise_sigma = 0.3;
  g.strength.stripe_amplitude = 0.3;
  g.seed = seed;
  return g;
}

TrainerConfig segmentation_trainer(std::uint64_t seed) {
  TrainerConfig c;
  c.task = TaskSpec::segmentation();
  c.steps = 5;
  c.episodes = 2;
  c.max_updates = 100;
  c.convergence_tolerance = 0.0;
  c.policy.pathwise_weight = 2.0;
  c.pathwise_source = PathwiseSource::kMetric;
  c.seed = seed;
  return c;
}

constexpr double kShapedPhi = 0.9;
constexpr double kQuadrantK = 0.1;

struct SegmentationRun {
  double auc_artefact = 0.0, auc_hard = 0.0;
  double kappa_between = 0.0, kappa_ts_impact = 0.0, kappa_ta_artefact = 0.0;
  std::array<double, 4> medians{};
  std::array<std::size_t, 4> counts{};
  double seconds_ta = 0.0, seconds_ts = 0.0, seconds_shaped = 0.0;
};

double prevalence(const std::vector<bool>& v) {
  return static_cast<double>(std::count(v.begin(), v.end(), true)) / static_cast<double>(v.size());
}

SegmentationRun run_segmentation(std::uint64_t seed) {
  const auto data = synth::generate(segmentation_data(seed));
  const auto cfg = segmentation_trainer(seed);
  TrainerConfig ta_cfg = cfg;
  ta_cfg.mode = TrainMode::kTaskAgnostic;
  TrainerConfig sh_cfg = cfg;
  sh_cfg.mode = TrainMode::kShaped;
  sh_cfg.reward.phi = kShapedPhi;

  SegmentationRun out;
  auto t0 = Clock::now();
  const auto ta = train_iqa(ta_cfg, data);
  out.seconds_ta = seconds_since(t0);
  t0 = Clock::now();
  const auto ts = train_iqa(cfg, data);
  out.seconds_ts = seconds_since(t0);
  t0 = Clock::now();
  const auto sh = train_shaped(sh_cfg, data, ta.controller);
  out.seconds_shaped = seconds_since(t0);

  const auto holdout = make_task_data(cfg.task, data.holdout);
  const auto s_ta = score(ta.controller, holdout.inputs);
  const auto s_ts = score(ts.controller, holdout.inputs);
  const auto s_sh = score(sh.controller, holdout.inputs);

  std::vector<bool> artefact, impact;
  std::vector<double> clean_scores;
  std::vector<bool> clean_hard;
  for (std::size_t i = 0; i < data.holdout.size(); ++i) {
    const auto& s = data.holdout[i];
    artefact.push_back(s.artefact_flag);
    impact.push_back(experiment::task_impacting(s));
    if (!s.artefact_flag) {
      clean_scores.push_back(-s_ta[i]);
      clean_hard.push_back(s.hard_flag);
    }
  }
  out.auc_artefact = roc_auc(negated(s_ta), artefact);
  out.auc_hard = roc_auc(clean_scores, clean_hard);
  out.kappa_between = cohens_kappa(contingency(s_ts, s_ta, holdout.ids, kQuadrantK, kQuadrantK));
  out.kappa_ts_impact = cohens_kappa(contingency(s_ts, holdout.ids, prevalence(impact), impact));
  out.kappa_ta_artefact = cohens_kappa(contingency(s_ta, holdout.ids, prevalence(artefact), artefact));
  const auto q = quadrant_report(s_ts, s_ta, s_sh, holdout.ids, kQuadrantK);
  out.medians = q.median_score;
  for (std::size_t i = 0; i < 4; ++i) out.counts[i] = q.ids[i].size();
  return out;
}

// Small dataset for the mechanical criteria.

synth::SplitDataset small_data(std::uint64_t seed) {
  synth::GeneratorConfig g;
  g.train = 256;
  g.validation = 40;
  g.holdout = 64;
  g.height = g.width = 16;
  g.target_rate = 0.5;
  g.seed = seed;
  return synth::generate(g);
}

TrainerConfig small_trainer(std::uint64_t seed) {
  TrainerConfig c;
  c.batch_size = 16;
  c.steps = 3;
  c.episodes = 2;
  c.max_updates = 12;
  c.convergence_tolerance = 0.0;
  c.controller.width = 4;
  c.controller.hidden = 8;
  c.seed = seed;
  return c;
}

Verdict phi_one_degeneracy() {
  const auto data = small_data(11);
  TrainerConfig ts = small_trainer(11);
  TrainerConfig sh = ts;
  sh.mode = TrainMode::kShaped;
  sh.reward.phi = 1.0;
  Rng rng = make_rng(99, "frozen");
  const auto frozen = make_controller(make_task_data(ts.task, data.validation).inputs.sample_shape(), ts.controller, rng);
  const auto a = train_iqa(ts, data);
  const auto b = train_shaped(sh, data, frozen);
  std::size_t same = 0;
  const std::size_t n = std::min(a.manifest.updates.size(), b.manifest.updates.size());
  for (std::size_t u = 0; u < n; ++u) {
    const auto& x = a.manifest.updates[u];
    const auto& y = b.manifest.updates[u];
    if (x.theta_digest != y.theta_digest || x.mean_r_tilde != y.mean_r_tilde || x.mean_r != y.mean_r ||
        x.objective != y.objective || x.selected_fraction != y.selected_fraction)
      break;
    ++same;
  }
  const bool history_equal = a.manifest.history.size() == b.manifest.history.size() &&
                             std::equal(a.manifest.history.begin(), a.manifest.history.end(),
                                        b.manifest.history.begin(), [](const StepHistory& p, const StepHistory& q) {
                                          return p.r_tilde == q.r_tilde && p.r_bar == q.r_bar && p.r == q.r &&
                                                 p.val_metric == q.val_metric;
                                        });
  const bool final_equal = parameter_digest(a.controller) == parameter_digest(b.controller) &&
                           parameter_digest(a.predictor) == parameter_digest(b.predictor);
  std::ostringstream d;
  d << same << "/" << n << " updates identical, step history " << (history_equal ? "identical" : "differs")
    << ", final parameters " << (final_equal ? "identical" : "differ");
  return {same >= 10 && same == n && history_equal && final_equal, d.str()};
}

Verdict selective_mechanics() {
  const auto data = small_data(21);
  std::ostringstream d;
  bool ok = true;
  for (double s_rej : {0.0, 0.1, 0.2, 0.3}) {
    TrainerConfig cfg = small_trainer(21);
    cfg.reward.strategy = RewardStrategy::kSelective;
    cfg.reward.s_rej = s_rej;

    // Whole runs complete.
    bool completed = true;
    try {
      train_iqa(cfg, data);
    } catch (const std::exception& e) {
      completed = false;
      d << " s_rej " << s_rej << " threw: " << e.what() << ";";
    }

    // Step by step: the reward uses exactly floor((1 - s_rej) M) samples.
    const auto train = make_task_data(cfg.task, data.train);
    const auto val = make_task_data(cfg.task, data.validation);
    Rng init = make_rng(cfg.seed, "predictor");
    nn::Network predictor = make_predictor(cfg.task, train.inputs.sample_shape(), init);
    Rng crng = make_rng(cfg.seed, "controller");
    nn::Network controller = make_controller(train.inputs.sample_shape(), cfg.controller, crng);
    nn::OptimizerState popt(predictor, cfg.predictor_optimizer);
    nn::OptimizerState copt(controller, cfg.policy.optimizer);
    TrainerConfig one = cfg;
    one.steps = 1;
    RewardState state;
    const std::size_t m = val.size();
    const auto expected = static_cast<std::size_t>(std::floor((1.0 - s_rej) * static_cast<double>(m) + 1e-9));
    std::size_t steps = 0, size_ok = 0, reward_ok = 0;
    for (std::size_t u = 0; u < 6; ++u) {
      const auto val_scores = score(controller, val.inputs);
      const EpisodeContext ctx{&one, &train, &val, val_scores, {}, {}, 1.0};
      std::vector<EpisodeTrace> episodes;
      for (std::size_t t = 0; t < 4; ++t) {
        Rng ep = make_rng(cfg.seed, "acceptance_episode", u * 4 + t);
        auto trace = run_episode(ctx, predictor, popt, controller, state, ep);
        ++steps;
        const auto kept = selective_subset(val_scores, val.ids, s_rej);
        if (kept.size() == expected && kept.size() == selective_kept_count(m, s_rej)) ++size_ok;
        const auto metric = predict(cfg.task, predictor, val).metric;
        double sum = 0;
        for (std::size_t j : kept) sum += metric[j];
        if (trace.steps[0].r_tilde == -sum / static_cast<double>(kept.size())) ++reward_ok;
        episodes.push_back(std::move(trace));
      }
      policy_update(controller, copt, episodes, train.inputs, cfg.policy);
    }

    // Metamorphic: changing the losses of rejected samples leaves R~ unchanged.
    Rng mrng = make_rng(31, "metamorphic", static_cast<std::uint64_t>(s_rej * 100));
    std::size_t trials = 0, invariant = 0;
    for (std::size_t trial = 0; trial < 200; ++trial) {
      const std::size_t mm = 5 + uniform_index(mrng, 60);
      std::vector<double> losses(mm), scores(mm);
      for (auto& l : losses) l = uniform01(mrng);
      for (auto& s : scores) s = uniform01(mrng);
      const double before = unclipped_reward(RewardStrategy::kSelective, losses, scores, s_rej);
      const auto kept = selective_subset(scores, {}, s_rej);
      const std::set<std::size_t> keep(kept.begin(), kept.end());
      for (std::size_t j = 0; j < mm; ++j)
        if (!keep.count(j)) losses[j] = uniform(mrng, -100, 100);
      const double after = unclipped_reward(RewardStrategy::kSelective, losses, scores, s_rej);
      ++trials;
      if (before == after) ++invariant;
    }
    const bool pass = completed && size_ok == steps && reward_ok == steps && invariant == trials;
    ok = ok && pass;
    d << " s_rej " << s_rej << ": kept " << expected << "/" << m << " at " << size_ok << "/" << steps
      << " steps, reward matched " << reward_ok << "/" << steps << ", invariant " << invariant << "/" << trials << ";";
  }
  return {ok, d.str()};
}

// Determinism of a study cell through the command layer.

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      std::ifstream is(e.path(), std::ios::binary);
      out[fs::relative(e.path(), root).generic_string()] = {std::istreambuf_iterator<char>(is), {}};
    }
  return out;
}

Verdict determinism(const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "cell.toml");
    os << "[data]\ntrain = 128\nvalidation = 24\nholdout = 48\nheight = 16\nwidth = 16\n"
          "target_rate = 0.5\nartefact_rate = 0.3\nhard_rate = 0.25\n"
          "[task]\nkind = \"classification\"\nwidth = 4\n"
          "[trainer]\nbatch_size = 16\nsteps = 3\nepisodes = 2\nmax_updates = 4\n"
          "convergence_tolerance = 0.0\ncontroller_width = 4\ncontroller_hidden = 8\ncheckpoint_interval = 2\n"
          "[evaluation]\nks = [0, 0.1]\n";
  }
  std::ostringstream log;
  std::vector<int> codes;
  for (const char* name : {"a", "b"}) {
    experiment::CommandOptions o;
    o.command = "study";
    o.study_kind = "shaped";
    o.config = dir / "cell.toml";
    o.out = dir / name;
    o.phis = std::vector<double>{0.9};
    o.seeds = std::vector<std::uint64_t>{7};
    o.jobs = 1;
    codes.push_back(experiment::run(o, log));
  }
  if (codes[0] != 0 || codes[1] != 0)
    return {false, "study exited with " + std::to_string(codes[0]) + "/" + std::to_string(codes[1]) + ": " + log.str()};
  const auto a = tree_contents(dir / "a");
  const auto b = tree_contents(dir / "b");
  std::size_t manifests = 0, checkpoints = 0, differing = 0;
  std::string first_diff;
  for (const auto& [path, bytes] : a) {
    const bool manifest = path.ends_with("manifest.json");
    const bool checkpoint = path.find("controller") != std::string::npos || path.find("predictor") != std::string::npos;
    if (!manifest && !checkpoint) continue;
    manifests += manifest;
    checkpoints += checkpoint && !manifest;
    auto it = b.find(path);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      if (first_diff.empty()) first_diff = path;
    }
  }
  std::size_t other_diff = 0;
  for (const auto& [path, bytes] : a) {
    auto it = b.find(path);
    if (it == b.end() || it->second != bytes) ++other_diff;
  }
  std::ostringstream d;
  d << manifests << " manifests and " << checkpoints << " checkpoint files compared, " << differing << " differ";
  if (!first_diff.empty()) d << " (first: " << first_diff << ")";
  d << "; " << a.size() << " files in total, " << other_diff << " differ";
  return {manifests > 0 && checkpoints > 0 && differing == 0 && a.size() == b.size(), d.str()};
}

struct Options {
  fs::path work = fs::temp_directory_path() / "amenable_acceptance";
  std::set<int> only;
  std::size_t seeds = 5;
};

Options parse(int argc, char** argv) {
  Options o;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    const auto next = [&]() -> std::string {
      if (i + 1 >= argc) throw std::runtime_error("missing value for " + a);
      return argv[++i];
    };
    if (a == "--work") {
      o.work = next();
    } else if (a == "--only") {
      std::stringstream ss(next());
      for (std::string t; std::getline(ss, t, ',');) o.only.insert(std::stoi(t));
    } else if (a == "--seeds") {
      o.seeds = static_cast<std::size_t>(std::stoul(next()));
    } else {
      throw std::runtime_error("unknown argument " + a);
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  try {
    opt = parse(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  fs::create_directories(opt.work);
  const auto wanted = [&](int c) { return opt.only.empty() || opt.only.count(c); };
  std::vector<std::uint64_t> seeds(opt.seeds);
  std::iota(seeds.begin(), seeds.end(), 1);

  std::map<int, std::pair<std::string, Verdict>> verdicts;
  const auto report = [&](int c, const std::string& name, Verdict v) {
    std::printf("criterion %2d %-28s %s  %s\n", c, name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    verdicts[c] = {name, std::move(v)};
  };
  const auto guarded = [&](int c, const std::string& name, const std::function<Verdict()>& f) {
    if (!wanted(c)) return;
    try {
      report(c, name, f());
    } catch (const std::exception& e) {
      report(c, name, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, "gradient_fidelity", gradient_fidelity);
  guarded(2, "reward_algebra", reward_algebra);

  if (wanted(3) || wanted(4)) {
    std::vector<ClassificationRun> runs;
    std::string error;
    try {
      for (auto s : seeds) {
        runs.push_back(run_classification(s));
        const auto& r = runs.back();
        std::printf("  classification seed %llu: auc %.3f, k=0 %.4f, k=0.10 %.4f, %.0fs\n",
                    static_cast<unsigned long long>(s), r.auc, r.baseline, r.selective, r.seconds);
        std::fflush(stdout);
      }
    } catch (const std::exception& e) {
      error = e.what();
    }
    if (!error.empty()) {
      guarded(3, "corruption_detection", [&]() -> Verdict { return {false, "error: " + error}; });
      guarded(4, "rejection_improvement", [&]() -> Verdict { return {false, "error: " + error}; });
    } else {
      std::vector<double> auc, base, sel, secs;
      for (const auto& r : runs) {
        auc.push_back(r.auc);
        base.push_back(r.baseline);
        sel.push_back(r.selective);
        secs.push_back(r.seconds);
      }
      guarded(3, "corruption_detection", [&]() -> Verdict {
        const double m = mean(auc);
        const double lo = *std::min_element(auc.begin(), auc.end());
        const double slowest = *std::max_element(secs.begin(), secs.end());
        return {m >= 0.80 && lo >= 0.75 && slowest < 900.0,
                "AUC mean " + fmt("%.3f", m) + " min " + fmt("%.3f", lo) + " [" + join(auc) + "], slowest seed " +
                    fmt("%.0f", slowest) + "s"};
      });
      guarded(4, "rejection_improvement", [&]() -> Verdict {
        const auto t = paired_t_test_greater(sel, base);
        return {mean(sel) > mean(base) && t.p < 0.05,
                "k=0.10 mean " + fmt("%.4f", mean(sel)) + " vs k=0 " + fmt("%.4f", mean(base)) + ", t " +
                    fmt("%.2f", t.t) + ", one-sided p " + fmt("%.2e", t.p)};
      });
    }
  }

  if (wanted(5) || wanted(6) || wanted(7)) {
    std::vector<SegmentationRun> runs;
    std::string error;
    try {
      for (auto s : seeds) {
        runs.push_back(run_segmentation(s));
        const auto& r = runs.back();
        std::printf(
            "  segmentation seed %llu: auc art %.3f hard %.3f, kappa ts/ta %.3f ts/impact %.3f ta/artefact %.3f, "
            "medians TP %.3f FP %.3f FN %.3f TN %.3f (n %zu %zu %zu %zu), %.0f+%.0f+%.0fs\n",
            static_cast<unsigned long long>(s), r.auc_artefact, r.auc_hard, r.kappa_between, r.kappa_ts_impact,
            r.kappa_ta_artefact, r.medians[0], r.medians[1], r.medians[2], r.medians[3], r.counts[0], r.counts[1],
            r.counts[2], r.counts[3], r.seconds_ta, r.seconds_ts, r.seconds_shaped);
        std::fflush(stdout);
      }
    } catch (const std::exception& e) {
      error = e.what();
    }
    const auto failed = [&]() -> Verdict { return {false, "error: " + error}; };
    std::vector<double> art, hard, between, own_ts, own_ta, secs;
    std::size_t ordered = 0;
    for (const auto& r : runs) {
      art.push_back(r.auc_artefact);
      hard.push_back(r.auc_hard);
      between.push_back(r.kappa_between);
      own_ts.push_back(r.kappa_ts_impact);
      own_ta.push_back(r.kappa_ta_artefact);
      secs.push_back(std::max({r.seconds_ta, r.seconds_ts, r.seconds_shaped}));
      const auto& m = r.medians;
      if (m[0] < m[1] && m[0] < m[2] && m[2] < m[3]) ++ordered;
    }
    guarded(5, "task_agnostic_artefacts", error.empty() ? std::function<Verdict()>([&]() -> Verdict {
      const double lo = *std::min_element(art.begin(), art.end());
      const double hi = *std::max_element(hard.begin(), hard.end());
      const double slowest = *std::max_element(secs.begin(), secs.end());
      return {lo >= 0.80 && hi <= 0.65 && slowest < 900.0,
              "artefact AUC min " + fmt("%.3f", lo) + " [" + join(art) + "], hard AUC max " + fmt("%.3f", hi) + " [" +
                  join(hard) + "]"};
    }) : std::function<Verdict()>(failed));
    guarded(6, "iqa_disagreement", error.empty() ? std::function<Verdict()>([&]() -> Verdict {
      const double b = mean(between), a = mean(own_ts), c = mean(own_ta);
      return {b < 0.4 && a > 0.4 && c > 0.4,
              "mean kappa ts/ta " + fmt("%.3f", b) + " [" + join(between) + "], ts/impact " + fmt("%.3f", a) + " [" +
                  join(own_ts) + "], ta/artefact " + fmt("%.3f", c) + " [" + join(own_ta) + "]"};
    }) : std::function<Verdict()>(failed));
    guarded(7, "quadrant_ordering", error.empty() ? std::function<Verdict()>([&]() -> Verdict {
      const std::size_t need = (runs.size() * 4 + 4) / 5;
      return {ordered >= need, std::to_string(ordered) + "/" + std::to_string(runs.size()) +
                                   " seeds ordered TP < FP, TP < FN < TN at k = 0.1 (need " +
                                   std::to_string(need) + ")"};
    }) : std::function<Verdict()>(failed));
  }

  guarded(8, "phi_one_degeneracy", phi_one_degeneracy);
  guarded(9, "selective_mechanics", selective_mechanics);
  guarded(10, "determinism", [&] { return determinism(opt.work); });

  std::size_t passed = 0;
  for (const auto& [c, v] : verdicts) passed += v.second.pass;
  std::printf("%zu/%zu criteria passed\n", passed, verdicts.size());
  return passed == verdicts.size() ? 0 : 1;
}
