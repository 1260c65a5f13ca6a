#include "amenable/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amenable/nn/checkpoint.hpp"

namespace amenable {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using nn::Tensor;

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kTaskSpecific: return "task_specific";
    case TrainMode::kTaskAgnostic: return "task_agnostic";
    case TrainMode::kShaped: return "shaped";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
  for (auto m : {TrainMode::kTaskSpecific, TrainMode::kTaskAgnostic, TrainMode::kShaped})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown training mode '" + s + "'");
}

std::string role_tag(TrainMode mode) { return to_string(mode); }

std::string to_string(PathwiseSource s) { return s == PathwiseSource::kMetric ? "metric" : "task_loss"; }

PathwiseSource pathwise_source_from_string(const std::string& s) {
  if (s == "metric") return PathwiseSource::kMetric;
  if (s == "task_loss") return PathwiseSource::kTaskLoss;
  throw ConfigError("unknown pathwise source '" + s + "'");
}

void TrainerConfig::validate(std::size_t train_size) const {
  if (batch_size == 0) throw ConfigError("trainer.batch_size must be >= 1");
  if (batch_size > train_size)
    throw ConfigError("trainer.batch_size " + std::to_string(batch_size) + " exceeds the training split (" +
                      std::to_string(train_size) + ")");
  if (steps == 0 || episodes == 0) throw ConfigError("trainer.steps and trainer.episodes must be >= 1");
  if (convergence_window < 2) throw ConfigError("trainer.convergence_window must be >= 2");
  reward.validate();
  policy.validate();
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

std::vector<std::size_t> draw_batch(std::size_t n, std::size_t b, Rng& rng) {
  // Partial Fisher-Yates; sorted so batch order does not depend on draw order.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < b; ++i) std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
  pool.resize(b);
  std::sort(pool.begin(), pool.end());
  return pool;
}

TaskData take_front(const TaskData& d, std::size_t m) {
  if (m == 0 || m >= d.size()) return d;
  std::vector<std::size_t> rows(m);
  std::iota(rows.begin(), rows.end(), 0);
  TaskData out;
  out.inputs = d.inputs.gather(rows);
  out.targets = d.targets.gather(rows);
  out.ids.assign(d.ids.begin(), d.ids.begin() + static_cast<long>(m));
  return out;
}

}  // namespace

EpisodeTrace run_episode(const EpisodeContext& ctx, nn::Network& predictor, nn::OptimizerState& predictor_opt,
                         const nn::Network& controller, RewardState& reward_state, Rng& rng,
                         std::vector<double>* val_losses) {
  const TrainerConfig& cfg = *ctx.cfg;
  const TaskData& train = *ctx.train;
  const TaskData& val = *ctx.validation;
  const std::size_t m = val.size();
  const bool shaped = !ctx.h_a_train.empty();

  EpisodeTrace trace;
  trace.steps.reserve(cfg.steps);
  std::vector<double> h_a_p(cfg.batch_size + m, 0.0);
  if (shaped)
    for (std::size_t j = 0; j < m; ++j) h_a_p[cfg.batch_size + j] = ctx.h_a_validation[j];

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    StepRecord st;
    st.rows = draw_batch(train.size(), cfg.batch_size, rng);
    for (std::size_t r : st.rows) st.ids.push_back(train.ids[r]);
    st.scores = score(controller, train.inputs.gather(st.rows));
    auto actions = sample_actions(st.scores, rng, st.ids);
    st.actions = std::move(actions.actions);

    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < st.rows.size(); ++i)
      if (st.actions[i]) {
        chosen.push_back(st.rows[i]);
        st.selected.push_back(st.ids[i]);
      }
    st.predictor_stepped = train_step(cfg.task, predictor, predictor_opt, train, chosen).stepped;

    const auto pred = predict(cfg.task, predictor, val);
    st.r_tilde = unclipped_reward(cfg.reward, pred.metric, ctx.validation_scores, val.ids);
    st.r = clip(st.r_tilde, reward_state, cfg.reward.alpha);
    st.r_bar = reward_state.baseline;
    st.val_metric = mean_performance(cfg.task, pred.metric);
    if (val_losses) {
      const auto& src = cfg.pathwise_source == PathwiseSource::kMetric ? pred.metric : pred.loss;
      for (std::size_t j = 0; j < m; ++j) (*val_losses)[j] += src[j];
    }

    if (shaped)
      for (std::size_t i = 0; i < st.rows.size(); ++i) h_a_p[i] = ctx.h_a_train[st.rows[i]];
    st.sample_rewards = shaped_reward(st.r, h_a_p, ctx.phi);
    st.shared_reward = ctx.phi * st.r;
    trace.steps.push_back(std::move(st));
  }
  return trace;
}

namespace {

bool converged(const std::vector<UpdateRecord>& updates, const TrainerConfig& cfg) {
  if (cfg.convergence_tolerance <= 0.0) return false;
  const std::size_t w = cfg.convergence_window, n = updates.size();
  if (n < w) return false;
  const std::size_t half = w / 2;
  double recent = 0, earlier = 0;
  for (std::size_t i = n - half; i < n; ++i) recent += updates[i].mean_r_tilde;
  for (std::size_t i = n - w; i < n - w + half; ++i) earlier += updates[i].mean_r_tilde;
  return (recent - earlier) / static_cast<double>(half) < cfg.convergence_tolerance;
}

TrainResult train_impl(TrainerConfig cfg, const synth::SplitDataset& data, const nn::Network* h_a,
                       const TraceObserver& observer_hook, const CheckpointHook& checkpoint_hook) {
  const auto started = std::chrono::steady_clock::now();
  if (cfg.mode == TrainMode::kTaskAgnostic) {
    const auto width = cfg.task.width;
    cfg.task = TaskSpec::reconstruction();
    cfg.task.width = width;
  }
  if (cfg.mode != TrainMode::kShaped) cfg.reward.phi = 1.0;
  cfg.validate(data.train.size());

  const TaskData train = make_task_data(cfg.task, data.train);
  const TaskData val = take_front(make_task_data(cfg.task, data.validation), cfg.validation_size);
  const nn::Shape input = train.inputs.sample_shape();

  TrainResult result;
  Rng pred_rng = make_rng(cfg.seed, "predictor");
  result.predictor = make_predictor(cfg.task, input, pred_rng);
  Rng ctrl_rng = make_rng(cfg.seed, "controller");
  result.controller = make_controller(input, cfg.controller, ctrl_rng);
  nn::OptimizerState pred_opt(result.predictor, cfg.predictor_optimizer);
  nn::OptimizerState ctrl_opt(result.controller, cfg.policy.optimizer);

  const bool shaped = cfg.mode == TrainMode::kShaped;
  std::vector<double> h_a_train, h_a_val;
  if (shaped) {
    if (!h_a) throw ArtifactError("shaped mode needs a frozen task-agnostic controller");
    if (h_a->input_shape() != input) throw ShapeError("frozen controller input does not match the data");
    h_a_train = score(*h_a, train.inputs);
    h_a_val = score(*h_a, val.inputs);
  }
  const double phi = shaped ? cfg.reward.phi : 1.0;

  auto& manifest = result.manifest;
  manifest.role = role_tag(cfg.mode);
  manifest.seed = cfg.seed;
  manifest.config = describe(cfg);
  manifest.run_id = make_run_id(manifest.config, cfg.seed);
  manifest.stop_reason = "max_updates";

  Rng warm_rng = make_rng(cfg.seed, "warmup");
  for (std::size_t s = 0; s < cfg.predictor_warmup_steps; ++s) {
    const auto rows = draw_batch(train.size(), cfg.batch_size, warm_rng);
    train_step(cfg.task, result.predictor, pred_opt, train, rows);
  }

  const bool needs_scores = cfg.reward.strategy != RewardStrategy::kFixedCleanAvg;
  const bool pathwise = cfg.reward.strategy == RewardStrategy::kWeighted && cfg.policy.pathwise_weight > 0.0;
  const double regression = shaped ? cfg.policy.regression_weight * (1.0 - phi) : 0.0;
  RewardState reward_state;

  for (std::size_t u = 0; u < cfg.max_updates; ++u) {
    try {
      if (cfg.predictor_reset_interval > 0 && u > 0 && u % cfg.predictor_reset_interval == 0) {
        Rng reset_rng = make_rng(cfg.seed, "predictor_reset", u);
        result.predictor = make_predictor(cfg.task, input, reset_rng);
        pred_opt = nn::OptimizerState(result.predictor, cfg.predictor_optimizer);
      }
      const std::vector<double> val_scores =
          needs_scores ? score(result.controller, val.inputs) : std::vector<double>{};
      EpisodeContext ctx{&cfg, &train, &val, val_scores, h_a_train, h_a_val, phi};

      std::vector<double> val_losses(val.size(), 0.0);
      std::vector<EpisodeTrace> episodes;
      for (std::size_t k = 0; k < cfg.episodes; ++k) {
        Rng ep_rng = make_rng(cfg.seed, "episode", u * cfg.episodes + k);
        episodes.push_back(run_episode(ctx, result.predictor, pred_opt, result.controller, reward_state, ep_rng,
                                       &val_losses));
        episodes.back().index = u * cfg.episodes + k;
      }
      if (observer_hook) observer_hook(u, episodes);

      ValidationTerms terms;
      terms.inputs = &val.inputs;
      if (pathwise) {
        const double steps = static_cast<double>(cfg.episodes * cfg.steps);
        double mean = 0;
        for (auto& l : val_losses) mean += (l /= steps);
        mean /= static_cast<double>(val_losses.size());
        double scale = 1.0;
        if (cfg.policy.standardize_pathwise) {
          double ss = 0;
          for (double l : val_losses) ss += (l - mean) * (l - mean);
          const double sd = std::sqrt(ss / static_cast<double>(val_losses.size()));
          if (sd > 0.0) scale = 1.0 / sd;
        }
        terms.pathwise.resize(val_losses.size());
        for (std::size_t j = 0; j < val_losses.size(); ++j)
          terms.pathwise[j] = -phi * cfg.policy.pathwise_weight * scale * (val_losses[j] - mean);
        if (shaped && phi < 1.0) {
          // The frozen task-agnostic scores enter with weight 1 - phi on the same scale.
          double mean_a = 0;
          for (double h : h_a_val) mean_a += h;
          mean_a /= static_cast<double>(h_a_val.size());
          double scale_a = 1.0;
          if (cfg.policy.standardize_pathwise) {
            double ss = 0;
            for (double h : h_a_val) ss += (h - mean_a) * (h - mean_a);
            const double sd = std::sqrt(ss / static_cast<double>(h_a_val.size()));
            if (sd > 0.0) scale_a = 1.0 / sd;
          }
          for (std::size_t j = 0; j < h_a_val.size(); ++j)
            terms.pathwise[j] += (1.0 - phi) * cfg.policy.pathwise_weight * scale_a * (h_a_val[j] - mean_a);
        }
      }
      if (regression > 0.0) {
        terms.regression_target = h_a_val;
        terms.regression_weight = regression;
      }
      const auto stats = policy_update(result.controller, ctrl_opt, episodes, train.inputs, cfg.policy, &terms);

      UpdateRecord rec;
      rec.index = u;
      rec.objective = stats.objective;
      std::size_t n_steps = 0, n_sel = 0, n_act = 0;
      for (const auto& ep : episodes)
        for (std::size_t t = 0; t < ep.steps.size(); ++t) {
          const auto& st = ep.steps[t];
          rec.mean_r_tilde += st.r_tilde;
          rec.mean_r += st.r;
          rec.val_metric += st.val_metric;
          n_sel += st.selected.size();
          n_act += st.actions.size();
          ++n_steps;
          manifest.history.push_back({u, ep.index, t, st.r_tilde, st.r_bar, st.r, st.val_metric});
        }
      rec.mean_r_tilde /= static_cast<double>(n_steps);
      rec.mean_r /= static_cast<double>(n_steps);
      rec.val_metric /= static_cast<double>(n_steps);
      rec.selected_fraction = static_cast<double>(n_sel) / static_cast<double>(n_act);
      rec.theta_digest = parameter_digest(result.controller);
      manifest.updates.push_back(std::move(rec));
      if (checkpoint_hook && cfg.checkpoint_interval > 0 && (u + 1) % cfg.checkpoint_interval == 0)
        checkpoint_hook(u + 1, result.controller, result.predictor);
    } catch (const NumericalError& e) {
      manifest.status = "failed";
      manifest.stop_reason = std::string("numerical failure at update ") + std::to_string(u) + ": " + e.what();
      throw NumericalError(manifest.stop_reason);
    }
    if (converged(manifest.updates, cfg)) {
      manifest.stop_reason = "converged";
      break;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace

TrainResult train_iqa(const TrainerConfig& cfg, const synth::SplitDataset& data, const TraceObserver& observer,
                      const CheckpointHook& checkpoint) {
  if (cfg.mode == TrainMode::kShaped) throw ConfigError("shaped mode needs train_shaped and a frozen controller");
  return train_impl(cfg, data, nullptr, observer, checkpoint);
}

TrainResult train_shaped(const TrainerConfig& cfg, const synth::SplitDataset& data, const nn::Network& frozen_h_a,
                         const TraceObserver& observer, const CheckpointHook& checkpoint) {
  TrainerConfig c = cfg;
  c.mode = TrainMode::kShaped;
  return train_impl(c, data, &frozen_h_a, observer, checkpoint);
}

std::vector<std::pair<std::string, std::string>> describe(const TrainerConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  auto add = [&](std::string k, std::string v) { out.emplace_back(std::move(k), std::move(v)); };
  add("trainer.mode", to_string(cfg.mode));
  add("task.kind", to_string(cfg.task.kind));
  add("task.loss", nn::to_string(cfg.task.loss.kind));
  add("task.dice_weight", fmt(cfg.task.loss.dice_weight));
  add("task.dice_smooth", fmt(cfg.task.loss.dice_smooth));
  add("task.reward_metric", to_string(cfg.task.reward_metric));
  add("task.threshold", fmt(cfg.task.threshold));
  add("task.width", fmt_int(cfg.task.width));
  add("task.optimizer", nn::to_string(cfg.predictor_optimizer.kind));
  add("task.learning_rate", fmt(cfg.predictor_optimizer.learning_rate));
  add("controller.width", fmt_int(cfg.controller.width));
  add("controller.hidden", fmt_int(cfg.controller.hidden));
  add("trainer.batch_size", fmt_int(cfg.batch_size));
  add("trainer.steps", fmt_int(cfg.steps));
  add("trainer.episodes", fmt_int(cfg.episodes));
  add("trainer.max_updates", fmt_int(cfg.max_updates));
  add("trainer.convergence_window", fmt_int(cfg.convergence_window));
  add("trainer.convergence_tolerance", fmt(cfg.convergence_tolerance));
  add("trainer.validation_size", fmt_int(cfg.validation_size));
  add("trainer.predictor_reset_interval", fmt_int(cfg.predictor_reset_interval));
  add("trainer.checkpoint_interval", fmt_int(cfg.checkpoint_interval));
  add("trainer.predictor_warmup_steps", fmt_int(cfg.predictor_warmup_steps));
  add("trainer.pathwise_source", to_string(cfg.pathwise_source));
  add("reward.strategy", to_string(cfg.reward.strategy));
  add("reward.s_rej", fmt(cfg.reward.s_rej));
  add("reward.alpha", fmt(cfg.reward.alpha));
  add("reward.phi", fmt(cfg.reward.phi));
  add("reward.selective_keep_lowest", cfg.reward.selective_keep_lowest ? "true" : "false");
  add("policy.rule", to_string(cfg.policy.rule));
  add("policy.optimizer", nn::to_string(cfg.policy.optimizer.kind));
  add("policy.learning_rate", fmt(cfg.policy.optimizer.learning_rate));
  add("policy.entropy_coef", fmt(cfg.policy.entropy_coef));
  add("policy.gamma", fmt(cfg.policy.gamma));
  add("policy.clip_ratio", fmt(cfg.policy.clip_ratio));
  add("policy.epochs", fmt_int(cfg.policy.epochs));
  add("policy.normalize_returns", cfg.policy.normalize_returns ? "true" : "false");
  add("policy.pathwise_weight", fmt(cfg.policy.pathwise_weight));
  add("policy.standardize_pathwise", cfg.policy.standardize_pathwise ? "true" : "false");
  add("policy.regression_weight", fmt(cfg.policy.regression_weight));
  add("trainer.seed", fmt_int(cfg.seed));
  return out;
}

std::string make_run_id(const std::vector<std::pair<std::string, std::string>>& config, std::uint64_t seed) {
  std::uint64_t h = hash_label("run");
  for (const auto& [k, v] : config) h = mix64(h ^ hash_label(k + "=" + v));
  h = mix64(h ^ seed);
  std::ostringstream os;
  os << "s" << seed << "-" << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string parameter_digest(const nn::Network& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : net.parameters())
    for (double v : p.value.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ULL;
      }
    }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  fs::create_directories(dir);
  ordered_json j;
  j["version"] = "run-v1";
  j["run_id"] = m.run_id;
  j["role"] = m.role;
  j["seed"] = m.seed;
  j["code_version"] = m.version;
  j["status"] = m.status;
  j["stop_reason"] = m.stop_reason;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  j["updates"] = ordered_json::array();
  for (const auto& u : m.updates)
    j["updates"].push_back({{"index", u.index},
                            {"mean_r_tilde", u.mean_r_tilde},
                            {"mean_r", u.mean_r},
                            {"val_metric", u.val_metric},
                            {"selected_fraction", u.selected_fraction},
                            {"objective", u.objective},
                            {"theta_digest", u.theta_digest}});
  std::ofstream os(dir / "manifest.json");
  if (!os) throw ArtifactError("cannot write " + (dir / "manifest.json").string());
  os << j.dump(1) << '\n';
}

void write_history_csv(const fs::path& path, const RunManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ArtifactError("cannot write " + path.string());
  os << "run_id,update_index,episode,step,R_tilde,R_bar,R,val_metric\n";
  for (const auto& h : m.history)
    os << m.run_id << ',' << h.update << ',' << h.episode << ',' << h.step << ',' << fmt(h.r_tilde) << ','
       << fmt(h.r_bar) << ',' << fmt(h.r) << ',' << fmt(h.val_metric) << '\n';
}

void save_run(const fs::path& dir, const TrainResult& result, double phi) {
  write_manifest(dir, result.manifest);
  write_history_csv(dir / "history.csv", result.manifest);
  nn::CheckpointMeta meta;
  meta.strings["role"] = result.manifest.role;
  meta.strings["run_id"] = result.manifest.run_id;
  meta.numbers["phi"] = phi;
  nn::save_checkpoint(dir / "controller", result.controller, meta);
  meta.strings["role"] = "predictor";
  nn::save_checkpoint(dir / "predictor", result.predictor, meta);
}

RunManifest read_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw ArtifactError("missing run manifest in " + dir.string());
  RunManifest m;
  try {
    const auto j = ordered_json::parse(is);
    m.run_id = j.at("run_id");
    m.role = j.at("role");
    m.seed = j.at("seed");
    m.version = j.at("code_version");
    m.status = j.at("status");
    m.stop_reason = j.at("stop_reason");
    for (const auto& [k, v] : j.at("config").items()) m.config.emplace_back(k, v.get<std::string>());
    for (const auto& u : j.at("updates"))
      m.updates.push_back({u.at("index"), u.at("mean_r_tilde"), u.at("mean_r"), u.at("val_metric"),
                           u.at("selected_fraction"), u.at("objective"), u.at("theta_digest")});
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("malformed run manifest in " + dir.string() + ": " + e.what());
  }
  return m;
}

}  // namespace amenable
