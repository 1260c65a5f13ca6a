#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amenable/controller.hpp"
#include "amenable/reward.hpp"
#include "amenable/tasks.hpp"

namespace amenable {

enum class TrainMode { kTaskSpecific, kTaskAgnostic, kShaped };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);
/// Checkpoint role tag of a mode: task_specific, task_agnostic or shaped.
std::string role_tag(TrainMode mode);

/// Source of the validation losses behind the pathwise controller term.
enum class PathwiseSource { kMetric, kTaskLoss };
std::string to_string(PathwiseSource s);
PathwiseSource pathwise_source_from_string(const std::string& s);

struct TrainerConfig {
  TrainMode mode = TrainMode::kTaskSpecific;
  TaskSpec task = TaskSpec::classification();
  ControllerSpec controller;
  nn::OptimizerConfig predictor_optimizer{nn::OptimizerKind::kAdam, 1e-3};
  std::size_t batch_size = 32;      // B
  std::size_t steps = 10;           // T
  std::size_t episodes = 4;         // K
  std::size_t max_updates = 200;
  std::size_t convergence_window = 20;
  /// Stop once the reward improvement over the window drops below this;
  /// values <= 0 disable early stopping.
  double convergence_tolerance = 1e-3;
  /// M; 0 uses the whole validation split.
  std::size_t validation_size = 0;
  /// Re-initialize the predictor every this many updates; 0 never.
  std::size_t predictor_reset_interval = 0;
  /// Updates between intermediate checkpoints; 0 keeps only the final one.
  std::size_t checkpoint_interval = 0;
  /// Predictor steps on uniformly drawn batches before the first episode.
  std::size_t predictor_warmup_steps = 0;
  PathwiseSource pathwise_source = PathwiseSource::kMetric;
  RewardConfig reward;
  PolicyUpdateConfig policy;
  std::uint64_t seed = 0;

  /// Throws ConfigError; `train_size` is N.
  void validate(std::size_t train_size) const;
};

/// Summary of one controller update.
struct UpdateRecord {
  std::size_t index = 0;
  double mean_r_tilde = 0.0;
  double mean_r = 0.0;
  double val_metric = 0.0;
  double selected_fraction = 0.0;
  double objective = 0.0;
  /// FNV-1a digest of the controller parameters after the update.
  std::string theta_digest;
};

/// One row of the reward/metric history.
struct StepHistory {
  std::size_t update = 0, episode = 0, step = 0;
  double r_tilde = 0.0, r_bar = 0.0, r = 0.0, val_metric = 0.0;
};

struct RunManifest {
  std::string run_id;
  std::string role;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  /// Resolved configuration as (dotted key, value text) pairs.
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<UpdateRecord> updates;
  std::vector<StepHistory> history;
  std::string stop_reason;
  std::string status = "ok";
};

struct TrainResult {
  nn::Network predictor;
  nn::Network controller;
  RunManifest manifest;
  double seconds = 0.0;  // wall clock, kept out of the manifest
};

/// Sees the K episodes of every update before the controller is updated.
using TraceObserver = std::function<void(std::size_t update, std::span<const EpisodeTrace> episodes)>;

/// Receives the models after every checkpoint_interval-th update.
using CheckpointHook =
    std::function<void(std::size_t updates_done, const nn::Network& controller, const nn::Network& predictor)>;

/// Inputs shared by the episodes of one run.
struct EpisodeContext {
  const TrainerConfig* cfg = nullptr;
  const TaskData* train = nullptr;
  const TaskData* validation = nullptr;
  /// Controller scores of the validation samples (constant within an update).
  std::span<const double> validation_scores;
  /// Frozen h_a scores of the train and validation samples; empty outside
  /// shaped mode.
  std::span<const double> h_a_train;
  std::span<const double> h_a_validation;
  /// Effective shaping weight (1 outside shaped mode).
  double phi = 1.0;
};

/// T steps of the inner loop: sample a mini-batch, sample actions,
/// update the predictor on the selected samples, then compute the reward on
/// the validation split. `val_losses` (optional) accumulates the per-sample
/// validation losses used by the pathwise term.
EpisodeTrace run_episode(const EpisodeContext& ctx, nn::Network& predictor, nn::OptimizerState& predictor_opt,
                         const nn::Network& controller, RewardState& reward_state, Rng& rng,
                         std::vector<double>* val_losses = nullptr);

/// Full training run in task-specific or task-agnostic mode. Task-agnostic mode
/// forces the reconstruction task.
TrainResult train_iqa(const TrainerConfig& cfg, const synth::SplitDataset& data, const TraceObserver& observer = {},
                      const CheckpointHook& checkpoint = {});

/// Shaped-reward training against a frozen task-agnostic controller.
TrainResult train_shaped(const TrainerConfig& cfg, const synth::SplitDataset& data, const nn::Network& frozen_h_a,
                         const TraceObserver& observer = {}, const CheckpointHook& checkpoint = {});

/// Flattened configuration entries for the manifest.
std::vector<std::pair<std::string, std::string>> describe(const TrainerConfig& cfg);

/// Deterministic id from the resolved configuration and seed.
std::string make_run_id(const std::vector<std::pair<std::string, std::string>>& config, std::uint64_t seed);

std::string parameter_digest(const nn::Network& net);

/// manifest.json, history.csv and, when models are given, predictor and
/// controller checkpoints under `dir`.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
void write_history_csv(const std::filesystem::path& path, const RunManifest& manifest);
void save_run(const std::filesystem::path& dir, const TrainResult& result, double phi);
RunManifest read_manifest(const std::filesystem::path& dir);

}  // namespace amenable
