#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "amenable/evaluation.hpp"
#include "amenable/experiment/config.hpp"
#include "amenable/trainer.hpp"

namespace amenable::experiment {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3, kExitMissingArtifact = 4 };

/// Maps ConfigError, NumericalError and ArtifactError to their exit codes.
int exit_code_for(const std::exception& e);

/// Parsed command line. Unset optionals leave the configuration untouched.
struct CommandOptions {
  std::string command;  // gen | train | eval | study | report
  /// Study layout: shaped (phi x k grid), srej (s_rej x k grid) or iqa
  /// (task-specific and task-agnostic pair per seed).
  std::string study_kind = "shaped";
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> mode;
  std::optional<double> phi;
  std::optional<double> srej;
  std::optional<std::vector<double>> ks;
  std::optional<std::vector<double>> phis;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> jobs;
  /// Run directories given to eval and report.
  std::vector<std::filesystem::path> inputs;
};

/// Config file, then environment, then flags; validated.
ExperimentConfig effective_config(const CommandOptions& opts, const EnvLookup& env);

/// Executes one command. Progress goes to `log`; the return value is the
/// process exit code.
int run(const CommandOptions& opts, std::ostream& log, const EnvLookup& env = process_env());

// Building blocks of the commands, exposed for tests and the acceptance runner.

/// Role directory name of a training configuration, e.g. task_specific,
/// task_agnostic, shaped_phi0.9, task_specific_srej0.2.
std::string role_dir_name(const TrainerConfig& cfg);

/// Loads `<run_dir>/data` when present (it must match `cfg`), otherwise
/// generates and saves it.
synth::SplitDataset ensure_dataset(const std::filesystem::path& run_dir, const synth::GeneratorConfig& cfg);

/// Trains one role into `<run_dir>/<role_dir_name>`. Shaped mode reuses or
/// first trains `<run_dir>/task_agnostic`. The manifest is written even when
/// training fails.
TrainResult train_role(const std::filesystem::path& run_dir, const ExperimentConfig& cfg, const synth::SplitDataset& data,
                       std::ostream& log);

/// Holdout evaluation of every trained role under `run_dir`: per-role curve,
/// scores and detection files; agreement and quadrant files across roles.
void evaluate_run(const std::filesystem::path& run_dir, const ExperimentConfig& cfg, std::ostream& log);

/// Consolidated report of the given run directories into `out_dir`. Returns
/// the list of missing artifacts; the partial report is still written.
std::vector<std::string> write_report(const std::vector<std::filesystem::path>& run_dirs,
                                      const std::filesystem::path& out_dir);

/// Runs the tasks in up to `jobs` forked worker processes (inline when
/// jobs == 1) and returns each task's exit code.
std::vector<int> run_parallel(const std::vector<std::function<void()>>& tasks, std::size_t jobs, std::ostream& log);

/// Design decisions written next to every report.
const std::vector<std::string>& design_decisions();

/// Task-impact ground truth: hard case or artefact inside the region of interest.
bool task_impacting(const synth::ImageSample& s);

}  // namespace amenable::experiment
