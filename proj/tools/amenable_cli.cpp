// Command-line front end: gen, train, eval, study, report.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amenable/experiment/runner.hpp"

namespace ex = amenable::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Quality-assessment controllers trained by reinforcement learning on synthetic images"};
  app.require_subcommand(1);
  app.fallthrough();

  ex::CommandOptions opts;
  std::string config, out, mode;
  std::uint64_t seed = 0;
  double phi = 0, srej = 0;
  std::vector<double> ks, phis;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  std::vector<std::string> inputs;

  auto* o_config = app.add_option("--config", config, "Configuration file")->check(CLI::ExistingFile);
  auto* o_seed = app.add_option("--seed", seed, "Master seed");
  auto* o_out = app.add_option("--out", out, "Run, study or report directory");
  auto* o_mode = app.add_option("--mode", mode, "task_specific | task_agnostic | shaped");
  auto* o_phi = app.add_option("--phi", phi, "Shaping weight for shaped mode");
  auto* o_srej = app.add_option("--srej", srej, "Rejection ratio; selects the selective reward");
  auto* o_ks = app.add_option("--ks", ks, "Rejection fractions, comma separated")->delimiter(',');
  auto* o_phis = app.add_option("--phis", phis, "Study shaping weights, comma separated")->delimiter(',');
  auto* o_seeds = app.add_option("--seeds", seeds, "Study seeds, comma separated")->delimiter(',');
  auto* o_jobs = app.add_option("--jobs", jobs, "Parallel worker processes for study")->check(CLI::PositiveNumber);

  app.add_subcommand("gen", "Generate the synthetic dataset");
  app.add_subcommand("train", "Train one controller role");
  app.add_subcommand("eval", "Evaluate every trained role of a run directory")
      ->add_option("runs", inputs, "Run directories");
  app.add_subcommand("study", "Run a grid of cells (shaped, srej or iqa)")
      ->add_option("kind", opts.study_kind, "Study kind")
      ->check(CLI::IsMember({"shaped", "srej", "iqa"}));
  app.add_subcommand("report", "Consolidate run directories into a report")
      ->add_option("runs", inputs, "Run or study directories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ex::kExitConfig;
  }

  opts.command = app.get_subcommands().front()->get_name();
  if (*o_config) opts.config = config;
  if (*o_seed) opts.seed = seed;
  if (*o_out) opts.out = out;
  if (*o_mode) opts.mode = mode;
  if (*o_phi) opts.phi = phi;
  if (*o_srej) opts.srej = srej;
  if (*o_ks) opts.ks = ks;
  if (*o_phis) opts.phis = phis;
  if (*o_seeds) opts.seeds = seeds;
  if (*o_jobs) opts.jobs = jobs;
  for (const auto& p : inputs) opts.inputs.emplace_back(p);
  return ex::run(opts, std::cerr);
}
