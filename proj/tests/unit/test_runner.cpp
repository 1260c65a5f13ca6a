#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <set>
#include <algorithm>

#include "amenable/experiment/runner.hpp"

namespace amenable::experiment {
namespace {

namespace fs = std::filesystem;

#ifndef AMENABLE_TEST_DATA_DIR
#error "AMENABLE_TEST_DATA_DIR must point at tests/data"
#endif

const fs::path kTiny = fs::path(AMENABLE_TEST_DATA_DIR) / "tiny.toml";

EnvLookup no_env() {
  return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);)
    if (!l.empty() && l[0] != '#') out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

class Runner : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("amenable_runner_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CommandOptions opts(const std::string& command, const fs::path& out) const {
    CommandOptions o;
    o.command = command;
    o.config = kTiny;
    o.out = out;
    return o;
  }
  int run_quiet(const CommandOptions& o) {
    std::ostringstream log;
    const int code = run(o, log, no_env());
    last_log_ = log.str();
    return code;
  }

  fs::path dir_;
  std::string last_log_;
};

TEST_F(Runner, EffectiveConfigLayersFlagsOverEnvOverFile) {
  CommandOptions o = opts("train", dir_);
  auto env = [](const std::string& k) -> std::optional<std::string> {
    if (k == "AMENABLE_TRAINER_MAX_UPDATES") return "5";
    if (k == "AMENABLE_TRAINER_SEED") return "77";
    return std::nullopt;
  };
  o.seed = 9;
  o.mode = "shaped";
  o.phi = 0.85;
  o.ks = std::vector<double>{0, 0.2};
  const auto cfg = effective_config(o, env);
  EXPECT_EQ(cfg.trainer.max_updates, 5u);
  EXPECT_EQ(cfg.trainer.seed, 9u);
  EXPECT_EQ(cfg.trainer.mode, TrainMode::kShaped);
  EXPECT_EQ(cfg.trainer.reward.phi, 0.85);
  EXPECT_EQ(cfg.evaluation.ks, (std::vector<double>{0, 0.2}));
  EXPECT_EQ(cfg.data.train, 64u);

  CommandOptions s = opts("train", dir_);
  s.srej = 0.2;
  const auto sel = effective_config(s, no_env());
  EXPECT_EQ(sel.trainer.reward.strategy, RewardStrategy::kSelective);
  EXPECT_EQ(sel.trainer.reward.s_rej, 0.2);
}

TEST_F(Runner, RoleDirectoryNames) {
  TrainerConfig c;
  EXPECT_EQ(role_dir_name(c), "task_specific");
  c.mode = TrainMode::kTaskAgnostic;
  EXPECT_EQ(role_dir_name(c), "task_agnostic");
  c.mode = TrainMode::kShaped;
  c.reward.phi = 0.9;
  EXPECT_EQ(role_dir_name(c), "shaped_phi0.9");
  c.mode = TrainMode::kTaskSpecific;
  c.reward.strategy = RewardStrategy::kSelective;
  c.reward.s_rej = 0.2;
  EXPECT_EQ(role_dir_name(c), "task_specific_srej0.2");
}

TEST_F(Runner, GenTwiceGivesIdenticalChecksums) {
  ASSERT_EQ(run_quiet(opts("gen", dir_ / "a")), kExitOk) << last_log_;
  ASSERT_EQ(run_quiet(opts("gen", dir_ / "b")), kExitOk) << last_log_;
  EXPECT_EQ(synth::dataset_checksum(dir_ / "a" / "data"), synth::dataset_checksum(dir_ / "b" / "data"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "config.toml"));
}

TEST_F(Runner, TrainThenEvalWritesThreeRowCurve) {
  CommandOptions t = opts("train", dir_ / "run");
  t.mode = "task_specific";
  ASSERT_EQ(run_quiet(t), kExitOk) << last_log_;
  const fs::path role = dir_ / "run" / "task_specific";
  EXPECT_TRUE(fs::exists(role / "manifest.json"));
  EXPECT_TRUE(fs::exists(role / "history.csv"));
  EXPECT_EQ(read_manifest(role).status, "ok");

  CommandOptions e = opts("eval", dir_ / "run");
  e.ks = std::vector<double>{0, 0.05, 0.1};
  ASSERT_EQ(run_quiet(e), kExitOk) << last_log_;
  const auto rows = read_lines(role / "curve.csv");
  ASSERT_EQ(rows.size(), 4u);  // header + 3
  const std::string run_id = read_manifest(role).run_id;
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].rfind(run_id + ",", 0), 0u) << rows[i];
  EXPECT_TRUE(fs::exists(role / "curve.svg"));
  EXPECT_TRUE(fs::exists(role / "scores.csv"));
}

TEST_F(Runner, CheckpointIntervalWritesIntermediateModels) {
  CommandOptions t = opts("train", dir_ / "run");
  const EnvLookup env = [](const std::string& k) -> std::optional<std::string> {
    if (k == "AMENABLE_TRAINER_CHECKPOINT_INTERVAL") return "1";
    return std::nullopt;
  };
  std::ostringstream log;
  ASSERT_EQ(run(t, log, env), kExitOk) << log.str();
  const fs::path ck = dir_ / "run" / "task_specific" / "checkpoints";
  for (const char* u : {"update_000001", "update_000002"}) {
    EXPECT_TRUE(fs::is_directory(ck / u) && !fs::is_empty(ck / u)) << u;
  }
  EXPECT_EQ(std::distance(fs::directory_iterator(ck), fs::directory_iterator()), 2);
}

TEST_F(Runner, ShapedTrainReusesTaskAgnosticController) {
  CommandOptions t = opts("train", dir_ / "run");
  t.mode = "shaped";
  t.phi = 0.9;
  ASSERT_EQ(run_quiet(t), kExitOk) << last_log_;
  EXPECT_TRUE(fs::exists(dir_ / "run" / "task_agnostic" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "shaped_phi0.9" / "manifest.json"));
  const std::string before = slurp(dir_ / "run" / "task_agnostic" / "manifest.json");
  t.phi = 0.5;
  ASSERT_EQ(run_quiet(t), kExitOk) << last_log_;
  EXPECT_EQ(slurp(dir_ / "run" / "task_agnostic" / "manifest.json"), before);

  CommandOptions ts = opts("train", dir_ / "run");
  ts.mode = "task_specific";
  ASSERT_EQ(run_quiet(ts), kExitOk) << last_log_;
  ASSERT_EQ(run_quiet(opts("eval", dir_ / "run")), kExitOk) << last_log_;
  EXPECT_TRUE(fs::exists(dir_ / "run" / "agreement.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "quadrants_shaped_phi0.9.csv"));
  const auto q = read_lines(dir_ / "run" / "quadrants_shaped_phi0.9.csv");
  EXPECT_EQ(q.size(), 1u + 32u);
}

TEST_F(Runner, ShapedStudyWritesPhiByKGrid) {
  CommandOptions s = opts("study", dir_ / "study");
  s.study_kind = "shaped";
  s.phis = std::vector<double>{0, 0.85, 0.95, 1.0};
  s.ks = std::vector<double>{0, 0.05, 0.1, 0.15, 0.2, 0.25};
  s.seeds = std::vector<std::uint64_t>{1};
  s.jobs = 2;
  ASSERT_EQ(run_quiet(s), kExitOk) << last_log_;
  const auto grid = read_lines(dir_ / "study" / "grid.csv");
  ASSERT_EQ(grid.size(), 5u);
  for (const auto& row : grid) EXPECT_EQ(std::count(row.begin(), row.end(), ','), 7) << row;
}

TEST_F(Runner, ReportOnSingleRunIsIdempotent) {
  CommandOptions t = opts("train", dir_ / "run");
  ASSERT_EQ(run_quiet(t), kExitOk) << last_log_;
  ASSERT_EQ(run_quiet(opts("eval", dir_ / "run")), kExitOk) << last_log_;
  CommandOptions r = opts("report", dir_ / "rep1");
  r.inputs = {dir_ / "run"};
  ASSERT_EQ(run_quiet(r), kExitOk) << last_log_;
  const auto curves = read_lines(dir_ / "rep1" / "curves.csv");
  std::set<std::string> groups;
  for (std::size_t i = 1; i < curves.size(); ++i) groups.insert(curves[i].substr(0, curves[i].find(',')));
  EXPECT_EQ(groups.size(), 1u);
  EXPECT_TRUE(fs::exists(dir_ / "rep1" / "deviations.md"));
  r.out = dir_ / "rep2";
  ASSERT_EQ(run_quiet(r), kExitOk) << last_log_;
  for (const auto& e : fs::directory_iterator(dir_ / "rep1"))
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "rep2" / e.path().filename())) << e.path().filename();
}

TEST_F(Runner, ReportOverTwoSeedsHasSpread) {
  for (int seed : {1, 2}) {
    CommandOptions t = opts("train", dir_ / ("s" + std::to_string(seed)));
    t.seed = static_cast<std::uint64_t>(seed);
    ASSERT_EQ(run_quiet(t), kExitOk) << last_log_;
    ASSERT_EQ(run_quiet(opts("eval", dir_ / ("s" + std::to_string(seed)))), kExitOk) << last_log_;
  }
  CommandOptions r = opts("report", dir_ / "rep");
  r.inputs = {dir_ / "s1", dir_ / "s2"};
  ASSERT_EQ(run_quiet(r), kExitOk) << last_log_;
  const auto curves = read_lines(dir_ / "rep" / "curves.csv");
  ASSERT_GE(curves.size(), 2u);
  EXPECT_NE(curves[0].find("std"), std::string::npos);
  EXPECT_NE(curves[1].find(';'), std::string::npos);  // both run ids listed
}

TEST_F(Runner, ExitCodes) {
  CommandOptions bad = opts("train", dir_ / "bad");
  bad.phi = 2.0;
  bad.mode = "shaped";
  EXPECT_EQ(run_quiet(bad), kExitConfig);
  // The failure still leaves a manifest naming the cause.
  EXPECT_EQ(read_manifest(dir_ / "bad").status, "failed");

  CommandOptions missing_cfg = opts("gen", dir_ / "x");
  missing_cfg.config = dir_ / "absent.toml";
  EXPECT_EQ(run_quiet(missing_cfg), kExitConfig);

  EXPECT_EQ(run_quiet(opts("eval", dir_ / "nothing-here")), kExitMissingArtifact);

  fs::create_directories(dir_ / "empty");
  CommandOptions r = opts("report", dir_ / "rep");
  r.inputs = {dir_ / "empty"};
  EXPECT_EQ(run_quiet(r), kExitMissingArtifact);
  EXPECT_TRUE(fs::exists(dir_ / "rep" / "missing.txt"));

  CommandOptions unknown = opts("fly", dir_);
  EXPECT_EQ(run_quiet(unknown), kExitConfig);

  EXPECT_EQ(exit_code_for(NumericalError("x")), kExitNumerical);
  EXPECT_EQ(exit_code_for(ArtifactError("x")), kExitMissingArtifact);
  EXPECT_EQ(exit_code_for(ConfigError("x")), kExitConfig);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitFailure);
}

TEST_F(Runner, ParallelWorkersReportExitCodes) {
  std::ostringstream log;
  const std::vector<std::function<void()>> tasks{[] {}, [] { throw NumericalError("nan"); },
                                                 [] { throw ConfigError("bad"); }, [] {}};
  EXPECT_EQ(run_parallel(tasks, 2, log), (std::vector<int>{kExitOk, kExitNumerical, kExitConfig, kExitOk}));
  EXPECT_EQ(run_parallel(tasks, 1, log), (std::vector<int>{kExitOk, kExitNumerical, kExitConfig, kExitOk}));
}

TEST(TaskImpact, HardOrInRoiArtefact) {
  synth::ImageSample s;
  EXPECT_FALSE(task_impacting(s));
  s.artefact_flag = true;
  EXPECT_FALSE(task_impacting(s));
  s.artefact_in_roi = true;
  EXPECT_TRUE(task_impacting(s));
  s = {};
  s.hard_flag = true;
  EXPECT_TRUE(task_impacting(s));
}

TEST(DesignDecisions, Nonempty) { EXPECT_GE(design_decisions().size(), 5u); }

}  // namespace
}  // namespace amenable::experiment
