#include <benchmark/benchmark.h>

#include <numeric>

#include "amenable/controller.hpp"
#include "amenable/evaluation.hpp"
#include "amenable/reward.hpp"
#include "amenable/synthdata.hpp"
#include "amenable/tasks.hpp"
#include "amenable/trainer.hpp"

namespace {

using namespace amenable;

synth::SplitDataset bench_data(std::size_t side) {
  synth::GeneratorConfig g;
  g.train = 256;
  g.validation = 64;
  g.holdout = 64;
  g.height = g.width = side;
  g.target_rate = 0.5;
  g.seed = 5;
  return synth::generate(g);
}

const TaskSpec& task_for(int kind) {
  static const TaskSpec tasks[] = {TaskSpec::classification(), TaskSpec::segmentation(), TaskSpec::reconstruction()};
  return tasks[kind];
}

void BM_Generate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(bench_data(static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_Generate)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PredictorTrainStep(benchmark::State& state) {
  const auto& task = task_for(static_cast<int>(state.range(0)));
  const auto data = make_task_data(task, bench_data(16).train);
  Rng rng = make_rng(1, "bench");
  auto net = make_predictor(task, data.inputs.sample_shape(), rng);
  nn::OptimizerState opt(net, TrainerConfig{}.predictor_optimizer);
  std::vector<std::size_t> rows(32);
  std::iota(rows.begin(), rows.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(task, net, opt, data, rows));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows.size()));
}
BENCHMARK(BM_PredictorTrainStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_ControllerScore(benchmark::State& state) {
  const auto data = make_task_data(TaskSpec::classification(), bench_data(16).train);
  Rng rng = make_rng(2, "bench");
  const auto ctrl = make_controller(data.inputs.sample_shape(), ControllerSpec{}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(score(ctrl, data.inputs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_ControllerScore)->Unit(benchmark::kMicrosecond);

void BM_SelectiveReward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(3, "bench");
  std::vector<double> losses(m), scores(m);
  for (auto& v : losses) v = uniform01(rng);
  for (auto& v : scores) v = uniform01(rng);
  for (auto _ : state) benchmark::DoNotOptimize(unclipped_reward(RewardStrategy::kSelective, losses, scores, 0.2));
}
BENCHMARK(BM_SelectiveReward)->Arg(128)->Arg(1024)->Arg(8192);

void BM_RocAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(4, "bench");
  std::vector<double> scores(n);
  std::vector<bool> positive(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = uniform01(rng);
    positive[i] = i % 3 == 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(scores, positive));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

void BM_ControllerUpdate(benchmark::State& state) {
  const auto data = bench_data(16);
  TrainerConfig cfg;
  cfg.batch_size = 16;
  cfg.steps = 3;
  cfg.episodes = 2;
  cfg.max_updates = 1;
  cfg.convergence_tolerance = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(train_iqa(cfg, data));
}
BENCHMARK(BM_ControllerUpdate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
