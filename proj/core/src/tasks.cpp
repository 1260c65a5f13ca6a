#include "amenable/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace amenable {

using nn::LayerSpec;
using nn::Tensor;

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kClassification: return "classification";
    case TaskKind::kSegmentation: return "segmentation";
    case TaskKind::kReconstruction: return "reconstruction";
  }
  return "?";
}

std::string to_string(RewardMetric metric) {
  switch (metric) {
    case RewardMetric::kAccuracy: return "accuracy";
    case RewardMetric::kDice: return "dice";
    case RewardMetric::kNegMae: return "neg_mae";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& s) {
  for (auto k : {TaskKind::kClassification, TaskKind::kSegmentation, TaskKind::kReconstruction})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown task kind '" + s + "'");
}

TaskSpec TaskSpec::classification() {
  TaskSpec t;
  t.kind = TaskKind::kClassification;
  t.loss.kind = nn::LossKind::kCrossEntropy;
  t.reward_metric = RewardMetric::kAccuracy;
  return t;
}

TaskSpec TaskSpec::segmentation() {
  TaskSpec t;
  t.kind = TaskKind::kSegmentation;
  t.loss.kind = nn::LossKind::kPixelCrossEntropyDice;
  t.loss.dice_weight = 0.5;
  t.reward_metric = RewardMetric::kDice;
  return t;
}

TaskSpec TaskSpec::reconstruction() {
  TaskSpec t;
  t.kind = TaskKind::kReconstruction;
  t.loss.kind = nn::LossKind::kMeanSquaredError;
  t.reward_metric = RewardMetric::kNegMae;
  return t;
}

TaskSpec TaskSpec::of_kind(TaskKind kind) {
  switch (kind) {
    case TaskKind::kClassification: return classification();
    case TaskKind::kSegmentation: return segmentation();
    case TaskKind::kReconstruction: return reconstruction();
  }
  throw ConfigError("unknown task kind");
}

std::vector<LayerSpec> default_architecture(const TaskSpec& task, const nn::Shape& input) {
  if (input.size() != 3) throw ShapeError("predictor input must be C x H x W");
  const std::size_t w = task.width, c = input[0];
  switch (task.kind) {
    case TaskKind::kClassification:
      return {LayerSpec::conv2d(w),     LayerSpec::relu(), LayerSpec::max_pool(),
              LayerSpec::conv2d(2 * w), LayerSpec::relu(), LayerSpec::max_pool(),
              LayerSpec::flatten(),     LayerSpec::dense(1)};
    case TaskKind::kSegmentation:
      // Activation indices: 2 = full-resolution features, 5 = half resolution.
      return {LayerSpec::conv2d(w),     LayerSpec::relu(),       LayerSpec::max_pool(),
              LayerSpec::conv2d(2 * w), LayerSpec::relu(),       LayerSpec::max_pool(),
              LayerSpec::conv2d(2 * w), LayerSpec::relu(),       LayerSpec::upsample(),
              LayerSpec::concat(5),     LayerSpec::conv2d(w),    LayerSpec::relu(),
              LayerSpec::upsample(),    LayerSpec::concat(2),    LayerSpec::conv2d(w),
              LayerSpec::relu(),        LayerSpec::conv2d(1)};
    case TaskKind::kReconstruction:
      return {LayerSpec::conv2d(w),    LayerSpec::relu(),  LayerSpec::max_pool(), LayerSpec::conv2d(w),
              LayerSpec::relu(),       LayerSpec::max_pool(), LayerSpec::conv2d(4), LayerSpec::relu(),
              LayerSpec::upsample(),   LayerSpec::conv2d(w), LayerSpec::relu(),    LayerSpec::upsample(),
              LayerSpec::conv2d(c),    LayerSpec::sigmoid()};
  }
  throw ConfigError("unknown task kind");
}

nn::Network make_predictor(const TaskSpec& task, const nn::Shape& input, Rng& rng) {
  auto layers = task.architecture.empty() ? default_architecture(task, input) : task.architecture;
  nn::Network net(input, std::move(layers));
  net.initialize(rng);
  return net;
}

TaskData make_task_data(const TaskSpec& task, const std::vector<synth::ImageSample>& samples) {
  TaskData d;
  d.inputs = synth::to_tensor(samples);
  switch (task.kind) {
    case TaskKind::kClassification: d.targets = synth::class_tensor(samples); break;
    case TaskKind::kSegmentation: d.targets = synth::mask_tensor(samples); break;
    case TaskKind::kReconstruction: d.targets = d.inputs; break;
  }
  d.ids.reserve(samples.size());
  for (const auto& s : samples) d.ids.push_back(s.id);
  return d;
}

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

PredictionBatch predict(const TaskSpec& task, const nn::Network& model, const Tensor& inputs, const Tensor& targets) {
  if (inputs.sample_shape() != model.input_shape())
    throw ShapeError("sample shape " + nn::shape_string(inputs.sample_shape()) + " does not match predictor input " +
                     nn::shape_string(model.input_shape()));
  if (targets.batch() != inputs.batch()) throw ShapeError("targets and inputs differ in batch size");
  const std::size_t n = inputs.batch();
  PredictionBatch out;
  out.predictions = nn::forward(model, inputs);
  out.loss = nn::evaluate_loss(task.loss, out.predictions, targets).per_sample;
  out.metric.assign(n, 0.0);
  auto& pred = out.predictions;
  const std::size_t m = pred.sample_size();

  switch (task.kind) {
    case TaskKind::kClassification:
      for (std::size_t i = 0; i < n; ++i) {
        auto p = pred.sample(i);
        std::size_t cls = 0;
        if (m == 1) {
          p[0] = sigmoid(p[0]);
          cls = p[0] >= 0.5 ? 1 : 0;
        } else {
          const double zmax = *std::max_element(p.begin(), p.end());
          double sum = 0;
          for (auto& v : p) sum += (v = std::exp(v - zmax));
          for (auto& v : p) v /= sum;
          cls = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        }
        out.metric[i] = static_cast<double>(cls) == targets.sample(i)[0] ? 0.0 : 1.0;
      }
      break;
    case TaskKind::kSegmentation: {
      if (targets.sample_size() != m) throw ShapeError("mask targets must match predictor output");
      std::vector<double> binary(m);
      for (std::size_t i = 0; i < n; ++i) {
        auto p = pred.sample(i);
        for (std::size_t k = 0; k < m; ++k) {
          p[k] = sigmoid(p[k]);
          binary[k] = p[k] >= task.threshold ? 1.0 : 0.0;
        }
        out.metric[i] = 1.0 - dice(binary, targets.sample(i));
      }
      break;
    }
    case TaskKind::kReconstruction: {
      if (targets.sample_size() != m) throw ShapeError("reconstruction targets must match predictor output");
      for (std::size_t i = 0; i < n; ++i) {
        const auto p = pred.sample(i);
        const auto y = targets.sample(i);
        double acc = 0;
        for (std::size_t k = 0; k < m; ++k) acc += std::abs(p[k] - y[k]);
        out.metric[i] = acc / static_cast<double>(m);
      }
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(out.metric[i])) throw NumericalError("non-finite task metric", static_cast<long>(i));
  return out;
}

PredictionBatch predict(const TaskSpec& task, const nn::Network& model, const TaskData& data) {
  return predict(task, model, data.inputs, data.targets);
}

double performance(const TaskSpec& task, double metric) {
  return task.reward_metric == RewardMetric::kNegMae ? -metric : 1.0 - metric;
}

double mean_performance(const TaskSpec& task, std::span<const double> metric) {
  if (metric.empty()) throw Error("performance of an empty set");
  double acc = 0;
  for (double l : metric) acc += performance(task, l);
  return acc / static_cast<double>(metric.size());
}

TrainStepResult train_step(const TaskSpec& task, nn::Network& model, nn::OptimizerState& opt, const TaskData& data,
                           std::span<const std::size_t> rows, std::span<const double> weights) {
  if (rows.empty()) return {};
  const Tensor x = data.inputs.gather(rows);
  const Tensor y = data.targets.gather(rows);
  const auto lg = nn::loss_and_grad(model, x, y, task.loss, weights);
  nn::optimizer_step(model, lg.grads, opt);
  return {true, lg.loss};
}

double dice(std::span<const double> mask_a, std::span<const double> mask_b) {
  if (mask_a.size() != mask_b.size()) throw ShapeError("dice: mask sizes differ");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < mask_a.size(); ++k) {
    const bool a = mask_a[k] > 0.5, b = mask_b[k] > 0.5;
    na += a;
    nb += b;
    inter += a && b;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double accuracy(std::span<const int> preds, std::span<const int> targets) {
  if (preds.size() != targets.size()) throw ShapeError("accuracy: lengths differ");
  if (preds.empty()) throw Error("accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == targets[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

}  // namespace amenable
