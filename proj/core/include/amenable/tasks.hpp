#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amenable/nn/loss.hpp"
#include "amenable/nn/optimizer.hpp"
#include "amenable/synthdata.hpp"

namespace amenable {

enum class TaskKind { kClassification, kSegmentation, kReconstruction };
enum class RewardMetric { kAccuracy, kDice, kNegMae };

std::string to_string(TaskKind kind);
std::string to_string(RewardMetric metric);
TaskKind task_kind_from_string(const std::string& s);

struct TaskSpec {
  TaskKind kind = TaskKind::kClassification;
  /// Predictor layers; empty selects the default architecture for `kind`.
  std::vector<nn::LayerSpec> architecture;
  nn::LossSpec loss;
  RewardMetric reward_metric = RewardMetric::kAccuracy;
  /// Probability threshold turning segmentation maps into binary masks.
  double threshold = 0.5;
  /// Channel widths of the default architectures.
  std::size_t width = 8;

  /// Loss and metric pairing of each task kind with default architecture.
  static TaskSpec classification();
  static TaskSpec segmentation();
  static TaskSpec reconstruction();
  static TaskSpec of_kind(TaskKind kind);
};

/// Layers used when TaskSpec::architecture is empty. Input is C x H x W with
/// H and W divisible by 4.
///   classification: 2 conv blocks (conv, relu, max-pool) + dense logit head
///   segmentation:   2-level encoder-decoder with one skip connection
///   reconstruction: 2-level convolutional autoencoder, sigmoid output
std::vector<nn::LayerSpec> default_architecture(const TaskSpec& task, const nn::Shape& input);

/// Builds and initializes f(.;w) for an input shape C x H x W.
nn::Network make_predictor(const TaskSpec& task, const nn::Shape& input, Rng& rng);

/// Inputs and targets of one split in tensor form. For reconstruction the
/// targets are a copy of the inputs.
struct TaskData {
  nn::Tensor inputs;
  nn::Tensor targets;
  std::vector<std::size_t> ids;
  std::size_t size() const { return ids.size(); }
};

TaskData make_task_data(const TaskSpec& task, const std::vector<synth::ImageSample>& samples);

struct PredictionBatch {
  /// Class probabilities (N x 1 or N x K), mask probabilities
  /// (N x 1 x H x W), or reconstructions (N x C x H x W).
  nn::Tensor predictions;
  /// l_j: 0/1 error, 1 - Dice, or mean absolute error.
  std::vector<double> metric;
  /// Per-sample training loss L_f.
  std::vector<double> loss;
};

/// Runs the predictor on `inputs` and scores each sample against `targets`.
PredictionBatch predict(const TaskSpec& task, const nn::Network& model, const nn::Tensor& inputs,
                        const nn::Tensor& targets);
PredictionBatch predict(const TaskSpec& task, const nn::Network& model, const TaskData& data);

/// Per-sample task performance (higher is better) from l_j: 1 - l for
/// accuracy and Dice, -l for negative MAE.
double performance(const TaskSpec& task, double metric);
double mean_performance(const TaskSpec& task, std::span<const double> metric);

struct TrainStepResult {
  bool stepped = false;  // false when the selection was empty
  double loss = 0.0;
};

/// One optimizer step on L_f over `rows` of `data`. Optional per-sample
/// weights (aligned with rows) scale each sample's loss under the weighted
/// mean. An empty selection skips the step.
TrainStepResult train_step(const TaskSpec& task, nn::Network& model, nn::OptimizerState& opt, const TaskData& data,
                           std::span<const std::size_t> rows, std::span<const double> weights = {});

/// 2|A n B| / (|A| + |B|) on binary masks (values > 0.5 are set); 1 when
/// both are empty.
double dice(std::span<const double> mask_a, std::span<const double> mask_b);

double accuracy(std::span<const int> preds, std::span<const int> targets);

}  // namespace amenable
