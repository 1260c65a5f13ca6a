#pragma once

// Randomized small networks covering every layer and loss type, shared by the
// unit tests and the acceptance runner.

#include <string>
#include <vector>

#include "amenable/nn/gradient_check.hpp"
#include "amenable/nn/loss.hpp"
#include "amenable/nn/network.hpp"

namespace amenable::testing {

struct GradientCase {
  std::string name;
  nn::Shape input;
  std::vector<nn::LayerSpec> layers;
  nn::LossSpec loss;
};

inline std::vector<GradientCase> gradient_cases() {
  using nn::LayerSpec;
  using nn::LossKind;
  const nn::LossSpec mse{LossKind::kMeanSquaredError};
  const nn::LossSpec ce{LossKind::kCrossEntropy};
  const nn::LossSpec seg{LossKind::kPixelCrossEntropyDice, 0.5, 1.0};
  const nn::Shape img{2, 4, 4};
  return {
      {"dense", {5}, {LayerSpec::dense(3)}, mse},
      {"dense_stack", {4}, {LayerSpec::dense(4), LayerSpec::tanh(), LayerSpec::dense(2)}, mse},
      {"conv3", img, {LayerSpec::conv2d(3)}, mse},
      {"conv1", img, {LayerSpec::conv2d(2, 1)}, mse},
      {"conv5", img, {LayerSpec::conv2d(2, 5)}, mse},
      {"relu", img, {LayerSpec::conv2d(3), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(2)}, mse},
      {"sigmoid", img, {LayerSpec::conv2d(3), LayerSpec::sigmoid(), LayerSpec::flatten(), LayerSpec::dense(2)}, mse},
      {"tanh", img, {LayerSpec::conv2d(3), LayerSpec::tanh(), LayerSpec::flatten(), LayerSpec::dense(2)}, mse},
      {"identity", img,
       {LayerSpec::conv2d(2), LayerSpec::act(nn::ActivationKind::kIdentity), LayerSpec::flatten(), LayerSpec::dense(1)},
       mse},
      {"max_pool", img, {LayerSpec::conv2d(2), LayerSpec::max_pool(), LayerSpec::flatten(), LayerSpec::dense(2)}, mse},
      {"avg_pool", img, {LayerSpec::conv2d(2), LayerSpec::avg_pool(), LayerSpec::flatten(), LayerSpec::dense(2)}, mse},
      {"upsample", img, {LayerSpec::conv2d(2), LayerSpec::avg_pool(), LayerSpec::upsample(), LayerSpec::conv2d(1)}, mse},
      {"concat", img, {LayerSpec::conv2d(2), LayerSpec::tanh(), LayerSpec::concat(0), LayerSpec::conv2d(1)}, mse},
      {"binary_cross_entropy", img, {LayerSpec::conv2d(2), LayerSpec::tanh(), LayerSpec::flatten(), LayerSpec::dense(1)},
       ce},
      {"categorical_cross_entropy", img,
       {LayerSpec::conv2d(2), LayerSpec::tanh(), LayerSpec::flatten(), LayerSpec::dense(3)}, ce},
      {"pixel_cross_entropy_dice", img, {LayerSpec::conv2d(2), LayerSpec::tanh(), LayerSpec::conv2d(1)}, seg},
  };
}

inline nn::Tensor random_inputs(const nn::Shape& sample, std::size_t n, Rng& rng) {
  nn::Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  nn::Tensor t(s);
  for (auto& v : t.values()) v = uniform(rng, -1.0, 1.0);
  return t;
}

/// Targets valid for the loss and the network's output shape.
inline nn::Tensor random_targets(const nn::Network& net, const nn::LossSpec& loss, std::size_t n, Rng& rng) {
  const auto& out = net.output_shape();
  if (loss.kind == nn::LossKind::kCrossEntropy) {
    const std::size_t classes = out[0] == 1 ? 2 : out[0];
    nn::Tensor t({n, 1});
    for (auto& v : t.values()) v = static_cast<double>(uniform_index(rng, classes));
    return t;
  }
  nn::Shape s{n};
  s.insert(s.end(), out.begin(), out.end());
  nn::Tensor t(s);
  for (auto& v : t.values())
    v = loss.kind == nn::LossKind::kPixelCrossEntropyDice ? (uniform01(rng) < 0.4 ? 1.0 : 0.0) : uniform(rng, -1, 1);
  return t;
}

/// One randomized instance: fresh parameters, batch of 1 to 3, optional
/// per-sample weights.
inline nn::GradientCheckReport check_case(const GradientCase& c, Rng& rng, bool weighted, double tolerance) {
  nn::Network net(c.input, c.layers);
  net.initialize(rng);
  // Nonzero biases so every bias gradient path is exercised.
  for (auto& p : net.parameters())
    if (p.name.ends_with(".bias"))
      for (auto& v : p.value.values()) v = uniform(rng, -0.3, 0.3);
  const std::size_t n = 1 + uniform_index(rng, 3);
  const nn::Tensor x = random_inputs(c.input, n, rng);
  const nn::Tensor y = random_targets(net, c.loss, n, rng);
  std::vector<double> w;
  if (weighted)
    for (std::size_t i = 0; i < n; ++i) w.push_back(uniform(rng, 0.2, 1.5));
  return nn::gradient_check(net, x, y, c.loss, tolerance, w);
}

}  // namespace amenable::testing
