#include <gtest/gtest.h>

#include <cmath>

#include "amenable/nn/gradient_check.hpp"
#include "amenable/nn/loss.hpp"
#include "support/gradient_cases.hpp"

namespace amenable::nn {
namespace {

using amenable::testing::GradientCase;

class LayerGradients : public ::testing::TestWithParam<GradientCase> {};

TEST_P(LayerGradients, MatchCentralDifferences) {
  const auto& c = GetParam();
  Rng rng = make_rng(17, c.name);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = amenable::testing::check_case(c, rng, trial % 2 == 1, 1e-4);
    EXPECT_FALSE(r.flagged) << c.name << " trial " << trial << " worst " << r.worst_parameter << "[" << r.worst_index
                            << "] rel " << r.max_relative_error;
  }
}

INSTANTIATE_TEST_SUITE_P(EveryLayerAndLoss, LayerGradients, ::testing::ValuesIn(amenable::testing::gradient_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(GradientCheck, LinearRegressionIsTight) {
  Network net({3}, {LayerSpec::dense(1)});
  Rng rng = make_rng(1, "lin");
  net.initialize(rng);
  const Tensor x = amenable::testing::random_inputs({3}, 4, rng);
  const Tensor y = amenable::testing::random_inputs({1}, 4, rng);
  const auto r = gradient_check(net, x, y, {LossKind::kMeanSquaredError}, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradientCheck, CorruptedGradientIsFlagged) {
  Network net({3}, {LayerSpec::dense(2), LayerSpec::relu(), LayerSpec::dense(1)});
  Rng rng = make_rng(2, "bad");
  net.initialize(rng);
  const Tensor x = amenable::testing::random_inputs({3}, 2, rng);
  const Tensor y = amenable::testing::random_inputs({1}, 2, rng);
  const LossSpec spec{LossKind::kMeanSquaredError};
  auto g = loss_and_grad(net, x, y, spec).grads;
  g[0][0] += 1.0;
  const auto r = compare_gradients(
      net, g, [&](const Network& n) { return evaluate_loss(spec, forward(n, x), y).loss; }, 1e-4);
  EXPECT_TRUE(r.flagged);
}

TEST(Backward, InputGradientMatchesDifferences) {
  Network net({2, 4, 4}, {LayerSpec::conv2d(3), LayerSpec::tanh(), LayerSpec::max_pool(), LayerSpec::upsample(),
                          LayerSpec::concat(0), LayerSpec::conv2d(1)});
  Rng rng = make_rng(3, "input");
  net.initialize(rng);
  Tensor x = amenable::testing::random_inputs({2, 4, 4}, 2, rng);
  const Tensor y = amenable::testing::random_inputs({1, 4, 4}, 2, rng);
  const LossSpec spec{LossKind::kMeanSquaredError};
  const auto trace = forward_trace(net, x);
  const auto ev = evaluate_loss(spec, trace.output(), y);
  Tensor dx;
  backward(net, trace, ev.grad_output, &dx);
  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = evaluate_loss(spec, forward(net, x), y).loss;
    x[i] = keep - h;
    const double down = evaluate_loss(spec, forward(net, x), y).loss;
    x[i] = keep;
    const double numeric = (up - down) / (2 * h);
    EXPECT_NEAR(dx[i], numeric, 1e-6 + 1e-4 * std::abs(numeric)) << "input " << i;
  }
}

TEST(Loss, MseAtTargetIsZeroWithZeroGradient) {
  Network net({3}, {LayerSpec::dense(2)});
  Rng rng = make_rng(4, "mse");
  net.initialize(rng);
  const Tensor x = amenable::testing::random_inputs({3}, 3, rng);
  const Tensor y = forward(net, x);
  const auto r = loss_and_grad(net, x, y, {LossKind::kMeanSquaredError});
  EXPECT_EQ(r.loss, 0.0);
  for (const auto& g : r.grads)
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Loss, CrossEntropyAtHalfIsLogTwo) {
  const Tensor logits({2, 1}, {0.0, 0.0});
  const Tensor targets({2, 1}, {1.0, 0.0});
  const auto ev = evaluate_loss({LossKind::kCrossEntropy}, logits, targets);
  EXPECT_NEAR(ev.loss, std::log(2.0), 1e-15);
}

TEST(Loss, UnitWeightsEqualUnweighted) {
  Rng rng = make_rng(5, "w");
  for (const auto& c : amenable::testing::gradient_cases()) {
    Network net(c.input, c.layers);
    net.initialize(rng);
    const Tensor x = amenable::testing::random_inputs(c.input, 3, rng);
    const Tensor y = amenable::testing::random_targets(net, c.loss, 3, rng);
    const std::vector<double> ones(3, 1.0);
    const auto a = loss_and_grad(net, x, y, c.loss);
    const auto b = loss_and_grad(net, x, y, c.loss, ones);
    EXPECT_EQ(a.loss, b.loss) << c.name;
    EXPECT_EQ(a.grads, b.grads) << c.name;
  }
}

TEST(Loss, ZeroWeightSampleHasNoInfluence) {
  Rng rng = make_rng(6, "w0");
  for (const auto& c : amenable::testing::gradient_cases()) {
    Network net(c.input, c.layers);
    net.initialize(rng);
    Tensor x = amenable::testing::random_inputs(c.input, 3, rng);
    const Tensor y = amenable::testing::random_targets(net, c.loss, 3, rng);
    const std::vector<double> w{1.0, 0.0, 0.7};
    const auto a = loss_and_grad(net, x, y, c.loss, w);
    for (auto& v : x.sample(1)) v = uniform(rng, -3.0, 3.0);
    const auto b = loss_and_grad(net, x, y, c.loss, w);
    EXPECT_EQ(a.loss, b.loss) << c.name;
    EXPECT_EQ(a.grads, b.grads) << c.name;
  }
}

TEST(Loss, NonFiniteNamesSample) {
  Tensor out({3, 1}, {0.1, std::nan(""), 0.2});
  const Tensor y({3, 1}, {0.0, 0.0, 0.0});
  try {
    evaluate_loss({LossKind::kMeanSquaredError}, out, y);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.sample(), 1);
  }
}

TEST(Loss, DiceSmoothingHandlesEmptyMasks) {
  // Very negative logits predict an empty mask; the smoothed Dice term of an
  // empty target is then near 1 and the loss finite.
  const Tensor logits({1, 1, 2, 2}, -30.0);
  const Tensor y({1, 1, 2, 2}, 0.0);
  const auto ev = evaluate_loss({LossKind::kPixelCrossEntropyDice, 0.5, 1.0}, logits, y);
  EXPECT_TRUE(std::isfinite(ev.loss));
  EXPECT_LT(ev.loss, 1e-6);
}

}  // namespace
}  // namespace amenable::nn
