#include <gtest/gtest.h>

#include <cmath>

#include "amenable/nn/network.hpp"

namespace amenable::nn {
namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = uniform(rng, -1.0, 1.0);
  return t;
}

TEST(Forward, IdentityNetworkReturnsInput) {
  Network net({3}, {});
  Rng rng = make_rng(1, "t");
  const Tensor x = random_tensor({4, 3}, rng);
  EXPECT_EQ(forward(net, x), x);
}

TEST(Forward, ZeroDenseGivesZeros) {
  Network net({5}, {LayerSpec::dense(3)});
  Rng rng = make_rng(2, "t");
  const Tensor y = forward(net, random_tensor({2, 5}, rng));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ScalarDenseSubstitution) {
  Network net({1}, {LayerSpec::dense(1)});
  net.parameters()[0].value[0] = 2.0;
  net.parameters()[1].value[0] = 1.0;
  const Tensor y = forward(net, Tensor({1, 1}, {3.0}));
  EXPECT_EQ(y[0], 7.0);
}

TEST(Forward, MismatchedBatchNamesLayer) {
  Network net({4}, {LayerSpec::dense(2)});
  try {
    forward(net, Tensor({2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.layer(), 0);
  }
}

TEST(Network, IncompatibleLayerNamesIndex) {
  try {
    Network net({1, 4, 4}, {LayerSpec::conv2d(2), LayerSpec::dense(3)});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.layer(), 1);
  }
}

TEST(Network, ShapesFlowThroughLayers) {
  Network net({2, 8, 8}, {LayerSpec::conv2d(4), LayerSpec::relu(), LayerSpec::max_pool(), LayerSpec::upsample(),
                          LayerSpec::concat(0), LayerSpec::avg_pool(), LayerSpec::flatten(), LayerSpec::dense(3)});
  EXPECT_EQ(net.activation_shape(4), (Shape{4, 8, 8}));
  EXPECT_EQ(net.activation_shape(5), (Shape{6, 8, 8}));
  EXPECT_EQ(net.output_shape(), (Shape{3}));
  EXPECT_EQ(net.parameter_count(), 4u * 2 * 9 + 4 + 3 * 96 + 3);
}

TEST(Forward, IsPure) {
  Network net({1, 8, 8}, {LayerSpec::conv2d(3), LayerSpec::tanh(), LayerSpec::max_pool(), LayerSpec::flatten(),
                          LayerSpec::dense(2), LayerSpec::sigmoid()});
  Rng rng = make_rng(3, "t");
  net.initialize(rng);
  const Tensor x = random_tensor({5, 1, 8, 8}, rng);
  const Tensor a = forward(net, x), b = forward(net, x);
  EXPECT_EQ(a, b);
}

TEST(Forward, BatchRowsAreIndependent) {
  Network net({1, 4, 4}, {LayerSpec::conv2d(2), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(1)});
  Rng rng = make_rng(4, "t");
  net.initialize(rng);
  const Tensor x = random_tensor({3, 1, 4, 4}, rng);
  const Tensor all = forward(net, x);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t row[] = {i};
    EXPECT_NEAR(forward(net, x.gather(row))[0], all[i], 1e-12);
  }
}

TEST(Initialize, GlorotRangeAndZeroBias) {
  Network net({10}, {LayerSpec::dense(6)});
  Rng rng = make_rng(5, "t");
  net.initialize(rng);
  const double limit = std::sqrt(6.0 / 16.0);
  for (double w : net.parameters()[0].value.values()) EXPECT_LE(std::abs(w), limit);
  for (double b : net.parameters()[1].value.values()) EXPECT_EQ(b, 0.0);
}

TEST(Initialize, SeedDeterminesParameters) {
  Network a({6}, {LayerSpec::dense(4)}), b = a;
  Rng r1 = make_rng(9, "init"), r2 = make_rng(9, "init");
  a.initialize(r1);
  b.initialize(r2);
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace amenable::nn
