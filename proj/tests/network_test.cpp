#include <gtest/gtest.h>

#include <cmath>

#include "dnirb/errors.hpp"
#include "dnirb/gradcheck.hpp"
#include "dnirb/network.hpp"
#include "dnirb/trainer.hpp"
#include "test_util.hpp"

namespace dnirb {
namespace {

using testing::random_tensor;

NetworkParams zero_network(std::size_t blocks) {
  NetworkConfig cfg;
  cfg.blocks = blocks;
  return NetworkParams(cfg);
}

TEST(BlockTest, ZeroBranchesAreIdentity) {
  const Tensor x = random_tensor(Shape{2, 64, 6, 5}, 4, -3.0, 3.0);
  const DnIRBlockParams zero;
  EXPECT_EQ(block_forward(x, zero), x);
  EXPECT_EQ(block_forward(x, zero, /*branch_output_relu=*/true), x);
}

TEST(BlockTest, PreservesShape) {
  NetworkParams net = init_params(NetworkConfig{1, false}, 3);
  const Tensor x = random_tensor(Shape{1, 64, 40, 40}, 5);
  EXPECT_EQ(block_forward(x, net.blocks[0]).shape(), (Shape{1, 64, 40, 40}));
}

TEST(BlockTest, ParameterCount) {
  // 1x1 64->32: 64*32+32 = 2080; 3x3 32->32: 9*32*32+32 = 9248.
  EXPECT_EQ(expected_block_param_count(), 31904u);
  EXPECT_EQ(DnIRBlockParams().param_count(), 31904u);
  EXPECT_EQ(DnIRBlockParams().param_count(), 2 * 2080u + 3 * 9248u);
}

TEST(BlockTest, RejectsWrongChannelCount) {
  EXPECT_THROW(block_forward(Tensor(Shape{1, 32, 4, 4}), DnIRBlockParams()), ShapeError);
}

TEST(BlockTest, FiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const GradCheckCase c = check_block_gradients(seed);
    EXPECT_TRUE(c.passed) << c.name << " seed " << seed << " err " << c.max_rel_error
                          << " checked " << c.checked;
  }
}

TEST(NetworkTest, ParameterCountsMatchClosedForm) {
  EXPECT_EQ(expected_param_count(4), 168321u);
  EXPECT_EQ(expected_param_count(4), 3200u + 36928u + 4 * 31904u + 577u);
  for (std::size_t n : {1, 2, 4, 8, 16}) {
    EXPECT_EQ(zero_network(n).param_count(), expected_param_count(n)) << "N=" << n;
  }
}

TEST(NetworkTest, ZeroParametersPredictZeroNoise) {
  const Tensor y = random_tensor(Shape{1, 1, 12, 9}, 1, 0.0, 1.0);
  const Tensor r = network_forward(y, zero_network(2));
  for (double v : r.data()) EXPECT_EQ(v, 0.0);
}

TEST(NetworkTest, ShapePreservation) {
  for (std::size_t n : {1, 2, 4}) {
    const NetworkParams net = init_params(NetworkConfig{n, false}, 7);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{40, 40}, {64, 48}, {480, 640}}) {
      const Tensor y(Shape{1, 1, h, w}, 0.5);
      EXPECT_EQ(network_forward(y, net).shape(), y.shape()) << "N=" << n << " " << h << "x" << w;
    }
  }
}

TEST(NetworkTest, RejectsMultichannelInput) {
  EXPECT_THROW(network_forward(Tensor(Shape{1, 3, 8, 8}), zero_network(1)), ShapeError);
  EXPECT_THROW(denoise(Tensor(Shape{1, 2, 8, 8}), zero_network(1)), ShapeError);
}

TEST(DenoiseTest, ZeroNetworkIsIdentityOnValidImages) {
  const Tensor y = random_tensor(Shape{1, 1, 10, 10}, 3, 0.0, 1.0);
  EXPECT_EQ(denoise(y, zero_network(1)), y);
}

TEST(DenoiseTest, OutputClampedToUnitRange) {
  NetworkParams net = zero_network(1);
  net.head.bias[0] = -5.0;  // residual estimate far below zero
  const Tensor y = random_tensor(Shape{1, 1, 6, 6}, 4, 0.0, 1.0);
  const Tensor high = denoise(y, net);
  for (double v : high.data()) EXPECT_EQ(v, 1.0);
  net.head.bias[0] = 5.0;
  const Tensor low = denoise(y, net);
  for (double v : low.data()) EXPECT_EQ(v, 0.0);
}

TEST(InitTest, DeterministicPerSeed) {
  const NetworkConfig cfg{2, false};
  EXPECT_EQ(init_params(cfg, 42), init_params(cfg, 42));
  EXPECT_FALSE(init_params(cfg, 42) == init_params(cfg, 43));
}

TEST(InitTest, HeVarianceAndZeroBias) {
  const NetworkParams net = init_params(NetworkConfig{2, false}, 9);
  for_each_layer(net, [](const std::string& name, const ConvParams& c) {
    for (double b : c.bias) EXPECT_EQ(b, 0.0) << name;
    if (c.c_out() != 64) return;
    const auto& s = c.weights.shape();
    const double target = 2.0 / static_cast<double>(s.c * s.h * s.w);
    double sum = 0.0, sq = 0.0;
    for (double w : c.weights.data()) {
      sum += w;
      sq += w * w;
    }
    const double n = static_cast<double>(c.weights.size());
    const double var = sq / n - (sum / n) * (sum / n);
    EXPECT_NEAR(var / target, 1.0, 0.2) << name;
  });
}

TEST(InitTest, RejectsZeroBlocks) {
  EXPECT_THROW(init_params(NetworkConfig{0, false}, 1), ConfigError);
}

TEST(NetworkTest, GradientReachesStem) {
  const NetworkParams net = init_params(NetworkConfig{2, false}, 5);
  const Tensor y = random_tensor(Shape{2, 1, 12, 12}, 6, 0.0, 1.0);
  const Tensor target = random_tensor(y.shape(), 7, -0.1, 0.1);
  NetworkParams grads(net.config);
  batch_gradients(net, y, target, LossNormalization::kPerSample, grads);
  double norm = 0.0;
  for (double g : grads.stem1.weights.data()) norm += g * g;
  EXPECT_GT(std::sqrt(norm), 0.0);
}

TEST(NetworkTest, FullNetworkFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const GradCheckCase c = check_network_gradients(seed);
    EXPECT_TRUE(c.passed) << "seed " << seed << " err " << c.max_rel_error << " checked "
                          << c.checked << " skipped " << c.skipped_kinks;
  }
}

TEST(NetworkTest, BackwardReturnsInputGradientOnRequest) {
  const NetworkParams net = init_params(NetworkConfig{1, false}, 2);
  const Tensor y = random_tensor(Shape{1, 1, 6, 6}, 3, 0.0, 1.0);
  NetworkActivations acts;
  const Tensor out = network_forward_train(y, net, acts);
  EXPECT_EQ(out, network_forward(y, net));
  NetworkParams grads(net.config);
  const Tensor gy = network_backward(acts, net, Tensor(out.shape(), 1.0), grads, true);
  EXPECT_EQ(gy.shape(), y.shape());
}

}  // namespace
}  // namespace dnirb
