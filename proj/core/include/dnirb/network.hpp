#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dnirb/ops.hpp"
#include "dnirb/tensor.hpp"

namespace dnirb {

inline constexpr std::size_t kFeatureChannels = 64;
inline constexpr std::size_t kBottleneckChannels = 32;
inline constexpr std::size_t kStemKernel = 7;

struct NetworkConfig {
  std::size_t blocks = 2;
  /// Apply ReLU to the last conv of each branch before concatenation.
  /// Off by default so a zeroed branch leaves the shortcut a true identity.
  bool branch_output_relu = false;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// One inception-residual block: two bottlenecked branches (one and two
/// 3x3 layers) concatenated back to 64 channels and added to the input.
struct DnIRBlockParams {
  ConvParams a_reduce;  // 1x1, 64 -> 32
  ConvParams a_conv;    // 3x3, 32 -> 32
  ConvParams b_reduce;  // 1x1, 64 -> 32
  ConvParams b_conv1;   // 3x3, 32 -> 32
  ConvParams b_conv2;   // 3x3, 32 -> 32

  DnIRBlockParams();
  std::size_t param_count() const;

  friend bool operator==(const DnIRBlockParams&, const DnIRBlockParams&) = default;
};

struct NetworkParams {
  NetworkConfig config;
  ConvParams stem1;  // 7x7, 1 -> 64
  ConvParams stem2;  // 3x3, 64 -> 64
  std::vector<DnIRBlockParams> blocks;
  ConvParams head;   // 3x3, 64 -> 1

  NetworkParams() = default;
  /// Zero-initialised parameters for `config`.
  explicit NetworkParams(const NetworkConfig& config);

  std::size_t param_count() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Closed-form parameter count for a network with `blocks` blocks.
std::size_t expected_param_count(std::size_t blocks);
std::size_t expected_block_param_count();

/// Visits every convolution in a fixed order with its manifest name
/// (e.g. "blocks.0.b_conv1"). The order defines the checkpoint layout.
void for_each_layer(NetworkParams& params,
                    const std::function<void(const std::string&, ConvParams&)>& fn);
void for_each_layer(const NetworkParams& params,
                    const std::function<void(const std::string&, const ConvParams&)>& fn);

/// He-normal weights (variance 2/fan_in) and zero biases, reproducible from
/// `seed`.
NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);

Tensor block_forward(const Tensor& x, const DnIRBlockParams& params,
                     bool branch_output_relu = false);

/// Estimated noise map R(y) for a single-channel batch.
Tensor network_forward(const Tensor& y, const NetworkParams& params);

/// Clean estimate clamp(y - R(y), 0, 1).
Tensor denoise(const Tensor& y, const NetworkParams& params);

/// Intermediate activations kept by a training forward pass.
struct BlockActivations {
  Tensor input;
  Tensor a_mid;  // relu(a_reduce(x))
  Tensor b_mid;  // relu(b_reduce(x))
  Tensor b_mid2; // relu(b_conv1(b_mid))
  Tensor a_out;  // branch outputs, only kept when branch_output_relu
  Tensor b_out;
};

struct NetworkActivations {
  Tensor input;
  Tensor stem1_out;  // post-ReLU
  Tensor stem2_out;  // post-ReLU
  std::vector<BlockActivations> blocks;
  Tensor head_input;
};

Tensor block_forward_train(const Tensor& x, const DnIRBlockParams& params,
                           bool branch_output_relu, BlockActivations& acts);

/// Accumulates parameter gradients into `grads` and returns d loss / d x.
Tensor block_backward(const BlockActivations& acts, const DnIRBlockParams& params,
                      bool branch_output_relu, const Tensor& grad_out,
                      DnIRBlockParams& grads);

Tensor network_forward_train(const Tensor& y, const NetworkParams& params,
                             NetworkActivations& acts);

/// Accumulates parameter gradients of the loss into `grads` (which must be
/// shaped like `params`). The input gradient is returned only when
/// `want_input` is set.
Tensor network_backward(const NetworkActivations& acts,
                        const NetworkParams& params, const Tensor& grad_out,
                        NetworkParams& grads, bool want_input = false);

void check_single_channel(const Tensor& y);

}  // namespace dnirb
