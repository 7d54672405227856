#include "dnirb/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dnirb/errors.hpp"

namespace dnirb {
namespace {

// Adds the gradient for `conv` evaluated at `input` into `grad` and returns
// the gradient with respect to `input`.
Tensor conv_back(const Tensor& input, const ConvParams& conv,
                 const Tensor& grad_out, ConvParams& grad, bool want_input = true) {
  return conv2d_backward_accumulate(input, conv, grad_out, grad.weights,
                                    grad.bias, want_input);
}

// ReLU gradient using the post-activation value as the mask (out > 0 iff
// in > 0).
void relu_mask(Tensor& grad, const Tensor& activated) {
  auto g = grad.data();
  auto a = activated.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(a[i] > 0.0)) g[i] = 0.0;
  }
}

Tensor conv_relu(const Tensor& x, const ConvParams& p) {
  Tensor out = conv2d_forward(x, p);
  relu_inplace(out);
  return out;
}

void check_block_input(const Tensor& x) {
  if (x.shape().c != kFeatureChannels) {
    throw ShapeError("block_forward: expected " + std::to_string(kFeatureChannels) +
                     " channels, got " + std::to_string(x.shape().c));
  }
}

}  // namespace

DnIRBlockParams::DnIRBlockParams()
    : a_reduce(kBottleneckChannels, kFeatureChannels, 1),
      a_conv(kBottleneckChannels, kBottleneckChannels, 3),
      b_reduce(kBottleneckChannels, kFeatureChannels, 1),
      b_conv1(kBottleneckChannels, kBottleneckChannels, 3),
      b_conv2(kBottleneckChannels, kBottleneckChannels, 3) {}

std::size_t DnIRBlockParams::param_count() const {
  return a_reduce.param_count() + a_conv.param_count() + b_reduce.param_count() +
         b_conv1.param_count() + b_conv2.param_count();
}

NetworkParams::NetworkParams(const NetworkConfig& cfg)
    : config(cfg),
      stem1(kFeatureChannels, 1, kStemKernel),
      stem2(kFeatureChannels, kFeatureChannels, 3),
      blocks(cfg.blocks),
      head(1, kFeatureChannels, 3) {
  if (cfg.blocks < 1) throw ConfigError("network needs at least one block");
}

std::size_t NetworkParams::param_count() const {
  std::size_t total = 0;
  for_each_layer(*this, [&](const std::string&, const ConvParams& c) {
    total += c.param_count();
  });
  return total;
}

std::size_t expected_block_param_count() {
  const std::size_t reduce = kFeatureChannels * kBottleneckChannels + kBottleneckChannels;
  const std::size_t conv3 = 9 * kBottleneckChannels * kBottleneckChannels + kBottleneckChannels;
  return 2 * reduce + 3 * conv3;
}

std::size_t expected_param_count(std::size_t blocks) {
  const std::size_t stem1 = kStemKernel * kStemKernel * kFeatureChannels + kFeatureChannels;
  const std::size_t stem2 = 9 * kFeatureChannels * kFeatureChannels + kFeatureChannels;
  const std::size_t head = 9 * kFeatureChannels + 1;
  return stem1 + stem2 + blocks * expected_block_param_count() + head;
}

namespace {

template <typename Params, typename Fn>
void visit_layers(Params& p, Fn&& fn) {
  fn(std::string("stem1"), p.stem1);
  fn(std::string("stem2"), p.stem2);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string prefix = "blocks." + std::to_string(i) + ".";
    auto& b = p.blocks[i];
    fn(prefix + "a_reduce", b.a_reduce);
    fn(prefix + "a_conv", b.a_conv);
    fn(prefix + "b_reduce", b.b_reduce);
    fn(prefix + "b_conv1", b.b_conv1);
    fn(prefix + "b_conv2", b.b_conv2);
  }
  fn(std::string("head"), p.head);
}

}  // namespace

void for_each_layer(NetworkParams& params,
                    const std::function<void(const std::string&, ConvParams&)>& fn) {
  visit_layers(params, fn);
}

void for_each_layer(const NetworkParams& params,
                    const std::function<void(const std::string&, const ConvParams&)>& fn) {
  visit_layers(params, fn);
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  NetworkParams params(config);
  std::mt19937_64 rng(seed);
  for_each_layer(params, [&](const std::string&, ConvParams& conv) {
    const auto& s = conv.weights.shape();
    const double fan_in = static_cast<double>(s.c * s.h * s.w);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& w : conv.weights.data()) w = dist(rng);
    std::fill(conv.bias.begin(), conv.bias.end(), 0.0);
  });
  return params;
}

void check_single_channel(const Tensor& y) {
  if (y.shape().c != 1) {
    throw ShapeError("network expects a single-channel input, got " +
                     std::to_string(y.shape().c) + " channels");
  }
}

Tensor block_forward(const Tensor& x, const DnIRBlockParams& p,
                     bool branch_output_relu) {
  check_block_input(x);
  Tensor a = conv2d_forward(conv_relu(x, p.a_reduce), p.a_conv);
  Tensor b = conv2d_forward(conv_relu(conv_relu(x, p.b_reduce), p.b_conv1), p.b_conv2);
  if (branch_output_relu) {
    relu_inplace(a);
    relu_inplace(b);
  }
  Tensor out = concat_channels(a, b);
  add_inplace(out, x);
  return out;
}

Tensor network_forward(const Tensor& y, const NetworkParams& params) {
  check_single_channel(y);
  Tensor x = conv_relu(conv_relu(y, params.stem1), params.stem2);
  for (const auto& block : params.blocks) {
    x = block_forward(x, block, params.config.branch_output_relu);
  }
  return conv2d_forward(x, params.head);
}

Tensor denoise(const Tensor& y, const NetworkParams& params) {
  Tensor residual = network_forward(y, params);
  Tensor out = y;
  auto o = out.data();
  auto r = residual.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(o[i] - r[i], 0.0, 1.0);
  return out;
}

Tensor block_forward_train(const Tensor& x, const DnIRBlockParams& p,
                           bool branch_output_relu, BlockActivations& acts) {
  check_block_input(x);
  acts.input = x;
  acts.a_mid = conv_relu(x, p.a_reduce);
  acts.b_mid = conv_relu(x, p.b_reduce);
  acts.b_mid2 = conv_relu(acts.b_mid, p.b_conv1);
  Tensor a = conv2d_forward(acts.a_mid, p.a_conv);
  Tensor b = conv2d_forward(acts.b_mid2, p.b_conv2);
  if (branch_output_relu) {
    relu_inplace(a);
    relu_inplace(b);
    acts.a_out = a;
    acts.b_out = b;
  }
  Tensor out = concat_channels(a, b);
  add_inplace(out, x);
  return out;
}

Tensor block_backward(const BlockActivations& acts, const DnIRBlockParams& p,
                      bool branch_output_relu, const Tensor& grad_out,
                      DnIRBlockParams& g) {
  auto [ga, gb] = split_channels(grad_out, kBottleneckChannels);
  if (branch_output_relu) {
    relu_mask(ga, acts.a_out);
    relu_mask(gb, acts.b_out);
  }
  Tensor grad_x = grad_out;  // shortcut

  Tensor g_amid = conv_back(acts.a_mid, p.a_conv, ga, g.a_conv);
  relu_mask(g_amid, acts.a_mid);
  add_inplace(grad_x, conv_back(acts.input, p.a_reduce, g_amid, g.a_reduce));

  Tensor g_bmid2 = conv_back(acts.b_mid2, p.b_conv2, gb, g.b_conv2);
  relu_mask(g_bmid2, acts.b_mid2);
  Tensor g_bmid = conv_back(acts.b_mid, p.b_conv1, g_bmid2, g.b_conv1);
  relu_mask(g_bmid, acts.b_mid);
  add_inplace(grad_x, conv_back(acts.input, p.b_reduce, g_bmid, g.b_reduce));
  return grad_x;
}

Tensor network_forward_train(const Tensor& y, const NetworkParams& params,
                             NetworkActivations& acts) {
  check_single_channel(y);
  acts.input = y;
  acts.stem1_out = conv_relu(y, params.stem1);
  acts.stem2_out = conv_relu(acts.stem1_out, params.stem2);
  acts.blocks.resize(params.blocks.size());
  Tensor x = acts.stem2_out;
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    x = block_forward_train(x, params.blocks[i], params.config.branch_output_relu,
                            acts.blocks[i]);
  }
  acts.head_input = std::move(x);
  return conv2d_forward(acts.head_input, params.head);
}

Tensor network_backward(const NetworkActivations& acts,
                        const NetworkParams& params, const Tensor& grad_out,
                        NetworkParams& grads, bool want_input) {
  if (grads.blocks.size() != params.blocks.size()) {
    throw ShapeError("network_backward: gradient buffer has " +
                     std::to_string(grads.blocks.size()) + " blocks, network has " +
                     std::to_string(params.blocks.size()));
  }
  Tensor g = conv_back(acts.head_input, params.head, grad_out, grads.head);
  for (std::size_t i = params.blocks.size(); i-- > 0;) {
    g = block_backward(acts.blocks[i], params.blocks[i],
                       params.config.branch_output_relu, g, grads.blocks[i]);
  }
  relu_mask(g, acts.stem2_out);
  g = conv_back(acts.stem1_out, params.stem2, g, grads.stem2);
  relu_mask(g, acts.stem1_out);
  return conv_back(acts.input, params.stem1, g, grads.stem1, want_input);
}

}  // namespace dnirb
