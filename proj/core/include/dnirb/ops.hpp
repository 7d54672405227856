#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dnirb/tensor.hpp"

namespace dnirb {

/// Learnable convolution: weights (c_out, c_in, k, k) and one bias per
/// output channel. Stride is 1 and padding keeps the spatial size, so k
/// must be odd.
struct ConvParams {
  Tensor weights;
  std::vector<double> bias;

  ConvParams() = default;
  ConvParams(std::size_t c_out, std::size_t c_in, std::size_t k);

  std::size_t c_out() const { return weights.shape().n; }
  std::size_t c_in() const { return weights.shape().c; }
  std::size_t kernel() const { return weights.shape().h; }
  std::size_t param_count() const { return weights.size() + bias.size(); }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct ConvGrads {
  Tensor input;
  Tensor weights;
  std::vector<double> bias;
};

/// Zero-padded stride-1 cross-correlation plus bias.
Tensor conv2d_forward(const Tensor& input, const ConvParams& params);

ConvGrads conv2d_backward(const Tensor& input, const ConvParams& params,
                          const Tensor& grad_out);

/// Adds the weight and bias gradients for `grad_out` into `grad_weights`
/// and `grad_bias`, and returns the input gradient when `want_input` is
/// set (otherwise an empty 1x1x1x1 tensor).
Tensor conv2d_backward_accumulate(const Tensor& input, const ConvParams& params,
                                  const Tensor& grad_out, Tensor& grad_weights,
                                  std::vector<double>& grad_bias,
                                  bool want_input);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);
void relu_inplace(Tensor& t);

/// Channels of `a` precede channels of `b`.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Inverse of concat_channels: first `c_first` channels, then the rest.
std::pair<Tensor, Tensor> split_channels(const Tensor& t, std::size_t c_first);

Tensor add_elementwise(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace dnirb
