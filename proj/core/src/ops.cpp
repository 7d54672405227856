#include "dnirb/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

#include "dnirb/errors.hpp"

namespace dnirb {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void check_conv_params(const ConvParams& p) {
  const Shape& ws = p.weights.shape();
  if (ws.h != ws.w || ws.h % 2 == 0) {
    throw ShapeError("convolution kernel must be square with odd size, got " +
                     to_string(ws));
  }
  if (p.bias.size() != ws.n) {
    throw ShapeError("convolution bias length " + std::to_string(p.bias.size()) +
                     " != c_out " + std::to_string(ws.n));
  }
}

void check_conv_input(const Tensor& input, const ConvParams& p) {
  check_conv_params(p);
  if (input.shape().c != p.c_in()) {
    throw ShapeError("conv2d: expected c_in " + std::to_string(p.c_in()) +
                     ", got " + std::to_string(input.shape().c));
  }
}

// Output rows [y_begin, y_end) of one sample form a tile; its unfolded
// input is a (c*k*k, rows*w) row-major matrix of zero-padded shifted copies.
struct Tile {
  long y_begin;
  long y_end;
  std::size_t pixels(std::size_t w) const { return static_cast<std::size_t>(y_end - y_begin) * w; }
};

// Rows per tile so a tile covers roughly kTilePixels output pixels.
constexpr std::size_t kTilePixels = 4096;

long tile_rows(std::size_t w, std::size_t h) {
  return static_cast<long>(std::clamp<std::size_t>(kTilePixels / w, 1, h));
}

void im2col(const double* src, std::size_t c, std::size_t h, std::size_t w,
            std::size_t k, Tile tile, double* cols) {
  const long pad = static_cast<long>(k / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  const std::size_t hw = h * w, tw = tile.pixels(w);
  double* row = cols;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = src + ch * hw;
    for (long ky = 0; ky < static_cast<long>(k); ++ky) {
      for (long kx = 0; kx < static_cast<long>(k); ++kx, row += tw) {
        const long dy = ky - pad, dx = kx - pad;
        const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
        for (long y = tile.y_begin; y < tile.y_end; ++y) {
          double* dst = row + (y - tile.y_begin) * W;
          const long sy = y + dy;
          if (sy < 0 || sy >= H || x1 <= x0) {
            std::fill(dst, dst + W, 0.0);
            continue;
          }
          std::fill(dst, dst + x0, 0.0);
          std::memcpy(dst + x0, plane + sy * W + x0 + dx,
                      static_cast<std::size_t>(x1 - x0) * sizeof(double));
          std::fill(dst + x1, dst + W, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds the column matrix back into a sample.
void col2im_add(const double* cols, std::size_t c, std::size_t h,
                std::size_t w, std::size_t k, Tile tile, double* dst) {
  const long pad = static_cast<long>(k / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  const std::size_t hw = h * w, tw = tile.pixels(w);
  const double* row = cols;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* plane = dst + ch * hw;
    for (long ky = 0; ky < static_cast<long>(k); ++ky) {
      for (long kx = 0; kx < static_cast<long>(k); ++kx, row += tw) {
        const long dy = ky - pad, dx = kx - pad;
        const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
        for (long y = tile.y_begin; y < tile.y_end; ++y) {
          const long sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const double* s = row + (y - tile.y_begin) * W;
          double* d = plane + sy * W + dx;
          for (long x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
    }
  }
}

AlignedBuffer& scratch(std::size_t n) {
  thread_local AlignedBuffer buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace

ConvParams::ConvParams(std::size_t c_out, std::size_t c_in, std::size_t k)
    : weights(Shape{c_out, c_in, k, k}), bias(c_out, 0.0) {
  check_conv_params(*this);
}

Tensor conv2d_forward(const Tensor& input, const ConvParams& params) {
  check_conv_input(input, params);
  const Shape& s = input.shape();
  const std::size_t k = params.kernel(), c_out = params.c_out();
  const std::size_t hw = s.plane(), ckk = s.c * k * k;
  Tensor out(Shape{s.n, c_out, s.h, s.w});

  ConstMap wm(params.weights.raw(), c_out, ckk);
  ConstVecMap bias(params.bias.data(), c_out);
  for (std::size_t n = 0; n < s.n; ++n) {
    MutMap o(out.sample(n).data(), c_out, hw);
    if (k == 1) {
      o.noalias() = wm * ConstMap(input.sample(n).data(), ckk, hw);
      o.colwise() += bias;
      continue;
    }
    const long rows = tile_rows(s.w, s.h);
    AlignedBuffer& buf = scratch(ckk * static_cast<std::size_t>(rows) * s.w);
    for (long y = 0; y < static_cast<long>(s.h); y += rows) {
      const Tile tile{y, std::min<long>(y + rows, static_cast<long>(s.h))};
      const std::size_t tw = tile.pixels(s.w);
      im2col(input.sample(n).data(), s.c, s.h, s.w, k, tile, buf.data());
      auto o_tile = o.middleCols(static_cast<Eigen::Index>(y * s.w), static_cast<Eigen::Index>(tw));
      o_tile.noalias() = wm * ConstMap(buf.data(), ckk, tw);
      o_tile.colwise() += bias;
    }
  }
  return out;
}

Tensor conv2d_backward_accumulate(const Tensor& input, const ConvParams& params,
                                  const Tensor& grad_out, Tensor& grad_weights,
                                  std::vector<double>& grad_bias,
                                  bool want_input) {
  check_conv_input(input, params);
  const Shape& s = input.shape();
  const std::size_t k = params.kernel(), c_out = params.c_out();
  const Shape expected{s.n, c_out, s.h, s.w};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d_backward: grad_out shape " +
                     to_string(grad_out.shape()) + " != output shape " +
                     to_string(expected));
  }
  if (grad_weights.shape() != params.weights.shape() ||
      grad_bias.size() != c_out) {
    throw ShapeError("conv2d_backward: gradient accumulators do not match "
                     "parameter shapes");
  }
  const std::size_t hw = s.plane(), ckk = s.c * k * k;
  ConstMap wm(params.weights.raw(), c_out, ckk);
  MutMap gw(grad_weights.raw(), c_out, ckk);
  VecMap gb(grad_bias.data(), c_out);
  Tensor grad_in = want_input ? Tensor(s) : Tensor();

  for (std::size_t n = 0; n < s.n; ++n) {
    ConstMap go(grad_out.sample(n).data(), c_out, hw);
    gb += go.rowwise().sum();
    if (k == 1) {
      ConstMap cols(input.sample(n).data(), ckk, hw);
      gw.noalias() += go * cols.transpose();
      if (want_input) {
        MutMap gi(grad_in.sample(n).data(), ckk, hw);
        gi.noalias() = wm.transpose() * go;
      }
      continue;
    }
    const long rows = tile_rows(s.w, s.h);
    AlignedBuffer& buf = scratch(ckk * static_cast<std::size_t>(rows) * s.w);
    for (long y = 0; y < static_cast<long>(s.h); y += rows) {
      const Tile tile{y, std::min<long>(y + rows, static_cast<long>(s.h))};
      const auto tw = static_cast<Eigen::Index>(tile.pixels(s.w));
      const auto go_tile = go.middleCols(static_cast<Eigen::Index>(y * s.w), tw);
      im2col(input.sample(n).data(), s.c, s.h, s.w, k, tile, buf.data());
      gw.noalias() += go_tile * ConstMap(buf.data(), ckk, tw).transpose();
      if (want_input) {
        MutMap gcols(buf.data(), ckk, tw);
        gcols.noalias() = wm.transpose() * go_tile;
        col2im_add(buf.data(), s.c, s.h, s.w, k, tile, grad_in.sample(n).data());
      }
    }
  }
  return grad_in;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvParams& params,
                          const Tensor& grad_out) {
  check_conv_params(params);
  ConvGrads g{Tensor(), Tensor(params.weights.shape()),
              std::vector<double>(params.c_out(), 0.0)};
  g.input = conv2d_backward_accumulate(input, params, grad_out, g.weights,
                                       g.bias, true);
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  relu_inplace(out);
  return out;
}

void relu_inplace(Tensor& t) {
  for (double& v : t.data()) v = v > 0.0 ? v : 0.0;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (input.shape() != grad_out.shape()) {
    throw ShapeError("relu_backward: input " + to_string(input.shape()) +
                     " vs grad_out " + to_string(grad_out.shape()));
  }
  Tensor g = grad_out;
  auto in = input.data();
  auto gd = g.data();
  for (std::size_t i = 0; i < gd.size(); ++i) {
    if (!(in[i] > 0.0)) gd[i] = 0.0;
  }
  return g;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape &sa = a.shape(), &sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + to_string(sa) + " and " +
                     to_string(sb) + " disagree on n, h or w");
  }
  Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  for (std::size_t n = 0; n < sa.n; ++n) {
    auto dst = out.sample(n);
    auto pa = a.sample(n);
    auto pb = b.sample(n);
    std::copy(pa.begin(), pa.end(), dst.begin());
    std::copy(pb.begin(), pb.end(), dst.begin() + pa.size());
  }
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& t, std::size_t c_first) {
  const Shape& s = t.shape();
  if (c_first == 0 || c_first >= s.c) {
    throw ShapeError("split_channels: split point " + std::to_string(c_first) +
                     " invalid for " + to_string(s));
  }
  Tensor a(Shape{s.n, c_first, s.h, s.w});
  Tensor b(Shape{s.n, s.c - c_first, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    auto src = t.sample(n);
    auto da = a.sample(n);
    auto db = b.sample(n);
    std::copy_n(src.begin(), da.size(), da.begin());
    std::copy(src.begin() + da.size(), src.end(), db.begin());
  }
  return {std::move(a), std::move(b)};
}

Tensor add_elementwise(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add_elementwise: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) da[i] += db[i];
}

}  // namespace dnirb
