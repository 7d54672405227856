#include "dnirb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "dnirb/dataset.hpp"
#include "dnirb/network.hpp"
#include "dnirb/ops.hpp"
#include "dnirb/trainer.hpp"

namespace dnirb {
namespace {

struct Slot {
  std::span<double> value;
  std::span<const double> grad;
};

// Returns the loss at the current parameter values and sets `*kink` when
// the ReLU pattern differs from the unperturbed one.
using Evaluator = std::function<double(bool* kink)>;

GradCheckCase run_case(const std::string& name, std::uint64_t seed,
                       const GradCheckOptions& opt, const std::vector<Slot>& slots,
                       const Evaluator& eval) {
  GradCheckCase result;
  result.name = name;
  result.seed = seed;
  std::mt19937_64 rng(derive_seed(seed, 0x5a));
  std::uniform_int_distribution<std::size_t> pick_slot(0, slots.size() - 1);
  const std::size_t max_attempts = opt.samples * 20;
  for (std::size_t attempt = 0; attempt < max_attempts && result.checked < opt.samples;
       ++attempt) {
    const Slot& s = slots[pick_slot(rng)];
    std::uniform_int_distribution<std::size_t> pick(0, s.value.size() - 1);
    const std::size_t i = pick(rng);
    double& v = s.value[i];
    const double orig = v;
    bool kink_plus = false, kink_minus = false;
    v = orig + opt.step;
    const double lp = eval(&kink_plus);
    v = orig - opt.step;
    const double lm = eval(&kink_minus);
    v = orig;
    if (kink_plus || kink_minus) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * opt.step);
    result.max_rel_error = std::max(result.max_rel_error, relative_error(s.grad[i], numeric));
    ++result.checked;
  }
  result.passed = result.checked == opt.samples && result.max_rel_error < opt.tolerance;
  return result;
}

Tensor random_tensor(const Shape& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

void randomize(ConvParams& c, std::mt19937_64& rng) {
  const auto& s = c.weights.shape();
  std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(s.c * s.h * s.w)));
  for (double& w : c.weights.data()) w = n(rng);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (double& b : c.bias) b = u(rng);
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool same_pattern(const Tensor& a, const Tensor& b) {
  auto pa = a.data();
  auto pb = b.data();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if ((pa[i] > 0.0) != (pb[i] > 0.0)) return false;
  }
  return true;
}

bool same_pattern(const BlockActivations& a, const BlockActivations& b, bool branch_relu) {
  bool same = same_pattern(a.a_mid, b.a_mid) && same_pattern(a.b_mid, b.b_mid) &&
              same_pattern(a.b_mid2, b.b_mid2);
  if (branch_relu) same = same && same_pattern(a.a_out, b.a_out) && same_pattern(a.b_out, b.b_out);
  return same;
}

void add_conv_slots(std::vector<Slot>& slots, ConvParams& p, const ConvParams& g) {
  slots.push_back({p.weights.data(), g.weights.data()});
  slots.push_back({p.bias, g.bias});
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale == 0.0) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

GradCheckCase check_conv_gradients(std::uint64_t seed, const GradCheckOptions& opt) {
  std::mt19937_64 rng(seed);
  const std::size_t kernels[] = {1, 3, 7};
  const std::size_t k = kernels[seed % 3];
  Tensor input = random_tensor(Shape{2, 3, 6, 5}, rng);
  ConvParams params(4, 3, k);
  randomize(params, rng);
  const Tensor proj = random_tensor(Shape{2, 4, 6, 5}, rng);

  ConvGrads g = conv2d_backward(input, params, proj);
  std::vector<Slot> slots{{input.data(), g.input.data()},
                          {params.weights.data(), g.weights.data()},
                          {params.bias, g.bias}};
  return run_case("conv2d k=" + std::to_string(k), seed, opt, slots, [&](bool*) {
    return dot(conv2d_forward(input, params), proj);
  });
}

GradCheckCase check_relu_gradients(std::uint64_t seed, const GradCheckOptions& opt) {
  std::mt19937_64 rng(seed);
  Tensor input = random_tensor(Shape{2, 3, 5, 5}, rng);
  for (double& v : input.data()) {
    // Keep every coordinate away from the kink.
    if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 - std::abs(v) : 1e-3 + v;
  }
  const Tensor proj = random_tensor(input.shape(), rng);
  const Tensor grad = relu_backward(input, proj);
  const Tensor base = relu_forward(input);
  std::vector<Slot> slots{{input.data(), grad.data()}};
  return run_case("relu", seed, opt, slots, [&](bool* kink) {
    Tensor out = relu_forward(input);
    *kink = !same_pattern(out, base);
    return dot(out, proj);
  });
}

GradCheckCase check_concat_add_gradients(std::uint64_t seed, const GradCheckOptions& opt) {
  // f(a, b, c) = <concat(a, b) + c, w>; gradients are slices of w.
  std::mt19937_64 rng(seed);
  Tensor a = random_tensor(Shape{1, 2, 4, 4}, rng);
  Tensor b = random_tensor(Shape{1, 3, 4, 4}, rng);
  Tensor c = random_tensor(Shape{1, 5, 4, 4}, rng);
  const Tensor proj = random_tensor(c.shape(), rng);
  const Tensor gc = proj;  // add passes grad_out to both inputs
  auto [ga, gb] = split_channels(proj, a.shape().c);
  std::vector<Slot> slots{{a.data(), ga.data()}, {b.data(), gb.data()}, {c.data(), gc.data()}};
  return run_case("concat+add", seed, opt, slots, [&](bool*) {
    return dot(add_elementwise(concat_channels(a, b), c), proj);
  });
}

GradCheckCase check_block_gradients(std::uint64_t seed, const GradCheckOptions& opt) {
  std::mt19937_64 rng(seed);
  const bool branch_relu = (seed % 2) == 1;
  Tensor x = random_tensor(Shape{1, kFeatureChannels, 5, 5}, rng);
  DnIRBlockParams p;
  randomize(p.a_reduce, rng);
  randomize(p.a_conv, rng);
  randomize(p.b_reduce, rng);
  randomize(p.b_conv1, rng);
  randomize(p.b_conv2, rng);
  const Tensor proj = random_tensor(x.shape(), rng);

  BlockActivations base;
  block_forward_train(x, p, branch_relu, base);
  DnIRBlockParams g;
  for (ConvParams* c : {&g.a_reduce, &g.a_conv, &g.b_reduce, &g.b_conv1, &g.b_conv2}) {
    c->weights.fill(0.0);
    std::fill(c->bias.begin(), c->bias.end(), 0.0);
  }
  const Tensor gx = block_backward(base, p, branch_relu, proj, g);

  std::vector<Slot> slots{{x.data(), gx.data()}};
  add_conv_slots(slots, p.a_reduce, g.a_reduce);
  add_conv_slots(slots, p.a_conv, g.a_conv);
  add_conv_slots(slots, p.b_reduce, g.b_reduce);
  add_conv_slots(slots, p.b_conv1, g.b_conv1);
  add_conv_slots(slots, p.b_conv2, g.b_conv2);
  const std::string name = branch_relu ? "dnirb block (branch relu)" : "dnirb block";
  return run_case(name, seed, opt, slots, [&](bool* kink) {
    BlockActivations acts;
    const double loss = dot(block_forward_train(x, p, branch_relu, acts), proj);
    *kink = !same_pattern(acts, base, branch_relu);
    return loss;
  });
}

GradCheckCase check_network_gradients(std::uint64_t seed, const GradCheckOptions& opt) {
  std::mt19937_64 rng(seed);
  NetworkConfig cfg;
  cfg.blocks = 1;
  NetworkParams p = init_params(cfg, derive_seed(seed, 1));
  for_each_layer(p, [&](const std::string&, ConvParams& c) {
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (double& b : c.bias) b = u(rng);
  });
  const Tensor y = random_tensor(Shape{1, 1, 8, 8}, rng, 0.0, 1.0);
  const Tensor target = random_tensor(y.shape(), rng, -0.1, 0.1);

  NetworkActivations base;
  const Tensor pred = network_forward_train(y, p, base);
  const LossResult lr = residual_loss(pred, target);
  NetworkParams g(cfg);
  network_backward(base, p, lr.grad, g);

  std::vector<Slot> slots;
  std::vector<ConvParams*> pl, gl;
  for_each_layer(p, [&](const std::string&, ConvParams& c) { pl.push_back(&c); });
  for_each_layer(g, [&](const std::string&, ConvParams& c) { gl.push_back(&c); });
  for (std::size_t i = 0; i < pl.size(); ++i) add_conv_slots(slots, *pl[i], *gl[i]);

  return run_case("network N=1 + residual loss", seed, opt, slots, [&](bool* kink) {
    NetworkActivations acts;
    const double loss = residual_loss(network_forward_train(y, p, acts), target).loss;
    bool same = same_pattern(acts.stem1_out, base.stem1_out) &&
                same_pattern(acts.stem2_out, base.stem2_out);
    for (std::size_t b = 0; same && b < acts.blocks.size(); ++b) {
      same = same_pattern(acts.blocks[b], base.blocks[b], cfg.branch_output_relu);
    }
    *kink = !same;
    return loss;
  });
}

std::vector<GradCheckCase> run_gradcheck_suite(std::span<const std::uint64_t> seeds,
                                               const GradCheckOptions& opt) {
  std::vector<GradCheckCase> out;
  for (std::uint64_t s : seeds) {
    out.push_back(check_conv_gradients(s, opt));
    out.push_back(check_relu_gradients(s, opt));
    out.push_back(check_concat_add_gradients(s, opt));
    out.push_back(check_block_gradients(s, opt));
    out.push_back(check_network_gradients(s, opt));
  }
  return out;
}

}  // namespace dnirb
