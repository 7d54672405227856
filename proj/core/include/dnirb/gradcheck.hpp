#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dnirb {

struct GradCheckOptions {
  double step = 1e-5;        // central-difference step
  double tolerance = 1e-5;   // max relative error
  std::size_t samples = 50;  // coordinates checked per case
};

struct GradCheckCase {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t checked = 0;
  /// Coordinates whose perturbation flipped a ReLU; redrawn, not checked.
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// |a - b| / max(|a|, |b|); zero when both are exactly zero.
double relative_error(double analytic, double numeric);

/// Each case compares analytic gradients against central differences on
/// randomly sampled coordinates. Perturbations that change any ReLU on/off
/// pattern are redrawn so kinks are never differenced across.
GradCheckCase check_conv_gradients(std::uint64_t seed, const GradCheckOptions& opt = {});
GradCheckCase check_relu_gradients(std::uint64_t seed, const GradCheckOptions& opt = {});
GradCheckCase check_concat_add_gradients(std::uint64_t seed, const GradCheckOptions& opt = {});
GradCheckCase check_block_gradients(std::uint64_t seed, const GradCheckOptions& opt = {});
/// One-block network on an 8x8 input through the residual loss.
GradCheckCase check_network_gradients(std::uint64_t seed, const GradCheckOptions& opt = {});

std::vector<GradCheckCase> run_gradcheck_suite(std::span<const std::uint64_t> seeds,
                                               const GradCheckOptions& opt = {});

}  // namespace dnirb
