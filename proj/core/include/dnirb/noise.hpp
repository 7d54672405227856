#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dnirb/tensor.hpp"

namespace dnirb {

/// Zero-mean additive noise. `scale` is the Laplace b or the Gaussian
/// sigma, both in 8-bit intensity units (0..255).
struct NoiseModel {
  enum class Kind { kLaplace, kGaussian };

  Kind kind = Kind::kLaplace;
  double scale = 1.0;

  static NoiseModel laplace(double b);
  static NoiseModel gaussian(double sigma);
  /// Parses "laplace" / "gaussian".
  static NoiseModel from_name(const std::string& name, double scale);

  double variance() const;
  std::string name() const;

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

/// i.i.d. noise samples in 8-bit units. Laplace uses the inverse CDF of a
/// symmetric uniform draw; Gaussian uses a standard normal transform.
Tensor sample_noise(const NoiseModel& model, const Shape& shape, std::uint64_t seed);

double pdf(const NoiseModel& model, double v);

/// clip(clean + v / 255, 0, 1). `clean` must already be in [0, 1].
Tensor add_noise(const Tensor& clean, const NoiseModel& model, std::uint64_t seed);

void check_unit_range(const Tensor& t, const char* what);

enum class Smoother { kGaussianBlur, kMedian };

/// 5x5 Gaussian blur (sigma 1.5) with mirrored borders.
Tensor gaussian_blur(const Tensor& image);
/// 3x3 median with mirrored borders.
Tensor median_filter(const Tensor& image);

/// (noisy - smoother(noisy)) * 255 for every pixel.
std::vector<double> extract_residuals(const Tensor& noisy, Smoother smoother);

/// 81 unit-width bins centred on the integers -40..40. Residuals outside
/// [-40.5, 40.5) are counted in `outside` and excluded from `total`.
struct NoiseHistogram {
  static constexpr int kMin = -40;
  static constexpr int kMax = 40;
  static constexpr std::size_t kBins = kMax - kMin + 1;

  std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(kBins, 0);
  std::uint64_t total = 0;
  std::uint64_t outside = 0;

  void add(double v);
  double bin_center(std::size_t i) const { return kMin + static_cast<double>(i); }
  std::vector<double> probabilities() const;
};

NoiseHistogram histogram_of(const std::vector<double>& residuals);
NoiseHistogram extract_noise_histogram(const Tensor& noisy,
                                       Smoother smoother = Smoother::kGaussianBlur);

/// Writes "bin_center,probability" rows.
void write_histogram_csv(const NoiseHistogram& hist, std::ostream& out);

/// Maximum-likelihood fits of both noise families to residual samples.
struct NoiseFit {
  double laplace_b = 0.0;         // mean |r|
  double gaussian_sigma = 0.0;    // sqrt(mean r^2)
  double laplace_loglik = 0.0;
  double gaussian_loglik = 0.0;
};

NoiseFit fit_noise(const std::vector<double>& residuals);

}  // namespace dnirb
