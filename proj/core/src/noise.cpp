#include "dnirb/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "dnirb/errors.hpp"

namespace dnirb {

NoiseModel NoiseModel::laplace(double b) {
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw ConfigError("Laplace scale b must be positive, got " + std::to_string(b));
  }
  return {Kind::kLaplace, b};
}

NoiseModel NoiseModel::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("Gaussian sigma must be positive, got " + std::to_string(sigma));
  }
  return {Kind::kGaussian, sigma};
}

NoiseModel NoiseModel::from_name(const std::string& name, double scale) {
  if (name == "laplace") return laplace(scale);
  if (name == "gaussian") return gaussian(scale);
  throw ConfigError("unknown noise model '" + name + "' (expected laplace|gaussian)");
}

double NoiseModel::variance() const {
  return kind == Kind::kLaplace ? 2.0 * scale * scale : scale * scale;
}

std::string NoiseModel::name() const {
  return kind == Kind::kLaplace ? "laplace" : "gaussian";
}

Tensor sample_noise(const NoiseModel& model, const Shape& shape, std::uint64_t seed) {
  // Re-validate: the struct is an aggregate and may be built directly.
  const NoiseModel m = NoiseModel::from_name(model.name(), model.scale);
  Tensor out(shape);
  std::mt19937_64 rng(seed);
  if (m.kind == NoiseModel::Kind::kLaplace) {
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    for (double& v : out.data()) {
      double u = uni(rng);
      while (u == -0.5) u = uni(rng);  // ln(0)
      const double sgn = u < 0.0 ? -1.0 : 1.0;
      v = -m.scale * sgn * std::log1p(-2.0 * std::abs(u));
    }
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : out.data()) v = m.scale * normal(rng);
  }
  return out;
}

double pdf(const NoiseModel& model, double v) {
  const double s = model.scale;
  if (model.kind == NoiseModel::Kind::kLaplace) {
    return std::exp(-std::abs(v) / s) / (2.0 * s);
  }
  const double z = std::abs(v) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

void check_unit_range(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError(std::string(what) + " must lie in [0, 1], found " +
                      std::to_string(v));
    }
  }
}

Tensor add_noise(const Tensor& clean, const NoiseModel& model, std::uint64_t seed) {
  check_unit_range(clean, "clean image");
  Tensor noise = sample_noise(model, clean.shape(), seed);
  Tensor out = clean;
  auto o = out.data();
  auto n = noise.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = std::clamp(o[i] + n[i] / 255.0, 0.0, 1.0);
  }
  return out;
}

namespace {

// Mirror index into [0, n) without repeating the edge sample (…2 1 | 0 1 2…).
long mirror(long i, long n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

template <typename Fn>
Tensor per_plane(const Tensor& image, Fn&& fn) {
  Tensor out(image.shape());
  const Shape& s = image.shape();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = image.raw() + image.offset(n, c, 0, 0);
      double* dst = out.raw() + out.offset(n, c, 0, 0);
      fn(src, dst, static_cast<long>(s.h), static_cast<long>(s.w));
    }
  }
  return out;
}

}  // namespace

Tensor gaussian_blur(const Tensor& image) {
  constexpr int kRadius = 2;
  constexpr double kSigma = 1.5;
  std::array<double, 2 * kRadius + 1> taps{};
  double sum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    taps[i + kRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
    sum += taps[i + kRadius];
  }
  for (double& t : taps) t /= sum;

  return per_plane(image, [&](const double* src, double* dst, long h, long w) {
    std::vector<double> tmp(static_cast<std::size_t>(h * w));
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -kRadius; k <= kRadius; ++k) {
          acc += taps[k + kRadius] * src[y * w + mirror(x + k, w)];
        }
        tmp[y * w + x] = acc;
      }
    }
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -kRadius; k <= kRadius; ++k) {
          acc += taps[k + kRadius] * tmp[mirror(y + k, h) * w + x];
        }
        dst[y * w + x] = acc;
      }
    }
  });
}

Tensor median_filter(const Tensor& image) {
  return per_plane(image, [](const double* src, double* dst, long h, long w) {
    std::array<double, 9> win{};
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        std::size_t k = 0;
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            win[k++] = src[mirror(y + dy, h) * w + mirror(x + dx, w)];
          }
        }
        std::nth_element(win.begin(), win.begin() + 4, win.end());
        dst[y * w + x] = win[4];
      }
    }
  });
}

std::vector<double> extract_residuals(const Tensor& noisy, Smoother smoother) {
  const Tensor smooth =
      smoother == Smoother::kGaussianBlur ? gaussian_blur(noisy) : median_filter(noisy);
  std::vector<double> r(noisy.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (noisy[i] - smooth[i]) * 255.0;
  return r;
}

void NoiseHistogram::add(double v) {
  const double idx = std::floor(v + 0.5) - kMin;
  if (!(idx >= 0.0 && idx < static_cast<double>(kBins))) {
    ++outside;
    return;
  }
  ++counts[static_cast<std::size_t>(idx)];
  ++total;
}

std::vector<double> NoiseHistogram::probabilities() const {
  std::vector<double> p(kBins, 0.0);
  if (total == 0) return p;
  for (std::size_t i = 0; i < kBins; ++i) {
    p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return p;
}

NoiseHistogram histogram_of(const std::vector<double>& residuals) {
  NoiseHistogram h;
  for (double v : residuals) h.add(v);
  return h;
}

NoiseHistogram extract_noise_histogram(const Tensor& noisy, Smoother smoother) {
  return histogram_of(extract_residuals(noisy, smoother));
}

void write_histogram_csv(const NoiseHistogram& hist, std::ostream& out) {
  const std::vector<double> p = hist.probabilities();
  out << "bin_center,probability\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    out << hist.bin_center(i) << ',' << p[i] << '\n';
  }
}

NoiseFit fit_noise(const std::vector<double>& residuals) {
  if (residuals.empty()) throw DataError("cannot fit noise to zero residuals");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (double r : residuals) {
    abs_sum += std::abs(r);
    sq_sum += r * r;
  }
  const double n = static_cast<double>(residuals.size());
  NoiseFit fit;
  fit.laplace_b = abs_sum / n;
  fit.gaussian_sigma = std::sqrt(sq_sum / n);
  if (fit.laplace_b > 0.0) {
    // At the ML scale the likelihoods reduce to closed forms.
    fit.laplace_loglik = -n * (std::log(2.0 * fit.laplace_b) + 1.0);
    fit.gaussian_loglik =
        -0.5 * n * (std::log(2.0 * std::numbers::pi * fit.gaussian_sigma * fit.gaussian_sigma) + 1.0);
  }
  return fit;
}

}  // namespace dnirb
