#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dnirb/dataset.hpp"
#include "dnirb/errors.hpp"
#include "dnirb/eval.hpp"
#include "dnirb/noise.hpp"

namespace dnirb {
namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const Tensor& t) {
  double sum = 0.0;
  for (double v : t.data()) sum += v;
  const double n = static_cast<double>(t.size());
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : t.data()) sq += (v - mean) * (v - mean);
  return {mean, sq / (n - 1.0)};
}

const Shape kMillion{1, 1, 1000, 1000};

TEST(SampleNoiseTest, LaplaceMoments) {
  const Moments m = moments(sample_noise(NoiseModel::laplace(12.5), kMillion, 1));
  EXPECT_NEAR(m.mean, 0.0, 0.1);
  EXPECT_NEAR(m.var / 312.5, 1.0, 0.02);
}

TEST(SampleNoiseTest, GaussianMoments) {
  const Moments m = moments(sample_noise(NoiseModel::gaussian(25.0), kMillion, 2));
  EXPECT_NEAR(m.mean, 0.0, 0.1);
  EXPECT_NEAR(m.var / 625.0, 1.0, 0.02);
}

TEST(SampleNoiseTest, MomentsWithinThreeStandardErrors) {
  // Var of the sample variance is (mu4 - sigma^4) / n; mu4 = 24 b^4 for Laplace
  // and 3 sigma^4 for Gaussian.
  const double n = 1e6;
  {
    const double b = 7.5, var = 2 * b * b;
    const Moments m = moments(sample_noise(NoiseModel::laplace(b), kMillion, 11));
    EXPECT_LT(std::abs(m.mean), 3.0 * std::sqrt(var / n));
    EXPECT_LT(std::abs(m.var - var), 3.0 * std::sqrt((24 * std::pow(b, 4) - var * var) / n));
  }
  {
    const double s = 10.0, var = s * s;
    const Moments m = moments(sample_noise(NoiseModel::gaussian(s), kMillion, 12));
    EXPECT_LT(std::abs(m.mean), 3.0 * std::sqrt(var / n));
    EXPECT_LT(std::abs(m.var - var), 3.0 * std::sqrt(2 * var * var / n));
  }
}

TEST(SampleNoiseTest, SameSeedSameDraws) {
  const Shape s{2, 1, 9, 7};
  EXPECT_EQ(sample_noise(NoiseModel::laplace(5), s, 3), sample_noise(NoiseModel::laplace(5), s, 3));
  EXPECT_FALSE(sample_noise(NoiseModel::laplace(5), s, 3) ==
               sample_noise(NoiseModel::laplace(5), s, 4));
}

TEST(SampleNoiseTest, RejectsNonPositiveScale) {
  EXPECT_THROW(NoiseModel::laplace(0.0), ConfigError);
  EXPECT_THROW(NoiseModel::gaussian(-1.0), ConfigError);
  EXPECT_THROW(NoiseModel::from_name("uniform", 1.0), ConfigError);
}

TEST(PdfTest, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(pdf(NoiseModel::laplace(5), 0.0), 0.1);
  EXPECT_NEAR(pdf(NoiseModel::gaussian(10), 0.0), 0.039894, 1e-6);
  EXPECT_DOUBLE_EQ(pdf(NoiseModel::gaussian(10), 0.0), 1.0 / (10.0 * std::sqrt(2 * std::numbers::pi)));
}

TEST(PdfTest, Symmetric) {
  for (const NoiseModel& m : {NoiseModel::laplace(7.5), NoiseModel::gaussian(15)}) {
    for (double v : {0.1, 1.0, 3.7, 12.5, 40.0}) EXPECT_EQ(pdf(m, v), pdf(m, -v));
  }
}

TEST(PdfTest, TrapezoidIntegratesToOne) {
  // Wider scales leave tail mass beyond +-200 (e^-8 for b=25).
  for (const NoiseModel& m : {NoiseModel::laplace(5), NoiseModel::laplace(12.5),
                              NoiseModel::gaussian(10), NoiseModel::gaussian(25)}) {
    const double lo = -200, hi = 200, h = 1e-3;
    const auto steps = static_cast<long>((hi - lo) / h);
    double sum = 0.5 * (pdf(m, lo) + pdf(m, hi));
    for (long i = 1; i < steps; ++i) sum += pdf(m, lo + h * static_cast<double>(i));
    EXPECT_NEAR(sum * h, 1.0, 1e-6) << m.name() << " " << m.scale;
  }
}

TEST(AddNoiseTest, GaussianSigma25OnMidGray) {
  const Tensor clean(Shape{1, 1, 256, 256}, 0.5);
  const double p = psnr(add_noise(clean, NoiseModel::gaussian(25), 5), clean);
  EXPECT_NEAR(p, 10 * std::log10(255.0 * 255.0 / 625.0), 0.5);  // 20.17 dB
}

TEST(AddNoiseTest, LaplaceB25OnMidGray) {
  const Tensor clean(Shape{1, 1, 256, 256}, 0.5);
  const double p = psnr(add_noise(clean, NoiseModel::laplace(25), 6), clean);
  EXPECT_NEAR(p, 10 * std::log10(255.0 * 255.0 / 1250.0), 0.6);  // 17.16 dB
}

TEST(AddNoiseTest, TinyScaleIsIdentity) {
  const Tensor clean = to_tensor(synth_thermal_scene(32, 24, 1));
  const Tensor y = add_noise(clean, NoiseModel::laplace(1e-9), 7);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], clean[i], 1e-9);
}

TEST(AddNoiseTest, OutputStaysInUnitRange) {
  const Tensor clean(Shape{1, 1, 64, 64}, 0.98);
  const Tensor y = add_noise(clean, NoiseModel::laplace(50), 8);
  for (double v : y.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(AddNoiseTest, RejectsOutOfRangeInput) {
  EXPECT_THROW(add_noise(Tensor(Shape{1, 1, 2, 2}, 1.5), NoiseModel::laplace(5), 1), DataError);
}

TEST(HistogramTest, ConstantImageFillsCentralBin) {
  const NoiseHistogram h = extract_noise_histogram(Tensor(Shape{1, 1, 20, 30}, 0.4));
  EXPECT_EQ(h.total, 600u);
  EXPECT_EQ(h.counts[40], 600u);
  EXPECT_EQ(h.bin_center(40), 0.0);
  const NoiseHistogram m = extract_noise_histogram(Tensor(Shape{1, 1, 5, 5}, 0.4), Smoother::kMedian);
  EXPECT_EQ(m.counts[40], 25u);
}

TEST(HistogramTest, CountsSumToTotalAndNormalise) {
  const Tensor noisy = add_noise(Tensor(Shape{1, 1, 64, 64}, 0.5), NoiseModel::laplace(12.5), 3);
  const NoiseHistogram h = extract_noise_histogram(noisy);
  std::uint64_t sum = 0;
  for (auto c : h.counts) sum += c;
  EXPECT_EQ(sum, h.total);
  EXPECT_EQ(h.total + h.outside, 64u * 64u);
  double p = 0.0;
  for (double v : h.probabilities()) p += v;
  EXPECT_NEAR(p, 1.0, 1e-12);
}

TEST(HistogramTest, BinEdges) {
  NoiseHistogram h;
  h.add(-40.5);  // first bin, inclusive lower edge
  h.add(40.49);
  h.add(40.5);   // outside
  h.add(-0.4);
  EXPECT_EQ(h.counts.front(), 1u);
  EXPECT_EQ(h.counts.back(), 1u);
  EXPECT_EQ(h.counts[40], 1u);
  EXPECT_EQ(h.outside, 1u);
  EXPECT_EQ(h.total, 3u);
}

TEST(HistogramTest, CsvHasOneRowPerBin) {
  std::ostringstream out;
  write_histogram_csv(extract_noise_histogram(Tensor(Shape{1, 1, 4, 4}, 0.5)), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "bin_center,probability");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, NoiseHistogram::kBins);
}

TEST(NoiseFitTest, ExactMlEstimatesOnKnownSamples) {
  const NoiseFit f = fit_noise({1.0, -3.0, 2.0, -2.0});
  EXPECT_DOUBLE_EQ(f.laplace_b, 2.0);
  EXPECT_DOUBLE_EQ(f.gaussian_sigma, std::sqrt(18.0 / 4.0));
  // Closed form: -n log(2b) - sum|r| / b.
  EXPECT_NEAR(f.laplace_loglik, -4 * std::log(4.0) - 4.0, 1e-12);
}

TEST(NoiseFitTest, ExtractorRecoversLaplaceScaleOnFlatImage) {
  for (double b : {5.0, 12.5}) {
    const Tensor noisy = add_noise(Tensor(Shape{1, 1, 256, 256}, 0.5), NoiseModel::laplace(b), 9);
    const NoiseFit f = fit_noise(extract_residuals(noisy, Smoother::kGaussianBlur));
    EXPECT_NEAR(f.laplace_b / b, 1.0, 0.15) << "b=" << b;
    EXPECT_GT(f.laplace_loglik, f.gaussian_loglik);
  }
}

TEST(NoiseFitTest, GaussianNoisePrefersGaussian) {
  const Tensor noisy = add_noise(Tensor(Shape{1, 1, 256, 256}, 0.5), NoiseModel::gaussian(10), 10);
  const NoiseFit f = fit_noise(extract_residuals(noisy, Smoother::kGaussianBlur));
  EXPECT_GT(f.gaussian_loglik, f.laplace_loglik);
}

}  // namespace
}  // namespace dnirb
