#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "dnirb/errors.hpp"
#include "dnirb/eval.hpp"
#include "dnirb/trainer.hpp"
#include "test_util.hpp"

namespace dnirb {
namespace {

using testing::random_tensor;

TEST(PsnrTest, IdenticalImagesAreInfinite) {
  const Tensor a = random_tensor(Shape{1, 1, 8, 8}, 1, 0.0, 1.0);
  EXPECT_EQ(psnr(a, a), kInfinitePsnr);
  EXPECT_EQ(format_psnr(psnr(a, a)), "inf");
}

TEST(PsnrTest, UniformErrorOfOneLevel) {
  const Tensor a(Shape{1, 1, 10, 10}, 0.5);
  const Tensor b(Shape{1, 1, 10, 10}, 0.5 + 1.0 / 255.0);
  EXPECT_NEAR(psnr(a, b), 48.1308, 1e-4);
  EXPECT_NEAR(psnr(a, b), 20 * std::log10(255.0), 1e-9);
}

TEST(PsnrTest, SymmetricAndShapeChecked) {
  const Tensor a = random_tensor(Shape{1, 1, 8, 8}, 2, 0.0, 1.0);
  const Tensor b = random_tensor(Shape{1, 1, 8, 8}, 3, 0.0, 1.0);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_THROW(psnr(a, Tensor(Shape{1, 1, 8, 9})), ShapeError);
}

TEST(PsnrTest, DecreasesAlongVarianceLadder) {
  const Tensor clean(Shape{1, 1, 128, 128}, 0.5);
  double prev = kInfinitePsnr;
  for (double sigma : {1.0, 2.0, 5.0, 10.0, 20.0, 40.0}) {
    const double p = psnr(add_noise(clean, NoiseModel::gaussian(sigma), 4), clean);
    EXPECT_LT(p, prev) << sigma;
    prev = p;
  }
}

TEST(NoiseSweepTest, ZeroNetworkLeavesPsnrUnchanged) {
  const std::vector<Tensor> clean{to_tensor(synth_thermal_scene(32, 24, 1)),
                                  to_tensor(synth_thermal_scene(32, 24, 2))};
  const std::vector<NoiseModel> models{NoiseModel::laplace(5), NoiseModel::laplace(7.5),
                                       NoiseModel::laplace(12.5), NoiseModel::laplace(25)};
  const EvalReport r = run_noise_sweep(NetworkParams(NetworkConfig{1, false}), clean, models, 3);
  ASSERT_EQ(r.noise_rows.size(), 4u);
  for (const NoiseSweepRow& row : r.noise_rows) EXPECT_EQ(row.denoised_psnr, row.noisy_psnr);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(r.noise_rows[i].noisy_psnr, r.noise_rows[i - 1].noisy_psnr);
}

TEST(NoiseSweepTest, DeterministicRows) {
  const std::vector<Tensor> clean{to_tensor(synth_thermal_scene(24, 24, 5))};
  const std::vector<NoiseModel> models{NoiseModel::gaussian(10)};
  const NetworkParams net = init_params(NetworkConfig{1, false}, 2);
  const EvalReport a = run_noise_sweep(net, clean, models, 7), b = run_noise_sweep(net, clean, models, 7);
  EXPECT_EQ(a.noise_rows[0].denoised_psnr, b.noise_rows[0].denoised_psnr);
  EXPECT_EQ(a.noise_rows[0].noisy_psnr, b.noise_rows[0].noisy_psnr);
}

TEST(NoiseSweepTest, NoisyColumnMatchesAnalyticPostClipFormula) {
  // E[v_eff^2] computed from the clipped noise actually applied.
  const std::vector<Tensor> clean{to_tensor(synth_thermal_scene(128, 96, 6))};
  for (const NoiseModel& m : {NoiseModel::laplace(25), NoiseModel::gaussian(25)}) {
    const std::vector<NoiseModel> models{m};
    const EvalReport r = run_noise_sweep(NetworkParams(NetworkConfig{1, false}), clean, models, 1);
    EXPECT_NEAR(r.noise_rows[0].noisy_psnr, 10 * std::log10(255.0 * 255.0 / m.variance()), 0.6);
  }
}

TEST(NoiseSweepTest, RejectsEmptyImageSet) {
  const std::vector<NoiseModel> models{NoiseModel::laplace(5)};
  EXPECT_THROW(run_noise_sweep(NetworkParams(NetworkConfig{1, false}), {}, models, 1), ConfigError);
}

TEST(TimingTest, MedianIsPositiveAndFinite) {
  const NetworkParams net = init_params(NetworkConfig{1, false}, 1);
  const Tensor img(Shape{1, 1, 32, 32}, 0.5);
  const double t = time_inference(net, img, 3);
  EXPECT_GT(t, 0.0);
  EXPECT_TRUE(std::isfinite(t));
  EXPECT_THROW(time_inference(net, img, 2), ConfigError);
}

TEST(TimingTest, DoublingAreaRoughlyDoublesTime) {
  const NetworkParams net = init_params(NetworkConfig{2, false}, 1);
  const double small = time_inference(net, Tensor(Shape{1, 1, 120, 160}, 0.5), 5);
  const double large = time_inference(net, Tensor(Shape{1, 1, 240, 160}, 0.5), 5);
  EXPECT_GE(large / small, 1.6);
  EXPECT_LE(large / small, 2.6);
}

TEST(TimingTest, MoreBlocksTakeLonger) {
  // Interleaved rounds so that load drift on a shared machine hits every
  // block count alike; the median per-round ratio is compared.
  const Tensor img(Shape{1, 1, 120, 160}, 0.5);
  const NetworkParams n2 = init_params(NetworkConfig{2, false}, 1);
  const NetworkParams n4 = init_params(NetworkConfig{4, false}, 1);
  const NetworkParams n8 = init_params(NetworkConfig{8, false}, 1);
  std::vector<double> r42, r84;
  for (int round = 0; round < 9; ++round) {
    const double t2 = time_inference(n2, img, 3);
    const double t4 = time_inference(n4, img, 3);
    const double t8 = time_inference(n8, img, 3);
    r42.push_back(t4 / t2);
    r84.push_back(t8 / t4);
  }
  std::sort(r42.begin(), r42.end());
  std::sort(r84.begin(), r84.end());
  EXPECT_GT(r42[4], 1.0);
  EXPECT_GE(r84[4], 1.5);
  EXPECT_LE(r84[4], 2.5);
}

TEST(BlockSweepTest, TrainsOneNetworkPerBlockCount) {
  const auto patches = extract_patches(synth_thermal_scene(48, 48, 3), PatchSpec{16, 16});
  const auto pairs = make_training_pairs(patches, NoiseModel::laplace(12.5), 1);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.steps = 2;
  const std::vector<std::size_t> blocks{1, 2};
  const std::vector<Tensor> clean{to_tensor(synth_thermal_scene(24, 24, 9))};
  const EvalReport r = run_block_sweep(blocks, pairs, cfg, clean, NoiseModel::laplace(12.5), 1);
  ASSERT_EQ(r.block_rows.size(), 2u);
  EXPECT_EQ(r.block_rows[0].blocks, 1u);
  EXPECT_EQ(r.block_rows[1].blocks, 2u);
  EXPECT_EQ(r.block_rows[0].noisy_psnr, r.block_rows[1].noisy_psnr);
  for (const auto& row : r.block_rows) EXPECT_GT(row.seconds, 0.0);
}

TEST(ReportTest, CsvAndTable) {
  EvalReport r;
  r.noise_rows.push_back({NoiseModel::laplace(5), 34.2, kInfinitePsnr});
  r.block_rows.push_back({2, 30.0, 23.0, 0.75});
  r.metadata["seed"] = "3";
  std::ostringstream csv, table;
  write_eval_csv(r, csv);
  write_eval_table(r, table);
  EXPECT_NE(csv.str().find("inf"), std::string::npos);
  EXPECT_NE(csv.str().find("laplace"), std::string::npos);
  EXPECT_NE(table.str().find("b = 5"), std::string::npos);
  EXPECT_NE(table.str().find("inf"), std::string::npos);
}

TEST(ReportTest, TripletFilesAreWritten) {
  const auto dir = std::filesystem::temp_directory_path() / "dnirb_triplet_test";
  std::filesystem::create_directories(dir);
  const Tensor noisy = random_tensor(Shape{1, 1, 8, 8}, 1, 0.0, 1.0);
  write_triplet(noisy, noisy, dir, "img");
  for (const char* s : {"img_noisy.pgm", "img_denoised.pgm", "img_residual.pgm"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / s)) << s;
  }
  const GrayImage residual = load_image(dir / "img_residual.pgm");
  EXPECT_EQ(residual.at(3, 3), 128);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace dnirb
