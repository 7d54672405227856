#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dnirb/dataset.hpp"
#include "dnirb/network.hpp"
#include "dnirb/noise.hpp"

namespace dnirb {

struct TrainConfig;

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double mse(const Tensor& a, const Tensor& b);

/// 10 log10(1 / MSE) on [0, 1] data; +infinity for identical inputs.
double psnr(const Tensor& a, const Tensor& b);

struct NoiseSweepRow {
  NoiseModel model;
  double noisy_psnr = 0.0;     // mean over images
  double denoised_psnr = 0.0;  // mean over images
};

struct BlockSweepRow {
  std::size_t blocks = 0;
  double psnr = 0.0;           // mean denoised PSNR
  double noisy_psnr = 0.0;
  double seconds = 0.0;        // median single-image inference time
};

struct EvalReport {
  std::vector<NoiseSweepRow> noise_rows;
  std::vector<BlockSweepRow> block_rows;
  std::map<std::string, std::string> metadata;
};

/// The corrupted copy of image `index` that the sweeps evaluate.
Tensor sweep_noisy_image(const Tensor& clean, const NoiseModel& model, std::uint64_t seed,
                         std::size_t index);

/// For each noise model: corrupt every image (seeded per image, so all
/// settings share the same underlying draws), denoise, and average PSNRs.
EvalReport run_noise_sweep(const NetworkParams& params, std::span<const Tensor> clean,
                           std::span<const NoiseModel> models, std::uint64_t seed);

/// Evaluates already-trained networks (one per block count) on `clean`
/// corrupted by `model`, timing inference on the first image.
EvalReport run_block_sweep(std::span<const NetworkParams> networks,
                           std::span<const Tensor> clean, const NoiseModel& model,
                           std::uint64_t seed, std::size_t timing_repetitions = 3);

/// Trains one network per block count from the same seed and pair set,
/// then evaluates as above.
EvalReport run_block_sweep(std::span<const std::size_t> block_counts,
                           std::span<const TrainingPair> pairs, const TrainConfig& config,
                           std::span<const Tensor> clean, const NoiseModel& model,
                           std::uint64_t seed, std::size_t timing_repetitions = 3);

/// Median wall-clock seconds of denoise() on one image over `repetitions`
/// runs, after one untimed warm-up.
double time_inference(const NetworkParams& params, const Tensor& image,
                      std::size_t repetitions);

std::string format_psnr(double db);

void write_eval_csv(const EvalReport& report, std::ostream& out);
void write_eval_table(const EvalReport& report, std::ostream& out);

/// Writes <stem>_noisy, <stem>_denoised and <stem>_residual images (residual
/// shown as 0.5 + (noisy - denoised)) with the given extension.
void write_triplet(const Tensor& noisy, const Tensor& denoised,
                   const std::filesystem::path& dir, const std::string& stem,
                   const std::string& extension = ".pgm");

}  // namespace dnirb
