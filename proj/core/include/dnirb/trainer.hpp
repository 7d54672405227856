#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dnirb/dataset.hpp"
#include "dnirb/network.hpp"

namespace dnirb {

enum class OptimizerKind { kAdam, kSgd };

/// How the 1/n of the residual loss is read: per sample (squared error
/// summed over each sample's pixels, averaged over the batch) or per pixel.
enum class LossNormalization { kPerSample, kPerPixel };

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t steps = 1000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  LossNormalization normalization = LossNormalization::kPerSample;
  /// Report rows are emitted every `log_interval` steps.
  std::size_t log_interval = 10;
  /// Validation PSNR is computed on report rows when a validation set is
  /// given and this is non-zero (every `validation_interval` steps).
  std::size_t validation_interval = 0;
  /// When non-zero, the current parameters are written to
  /// `checkpoint_path` every `checkpoint_interval` steps.
  std::size_t checkpoint_interval = 0;
  std::filesystem::path checkpoint_path;
  /// Worker threads per step. Results are bit-reproducible for a fixed
  /// thread count.
  std::size_t threads = 1;

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

/// (1/n) sum_i ||pred_i - target_i||^2 over the n batch items and its
/// gradient 2 (pred - target) / n. Per-pixel normalisation additionally
/// divides by the pixels per sample.
LossResult residual_loss(const Tensor& pred, const Tensor& target,
                         LossNormalization norm = LossNormalization::kPerSample);

struct TrainRow {
  std::size_t step = 0;       // 1-based step index at the end of the interval
  double loss = 0.0;          // mean batch loss over the interval
  double val_psnr = 0.0;      // NaN when not measured
  double ms_per_step = 0.0;
};

struct TrainReport {
  std::vector<double> step_losses;  // batch loss before each update
  std::vector<TrainRow> rows;
};

struct TrainResult {
  NetworkParams params;
  TrainReport report;
};

/// Loss and accumulated gradients for one batch.
double batch_gradients(const NetworkParams& params, const Tensor& noisy,
                       const Tensor& target, LossNormalization norm,
                       NetworkParams& grads);

using TrainProgress = std::function<void(const TrainRow&)>;

/// Mini-batch minimisation of the residual loss. Batches are drawn from a
/// per-epoch shuffle seeded from config.seed.
TrainResult train(NetworkParams params, const PairSource& pairs, const TrainConfig& config,
                  const PairSource& validation = {}, const TrainProgress& progress = {});
TrainResult train(NetworkParams params, std::span<const TrainingPair> pairs,
                  const TrainConfig& config,
                  std::span<const TrainingPair> validation = {},
                  const TrainProgress& progress = {});

void write_train_report_csv(const TrainReport& report, std::ostream& out);

}  // namespace dnirb
