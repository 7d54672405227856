#include "dnirb/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dnirb/errors.hpp"
#include "dnirb/image.hpp"
#include "dnirb/trainer.hpp"

namespace dnirb {

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double acc = 0.0;
  auto pa = a.data();
  auto pb = b.data();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pa.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / m);
}

Tensor sweep_noisy_image(const Tensor& clean, const NoiseModel& model, std::uint64_t seed,
                         std::size_t index) {
  return add_noise(clean, model, derive_seed(seed, index));
}

EvalReport run_noise_sweep(const NetworkParams& params, std::span<const Tensor> clean,
                           std::span<const NoiseModel> models, std::uint64_t seed) {
  if (clean.empty()) throw ConfigError("noise sweep needs at least one image");
  EvalReport report;
  report.metadata["seed"] = std::to_string(seed);
  report.metadata["images"] = std::to_string(clean.size());
  report.metadata["blocks"] = std::to_string(params.config.blocks);
  for (const NoiseModel& model : models) {
    NoiseSweepRow row{model, 0.0, 0.0};
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const Tensor noisy = sweep_noisy_image(clean[i], model, seed, i);
      row.noisy_psnr += psnr(noisy, clean[i]);
      row.denoised_psnr += psnr(denoise(noisy, params), clean[i]);
    }
    row.noisy_psnr /= static_cast<double>(clean.size());
    row.denoised_psnr /= static_cast<double>(clean.size());
    report.noise_rows.push_back(row);
  }
  return report;
}

double time_inference(const NetworkParams& params, const Tensor& image,
                      std::size_t repetitions) {
  if (repetitions < 3) throw ConfigError("time_inference needs at least 3 repetitions");
  Tensor warm = denoise(image, params);
  std::vector<double> seconds;
  seconds.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    Tensor out = denoise(image, params);
    seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (out.shape() != image.shape()) throw ShapeError("inference changed the image shape");
  }
  std::sort(seconds.begin(), seconds.end());
  const std::size_t mid = seconds.size() / 2;
  return seconds.size() % 2 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);
}

EvalReport run_block_sweep(std::span<const NetworkParams> networks,
                           std::span<const Tensor> clean, const NoiseModel& model,
                           std::uint64_t seed, std::size_t timing_repetitions) {
  if (clean.empty()) throw ConfigError("block sweep needs at least one image");
  EvalReport report;
  report.metadata["seed"] = std::to_string(seed);
  report.metadata["noise"] = model.name() + ":" + format_psnr(model.scale);
  for (const NetworkParams& net : networks) {
    BlockSweepRow row;
    row.blocks = net.config.blocks;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const Tensor noisy = sweep_noisy_image(clean[i], model, seed, i);
      row.noisy_psnr += psnr(noisy, clean[i]);
      row.psnr += psnr(denoise(noisy, net), clean[i]);
    }
    row.noisy_psnr /= static_cast<double>(clean.size());
    row.psnr /= static_cast<double>(clean.size());
    row.seconds = time_inference(net, clean.front(), timing_repetitions);
    report.block_rows.push_back(row);
  }
  return report;
}

EvalReport run_block_sweep(std::span<const std::size_t> block_counts,
                           std::span<const TrainingPair> pairs, const TrainConfig& config,
                           std::span<const Tensor> clean, const NoiseModel& model,
                           std::uint64_t seed, std::size_t timing_repetitions) {
  std::vector<NetworkParams> nets;
  for (std::size_t n : block_counts) {
    NetworkConfig cfg;
    cfg.blocks = n;
    nets.push_back(train(init_params(cfg, config.seed), pairs, config).params);
  }
  return run_block_sweep(nets, clean, model, seed, timing_repetitions);
}

std::string format_psnr(double db) {
  if (std::isinf(db) && db > 0) return "inf";
  std::ostringstream os;
  os << std::setprecision(10) << db;
  return os.str();
}

void write_eval_csv(const EvalReport& report, std::ostream& out) {
  if (!report.noise_rows.empty()) {
    out << "noise_model,scale,noisy_psnr,denoised_psnr\n";
    for (const auto& r : report.noise_rows) {
      out << r.model.name() << ',' << format_psnr(r.model.scale) << ','
          << format_psnr(r.noisy_psnr) << ',' << format_psnr(r.denoised_psnr) << '\n';
    }
  }
  if (!report.block_rows.empty()) {
    out << "blocks,noisy_psnr,psnr,seconds\n";
    for (const auto& r : report.block_rows) {
      out << r.blocks << ',' << format_psnr(r.noisy_psnr) << ',' << format_psnr(r.psnr)
          << ',' << std::setprecision(6) << r.seconds << '\n';
    }
  }
}

void write_eval_table(const EvalReport& report, std::ostream& out) {
  auto fixed2 = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };
  if (!report.noise_rows.empty()) {
    out << std::left << std::setw(16) << "Setting" << std::right << std::setw(12)
        << "Noisy (dB)" << std::setw(15) << "Denoised (dB)" << '\n';
    for (const auto& r : report.noise_rows) {
      std::ostringstream setting;
      setting << (r.model.kind == NoiseModel::Kind::kLaplace ? "b = " : "sigma = ")
              << r.model.scale;
      out << std::left << std::setw(16) << setting.str() << std::right << std::setw(12)
          << fixed2(r.noisy_psnr) << std::setw(15) << fixed2(r.denoised_psnr) << '\n';
    }
  }
  if (!report.block_rows.empty()) {
    out << std::left << std::setw(10) << "Blocks" << std::right << std::setw(12)
        << "PSNR (dB)" << std::setw(12) << "Time (s)" << '\n';
    for (const auto& r : report.block_rows) {
      std::ostringstream secs;
      secs << std::fixed << std::setprecision(4) << r.seconds;
      out << std::left << std::setw(10) << r.blocks << std::right << std::setw(12)
          << fixed2(r.psnr) << std::setw(12) << secs.str() << '\n';
    }
  }
}

void write_triplet(const Tensor& noisy, const Tensor& denoised,
                   const std::filesystem::path& dir, const std::string& stem,
                   const std::string& extension) {
  if (noisy.shape() != denoised.shape()) {
    throw ShapeError("write_triplet: noisy and denoised shapes differ");
  }
  std::filesystem::create_directories(dir);
  Tensor residual = noisy;
  auto r = residual.data();
  auto d = denoised.data();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::clamp(0.5 + r[i] - d[i], 0.0, 1.0);
  save_image(from_tensor(noisy), dir / (stem + "_noisy" + extension));
  save_image(from_tensor(denoised), dir / (stem + "_denoised" + extension));
  save_image(from_tensor(residual), dir / (stem + "_residual" + extension));
}

}  // namespace dnirb
