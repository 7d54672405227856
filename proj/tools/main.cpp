#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "dnirb/checkpoint.hpp"
#include "dnirb/dataset.hpp"
#include "dnirb/errors.hpp"
#include "dnirb/eval.hpp"
#include "dnirb/gradcheck.hpp"
#include "dnirb/image.hpp"
#include "dnirb/noise.hpp"
#include "dnirb/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace dnirb;
using cli::KeyValues;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDataError = 3,
  kNumericAbort = 4,
  kCheckpointIncompatible = 5,
};

std::size_t default_threads() {
  const char* env = std::getenv("DNIRB_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) {
    throw ConfigError(std::string("DNIRB_THREADS must be a positive integer, got '") + env + "'");
  }
  return v;
}

bool has_image_extension(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".png" || ext == ".pgm";
}

// Output path for input `in` when several inputs go to one place.
fs::path output_for(const fs::path& in, const fs::path& out, std::size_t inputs) {
  if (inputs == 1 && has_image_extension(out)) return out;
  return out / in.filename();
}

std::vector<GrayImage> load_images(const std::vector<fs::path>& paths) {
  std::vector<GrayImage> images;
  images.reserve(paths.size());
  for (const fs::path& p : paths) images.push_back(load_image(p));
  return images;
}

std::vector<Tensor> to_tensors(const std::vector<GrayImage>& images) {
  std::vector<Tensor> out;
  out.reserve(images.size());
  for (const GrayImage& g : images) out.push_back(to_tensor(g));
  return out;
}

AugmentationSet augmentation_from_name(const std::string& name) {
  if (name == "none") return AugmentationSet::none();
  if (name == "dihedral") return AugmentationSet::dihedral();
  return AugmentationSet{};
}

std::string fixed(double v, int digits = 2) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

const CLI::Validator kPositiveInt(
    [](std::string& s) -> std::string {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(s, &used);
      } catch (const std::exception&) {
        return "expected an integer, got '" + s + "'";
      }
      if (used != s.size()) return "expected an integer, got '" + s + "'";
      return v >= 1 ? "" : "value " + s + " out of range: must be >= 1";
    },
    "INT>=1");

const CLI::Validator kPositiveReal(
    [](std::string& s) -> std::string {
      double v = 0.0;
      try {
        v = std::stod(s);
      } catch (const std::exception&) {
        return "expected a number, got '" + s + "'";
      }
      return v > 0.0 && std::isfinite(v) ? "" : "value " + s + " out of range: must be > 0";
    },
    ">0");

// ---------------------------------------------------------------- add-noise

struct AddNoiseArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string model = "laplace";
  double scale = 0.0;
  std::uint64_t seed = 0;
};

int cmd_add_noise(const CLI::App& sub, const AddNoiseArgs& a) {
  const NoiseModel model = NoiseModel::from_name(a.model, a.scale);
  const fs::path out = a.out;
  if (a.inputs.size() > 1 || !has_image_extension(out)) fs::create_directories(out);
  double total = 0.0;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const GrayImage img = load_image(a.inputs[i]);
    const Tensor clean = to_tensor(img);
    const Tensor noisy = add_noise(clean, model, derive_seed(a.seed, i));
    const GrayImage result = from_tensor(noisy);
    const fs::path dest = output_for(a.inputs[i], out, a.inputs.size());
    save_image(result, dest);
    // PSNR of the stored 8-bit image, as a reader of the file would measure it.
    const double p = psnr(to_tensor(result), clean);
    total += p;
    std::cout << dest.string() << "  noisy PSNR " << fixed(p) << " dB\n";
  }
  if (a.inputs.size() > 1) {
    std::cout << "mean noisy PSNR " << fixed(total / static_cast<double>(a.inputs.size()))
              << " dB over " << a.inputs.size() << " images\n";
  }
  cli::write_run_manifest(sub, out);
  return kOk;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string val_data;
  std::size_t blocks = 0;
  bool branch_relu = false;
  std::string noise_model = "laplace";
  double scale = 0.0;
  std::size_t steps = 1000;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::string loss_norm = "sample";
  std::size_t patch_size = 40;
  std::size_t stride = 14;
  std::string augment = "full";
  std::uint64_t seed = 0;
  std::size_t log_interval = 10;
  std::size_t checkpoint_interval = 0;
  std::size_t threads = 1;
  std::string out;
  std::string report;
  bool quiet = false;
};

int cmd_train(const CLI::App& sub, const TrainArgs& a) {
  const NoiseModel model = NoiseModel::from_name(a.noise_model, a.scale);
  NetworkConfig net_cfg;
  net_cfg.blocks = a.blocks;
  net_cfg.branch_output_relu = a.branch_relu;

  const std::vector<fs::path> paths = read_dataset_manifest(a.data);
  if (paths.empty()) throw DataError("dataset manifest lists no images: " + a.data);
  const std::vector<GrayImage> images = load_images(paths);
  const PatchSpec spec{a.patch_size, a.stride};
  const AugmentationSet aug = augmentation_from_name(a.augment);
  std::vector<GrayImage> patches = extract_augmented(images, spec, aug);
  if (patches.empty()) throw DataError("no training patches: images are smaller than the patch");
  const std::size_t patch_count = patches.size();
  const PairSource pairs = PairSource::lazy(std::move(patches), model, derive_seed(a.seed, 0));

  PairSource validation;
  std::vector<TrainingPair> val_pairs;
  if (!a.val_data.empty()) {
    const std::vector<Tensor> val = to_tensors(load_images(read_dataset_manifest(a.val_data)));
    val_pairs = make_training_pairs(val, model, derive_seed(a.seed, 1));
    validation = PairSource::view(val_pairs);
  }

  TrainConfig cfg;
  cfg.batch_size = a.batch_size;
  cfg.steps = a.steps;
  cfg.learning_rate = a.lr;
  cfg.seed = derive_seed(a.seed, 2);
  cfg.optimizer = a.optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
  cfg.normalization =
      a.loss_norm == "pixel" ? LossNormalization::kPerPixel : LossNormalization::kPerSample;
  cfg.log_interval = a.log_interval;
  cfg.validation_interval = validation.empty() ? 0 : a.log_interval;
  cfg.threads = a.threads;
  const fs::path out = a.out;
  const fs::path partial = fs::path(a.out + ".partial");
  if (a.checkpoint_interval > 0) {
    cfg.checkpoint_interval = a.checkpoint_interval;
    cfg.checkpoint_path = partial;
  }
  cfg.validate();

  if (!a.quiet) {
    std::cout << "training N=" << a.blocks << " on " << images.size() << " images, "
              << patch_count << " patches, " << model.name() << " scale " << a.scale << "\n";
  }
  TrainResult result{NetworkParams(net_cfg), {}};
  try {
    result = train(init_params(net_cfg, derive_seed(a.seed, 3)), pairs, cfg, validation,
                   [&](const TrainRow& row) {
                     if (a.quiet) return;
                     std::cout << "step " << row.step << "  loss " << row.loss;
                     if (!std::isnan(row.val_psnr)) std::cout << "  val PSNR " << fixed(row.val_psnr);
                     std::cout << "  " << fixed(row.ms_per_step, 1) << " ms/step\n";
                   });
  } catch (const NumericError&) {
    std::error_code ec;
    fs::remove(partial, ec);
    throw;
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(result.params, out);
  std::error_code ec;
  fs::remove(partial, ec);

  const fs::path report = a.report.empty() ? fs::path(a.out + ".train.csv") : fs::path(a.report);
  std::ofstream csv(report);
  if (!csv) throw DataError("cannot write training report: " + report.string());
  write_train_report_csv(result.report, csv);
  cli::write_run_manifest(sub, out, {{"report", report.string()}});
  const CheckpointInfo info = read_checkpoint_info(out);
  std::cout << "wrote " << out.string() << " (" << info.parameter_count() << " parameters, crc32 "
            << std::hex << std::setw(8) << std::setfill('0') << info.checksum << std::dec
            << ")\n";
  return kOk;
}

// --------------------------------------------------------------------- init

struct InitArgs {
  std::size_t blocks = 0;
  bool branch_relu = false;
  bool zero = false;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_init(const CLI::App& sub, const InitArgs& a) {
  NetworkConfig cfg;
  cfg.blocks = a.blocks;
  cfg.branch_output_relu = a.branch_relu;
  const NetworkParams params = a.zero ? NetworkParams(cfg) : init_params(cfg, derive_seed(a.seed, 3));
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(params, out);
  cli::write_run_manifest(sub, out);
  std::cout << "wrote " << out.string() << " (" << params.param_count() << " parameters)\n";
  return kOk;
}

// ------------------------------------------------------------------ denoise

struct DenoiseArgs {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string out;
  std::size_t blocks = 0;
  std::string triplets;
};

std::optional<NetworkConfig> expected_config(std::size_t blocks, const std::string& ckpt) {
  if (blocks == 0) return std::nullopt;
  NetworkConfig cfg = read_checkpoint_info(ckpt).config;
  cfg.blocks = blocks;
  return cfg;
}

int cmd_denoise(const CLI::App& sub, const DenoiseArgs& a) {
  const NetworkParams params = load_checkpoint(a.checkpoint, expected_config(a.blocks, a.checkpoint));
  const fs::path out = a.out;
  if (a.inputs.size() > 1 || !has_image_extension(out)) fs::create_directories(out);
  for (const std::string& in : a.inputs) {
    const Tensor noisy = to_tensor(load_image(in));
    const Tensor clean = denoise(noisy, params);
    const fs::path dest = output_for(in, out, a.inputs.size());
    save_image(from_tensor(clean), dest);
    if (!a.triplets.empty()) {
      write_triplet(noisy, clean, a.triplets, fs::path(in).stem().string(),
                    fs::path(in).extension().string());
    }
    std::cout << in << " -> " << dest.string() << "\n";
  }
  cli::write_run_manifest(sub, out);
  return kOk;
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string data;
  std::string sweep;
  std::vector<double> scales;
  std::string noise_model = "laplace";
  double scale = 12.5;
  std::size_t blocks = 0;
  std::uint64_t seed = 0;
  std::size_t timing_reps = 3;
  std::string out;
  std::string triplets;
};

int cmd_eval(const CLI::App& sub, EvalArgs a) {
  const std::vector<fs::path> paths = read_dataset_manifest(a.data);
  if (paths.empty()) throw DataError("dataset manifest lists no images: " + a.data);
  const std::vector<Tensor> clean = to_tensors(load_images(paths));

  EvalReport report;
  KeyValues resolved;
  if (a.sweep == "blocks") {
    std::vector<NetworkParams> nets;
    for (const std::string& c : a.checkpoints) nets.push_back(load_checkpoint(c));
    const NoiseModel model = NoiseModel::from_name(a.noise_model, a.scale);
    report = run_block_sweep(nets, clean, model, a.seed, a.timing_reps);
  } else {
    if (a.checkpoints.size() != 1) {
      throw ConfigError("--sweep " + a.sweep + " takes exactly one --checkpoint");
    }
    const NetworkParams params =
        load_checkpoint(a.checkpoints[0], expected_config(a.blocks, a.checkpoints[0]));
    if (a.scales.empty()) {
      a.scales = a.sweep == "laplace" ? std::vector<double>{5, 7.5, 12.5, 25}
                                      : std::vector<double>{10, 15, 25, 50};
    }
    std::vector<NoiseModel> models;
    for (double s : a.scales) models.push_back(NoiseModel::from_name(a.sweep, s));
    report = run_noise_sweep(params, clean, models, a.seed);
    for (double s : a.scales) resolved.emplace_back("scales", format_psnr(s));
    if (!a.triplets.empty()) {
      for (const NoiseModel& m : models) {
        for (std::size_t i = 0; i < clean.size(); ++i) {
          const Tensor noisy = sweep_noisy_image(clean[i], m, a.seed, i);
          write_triplet(noisy, denoise(noisy, params), a.triplets,
                        paths[i].stem().string() + "_" + m.name() + format_psnr(m.scale),
                        paths[i].extension().string());
        }
      }
    }
  }
  for (const std::string& c : a.checkpoints) {
    report.metadata["checkpoint"] += (report.metadata["checkpoint"].empty() ? "" : ";") + c;
  }
  report.metadata["dataset"] = a.data;

  write_eval_table(report, std::cout);
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out);
  if (!csv) throw DataError("cannot write eval report: " + out.string());
  write_eval_csv(report, csv);
  cli::write_run_manifest(sub, out, resolved);
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::size_t seeds = 20;
  std::size_t samples = 50;
  double tolerance = 1e-5;
  std::string out;
};

int cmd_gradcheck(const CLI::App& sub, const GradcheckArgs& a) {
  std::vector<std::uint64_t> seeds(a.seeds);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i + 1;
  GradCheckOptions opt;
  opt.samples = a.samples;
  opt.tolerance = a.tolerance;
  const std::vector<GradCheckCase> cases = run_gradcheck_suite(seeds, opt);

  std::map<std::string, GradCheckCase> worst;
  bool ok = true;
  for (const GradCheckCase& c : cases) {
    ok = ok && c.passed;
    auto it = worst.find(c.name);
    if (it == worst.end() || c.max_rel_error > it->second.max_rel_error || !c.passed) {
      worst[c.name] = c;
    }
  }
  for (const auto& [name, c] : worst) {
    std::cout << std::left << std::setw(28) << name << " max rel error " << std::scientific
              << std::setprecision(2) << c.max_rel_error << std::defaultfloat
              << (c.passed ? "  ok" : "  FAILED") << "\n";
  }
  std::cout << cases.size() << " cases, " << (ok ? "all passed" : "FAILURES") << "\n";
  if (!a.out.empty()) {
    std::ofstream csv(a.out);
    if (!csv) throw DataError("cannot write gradcheck report: " + a.out);
    csv << "case,seed,checked,skipped_kinks,max_rel_error,passed\n";
    for (const GradCheckCase& c : cases) {
      csv << c.name << ',' << c.seed << ',' << c.checked << ',' << c.skipped_kinks << ','
          << std::setprecision(6) << c.max_rel_error << ',' << (c.passed ? 1 : 0) << '\n';
    }
    cli::write_run_manifest(sub, a.out);
  }
  return ok ? kOk : kFailure;
}

// -------------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  std::size_t count = 20;
  std::size_t width = 128;
  std::size_t height = 128;
  std::string format = "pgm";
  std::uint64_t seed = 0;
};

int cmd_synth(const CLI::App& sub, const SynthArgs& a) {
  const fs::path dir = a.out;
  fs::create_directories(dir);
  std::ofstream list(dir / "images.txt");
  for (std::size_t i = 0; i < a.count; ++i) {
    std::ostringstream name;
    name << "scene_" << std::setw(3) << std::setfill('0') << i << '.' << a.format;
    save_image(synth_thermal_scene(a.width, a.height, derive_seed(a.seed, i)), dir / name.str());
    list << name.str() << '\n';
  }
  std::cout << "wrote " << a.count << " images and " << (dir / "images.txt").string() << "\n";
  cli::write_run_manifest(sub, dir);
  return kOk;
}

// -------------------------------------------------------------------- stats

struct StatsArgs {
  std::string data;
  std::size_t patch_size = 40;
  std::size_t stride = 14;
  std::string augment = "full";
};

int cmd_stats(const StatsArgs& a) {
  const std::vector<GrayImage> images = load_images(read_dataset_manifest(a.data));
  const AugmentationSet aug = augmentation_from_name(a.augment);
  const PatchStats s = patch_stats(images, PatchSpec{a.patch_size, a.stride}, aug);
  std::cout << "images            " << s.images << "\n"
            << "base patches      " << s.base_patches << "\n"
            << "augmented patches " << s.augmented_patches << "\n";
  return kOk;
}

// ---------------------------------------------------------------- histogram

struct HistogramArgs {
  std::vector<std::string> inputs;
  std::string smoother = "gaussian";
  std::string out;
};

int cmd_histogram(const CLI::App& sub, const HistogramArgs& a) {
  const Smoother sm = a.smoother == "median" ? Smoother::kMedian : Smoother::kGaussianBlur;
  std::vector<double> residuals;
  for (const std::string& in : a.inputs) {
    const std::vector<double> r = extract_residuals(to_tensor(load_image(in)), sm);
    residuals.insert(residuals.end(), r.begin(), r.end());
  }
  const NoiseHistogram hist = histogram_of(residuals);
  const NoiseFit fit = fit_noise(residuals);
  std::cout << "residuals " << residuals.size() << " (" << hist.outside
            << " outside [-40, 40])\n"
            << "laplace  b     = " << fixed(fit.laplace_b, 3)
            << "  log-likelihood " << fixed(fit.laplace_loglik, 1) << "\n"
            << "gaussian sigma = " << fixed(fit.gaussian_sigma, 3)
            << "  log-likelihood " << fixed(fit.gaussian_loglik, 1) << "\n"
            << "better fit: " << (fit.laplace_loglik > fit.gaussian_loglik ? "laplace" : "gaussian")
            << "\n";
  if (!a.out.empty()) {
    std::ofstream csv(a.out);
    if (!csv) throw DataError("cannot write histogram: " + a.out);
    write_histogram_csv(hist, csv);
    cli::write_run_manifest(sub, a.out);
  }
  return kOk;
}

// --------------------------------------------------------------------- main

int dispatch(CLI::App& app, const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const std::string& s : args) argv.push_back(s.c_str());
  app.parse(static_cast<int>(argv.size()), argv.data());
  return 0;
}

int run(std::vector<std::string> args) {
  CLI::App app{"Thermal image denoising with repeatable inception-residual blocks", "dnirb"};
  app.set_version_flag("--version", cli::kToolVersion);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.option_defaults()->always_capture_default();

  const std::size_t env_threads = default_threads();
  std::string config;
  auto add_config = [&](CLI::App* s) {
    s->add_option("--config", config, "key=value file; command-line flags take precedence")
        ->check(CLI::ExistingFile);
  };

  AddNoiseArgs noise;
  CLI::App* add_noise_cmd = app.add_subcommand("add-noise", "Corrupt images with synthetic noise");
  add_noise_cmd->add_option("--in", noise.inputs, "Input image(s)")->required()->check(CLI::ExistingFile);
  add_noise_cmd->add_option("--out", noise.out, "Output image, or directory for several inputs")->required();
  add_noise_cmd->add_option("--model", noise.model, "Noise model")->check(CLI::IsMember({"laplace", "gaussian"}));
  add_noise_cmd->add_option("--scale", noise.scale, "Laplace b or Gaussian sigma, 8-bit units")
      ->required()->check(kPositiveReal);
  add_noise_cmd->add_option("--seed", noise.seed, "Random seed");
  add_config(add_noise_cmd);

  TrainArgs tr;
  tr.threads = env_threads;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a denoising network");
  train_cmd->add_option("--data", tr.data, "Dataset manifest (one image path per line)")
      ->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--val-data", tr.val_data, "Validation dataset manifest")->check(CLI::ExistingFile);
  train_cmd->add_option("--blocks", tr.blocks, "Number of DnIRB blocks")->required()->check(kPositiveInt);
  train_cmd->add_flag("--branch-relu", tr.branch_relu, "ReLU on the last conv of each branch");
  train_cmd->add_option("--noise-model", tr.noise_model, "Noise model")->check(CLI::IsMember({"laplace", "gaussian"}));
  train_cmd->add_option("--scale", tr.scale, "Noise scale, 8-bit units")->required()->check(kPositiveReal);
  train_cmd->add_option("--steps", tr.steps, "Optimizer steps");
  train_cmd->add_option("--batch-size", tr.batch_size, "Patches per step")->check(kPositiveInt);
  train_cmd->add_option("--lr", tr.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--optimizer", tr.optimizer, "Optimizer")->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--loss-norm", tr.loss_norm, "Loss normalisation")->check(CLI::IsMember({"sample", "pixel"}));
  train_cmd->add_option("--patch-size", tr.patch_size, "Patch side length")->check(kPositiveInt);
  train_cmd->add_option("--stride", tr.stride, "Patch stride")->check(kPositiveInt);
  train_cmd->add_option("--augment", tr.augment, "Augmentation set")
      ->check(CLI::IsMember({"full", "dihedral", "none"}));
  train_cmd->add_option("--seed", tr.seed, "Random seed");
  train_cmd->add_option("--log-interval", tr.log_interval, "Steps per report row")->check(kPositiveInt);
  train_cmd->add_option("--checkpoint-interval", tr.checkpoint_interval,
                        "Write <out>.partial every N steps (0: never)");
  train_cmd->add_option("--threads", tr.threads, "Worker threads (default: DNIRB_THREADS or 1)")
      ->check(kPositiveInt);
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--report", tr.report, "Training report CSV (default <out>.train.csv)");
  train_cmd->add_flag("--quiet", tr.quiet, "Suppress progress output");
  add_config(train_cmd);

  InitArgs in;
  CLI::App* init_cmd = app.add_subcommand("init", "Write an untrained checkpoint");
  init_cmd->add_option("--blocks", in.blocks, "Number of DnIRB blocks")->required()->check(kPositiveInt);
  init_cmd->add_flag("--branch-relu", in.branch_relu, "ReLU on the last conv of each branch");
  init_cmd->add_flag("--zero", in.zero, "All parameters zero (denoising is the identity)");
  init_cmd->add_option("--seed", in.seed, "Random seed (same derivation as train)");
  init_cmd->add_option("--out", in.out, "Checkpoint path")->required();
  add_config(init_cmd);

  DenoiseArgs dn;
  CLI::App* denoise_cmd = app.add_subcommand("denoise", "Denoise images with a trained checkpoint");
  denoise_cmd->add_option("--checkpoint", dn.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--in", dn.inputs, "Noisy image(s)")->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--out", dn.out, "Output image, or directory for several inputs")->required();
  denoise_cmd->add_option("--blocks", dn.blocks, "Expected block count (0: accept any)");
  denoise_cmd->add_option("--triplets", dn.triplets, "Directory for noisy/denoised/residual images");
  add_config(denoise_cmd);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR sweeps over noise scales or block counts");
  eval_cmd->add_option("--checkpoint", ev.checkpoints, "Checkpoint (one per block count for --sweep blocks)")
      ->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Manifest of clean evaluation images")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--sweep", ev.sweep, "Sweep kind")->required()
      ->check(CLI::IsMember({"laplace", "gaussian", "blocks"}));
  eval_cmd->add_option("--scales", ev.scales, "Noise scales for laplace/gaussian sweeps")
      ->delimiter(',')->check(kPositiveReal);
  eval_cmd->add_option("--noise-model", ev.noise_model, "Noise model for --sweep blocks")
      ->check(CLI::IsMember({"laplace", "gaussian"}));
  eval_cmd->add_option("--scale", ev.scale, "Noise scale for --sweep blocks")->check(kPositiveReal);
  eval_cmd->add_option("--blocks", ev.blocks, "Expected block count (0: accept any)");
  eval_cmd->add_option("--seed", ev.seed, "Noise seed");
  eval_cmd->add_option("--timing-reps", ev.timing_reps, "Timed inference runs per network (median)")
      ->check(CLI::Range(3, 1000));
  eval_cmd->add_option("--out", ev.out, "Report CSV")->required();
  eval_cmd->add_option("--triplets", ev.triplets, "Directory for noisy/denoised/residual images");
  add_config(eval_cmd);

  GradcheckArgs gc;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--seeds", gc.seeds, "Number of seeds")->check(kPositiveInt);
  grad_cmd->add_option("--samples", gc.samples, "Sampled coordinates per case")->check(kPositiveInt);
  grad_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error")->check(kPositiveReal);
  grad_cmd->add_option("--out", gc.out, "Per-case CSV report");
  add_config(grad_cmd);

  SynthArgs sy;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write synthetic thermal-like scenes");
  synth_cmd->add_option("--out", sy.out, "Output directory")->required();
  synth_cmd->add_option("--count", sy.count, "Number of images")->check(kPositiveInt);
  synth_cmd->add_option("--width", sy.width, "Width")->check(kPositiveInt);
  synth_cmd->add_option("--height", sy.height, "Height")->check(kPositiveInt);
  synth_cmd->add_option("--format", sy.format, "Image format")->check(CLI::IsMember({"pgm", "png"}));
  synth_cmd->add_option("--seed", sy.seed, "Random seed");
  add_config(synth_cmd);

  StatsArgs st;
  CLI::App* stats_cmd = app.add_subcommand("stats", "Count training patches for a dataset");
  stats_cmd->add_option("--data", st.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--patch-size", st.patch_size, "Patch side length")->check(kPositiveInt);
  stats_cmd->add_option("--stride", st.stride, "Patch stride")->check(kPositiveInt);
  stats_cmd->add_option("--augment", st.augment, "Augmentation set")
      ->check(CLI::IsMember({"full", "dihedral", "none"}));
  add_config(stats_cmd);

  HistogramArgs hi;
  CLI::App* hist_cmd = app.add_subcommand("histogram", "Extract and fit the noise of images");
  hist_cmd->add_option("--in", hi.inputs, "Noisy image(s)")->required()->check(CLI::ExistingFile);
  hist_cmd->add_option("--smoother", hi.smoother, "Noise extractor smoother")
      ->check(CLI::IsMember({"gaussian", "median"}));
  hist_cmd->add_option("--out", hi.out, "Histogram CSV (bin_center,probability)");
  add_config(hist_cmd);

  std::string manifest;
  CLI::App* rerun_cmd = app.add_subcommand("rerun", "Replay a run from its manifest");
  rerun_cmd->add_option("--manifest", manifest, "Run manifest")->required()->check(CLI::ExistingFile);
  rerun_cmd->allow_extras();

  // Required options have no meaningful default to show.
  for (CLI::App* s : app.get_subcommands({})) {
    for (CLI::Option* o : s->get_options()) {
      if (o->get_required()) o->default_str("");
    }
  }

  // Merge a --config file into the arguments before the real parse.
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i].rfind("-", 0) == 0) continue;
    CLI::App* sub = nullptr;
    try {
      sub = app.get_subcommand(args[i]);
    } catch (const CLI::OptionNotFound&) {
      break;
    }
    for (std::size_t j = i + 1; j < args.size(); ++j) {
      std::string path;
      if (args[j] == "--config" && j + 1 < args.size()) path = args[j + 1];
      if (args[j].rfind("--config=", 0) == 0) path = args[j].substr(9);
      if (!path.empty()) {
        args = cli::apply_config(*sub, args, cli::read_key_values(path));
        break;
      }
    }
    break;
  }

  try {
    dispatch(app, args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*rerun_cmd) {
    const KeyValues kv = cli::read_key_values(manifest);
    std::string subcommand;
    for (const auto& [k, v] : kv) {
      if (k == "subcommand") subcommand = v;
    }
    if (subcommand.empty() || subcommand == "rerun") {
      throw ConfigError("manifest names no replayable subcommand: " + manifest);
    }
    std::vector<std::string> replay{args[0], subcommand, "--config", manifest};
    for (const std::string& extra : rerun_cmd->remaining()) replay.push_back(extra);
    return run(replay);
  }
  if (*add_noise_cmd) return cmd_add_noise(*add_noise_cmd, noise);
  if (*train_cmd) return cmd_train(*train_cmd, tr);
  if (*init_cmd) return cmd_init(*init_cmd, in);
  if (*denoise_cmd) return cmd_denoise(*denoise_cmd, dn);
  if (*eval_cmd) return cmd_eval(*eval_cmd, ev);
  if (*grad_cmd) return cmd_gradcheck(*grad_cmd, gc);
  if (*synth_cmd) return cmd_synth(*synth_cmd, sy);
  if (*stats_cmd) return cmd_stats(st);
  if (*hist_cmd) return cmd_histogram(*hist_cmd, hi);
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(std::vector<std::string>(argv, argv + argc));
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckpointIncompatible;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
