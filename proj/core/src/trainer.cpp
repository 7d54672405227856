#include "dnirb/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "dnirb/checkpoint.hpp"
#include "dnirb/errors.hpp"
#include "dnirb/eval.hpp"

namespace dnirb {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be a finite non-negative number");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer moment coefficients must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("optimizer epsilon must be positive");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
  if (checkpoint_interval > 0 && checkpoint_path.empty()) {
    throw ConfigError("checkpoint_interval set without a checkpoint path");
  }
}

LossResult residual_loss(const Tensor& pred, const Tensor& target,
                         LossNormalization norm) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("residual_loss: prediction " + to_string(pred.shape()) +
                     " vs target " + to_string(target.shape()));
  }
  double denom = static_cast<double>(pred.shape().n);
  if (norm == LossNormalization::kPerPixel) denom *= static_cast<double>(pred.shape().sample());
  LossResult r{0.0, Tensor(pred.shape())};
  auto p = pred.data();
  auto t = target.data();
  auto g = r.grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    r.loss += d * d;
    g[i] = 2.0 * d / denom;
  }
  r.loss /= denom;
  return r;
}

double batch_gradients(const NetworkParams& params, const Tensor& noisy,
                       const Tensor& target, LossNormalization norm,
                       NetworkParams& grads) {
  NetworkActivations acts;
  Tensor pred = network_forward_train(noisy, params, acts);
  LossResult lr = residual_loss(pred, target, norm);
  network_backward(acts, params, lr.grad, grads);
  return lr.loss;
}

namespace {

struct FlatView {
  std::vector<std::span<double>> spans;
};

FlatView flat_view(NetworkParams& p) {
  FlatView v;
  for_each_layer(p, [&](const std::string&, ConvParams& c) {
    v.spans.emplace_back(c.weights.data());
    v.spans.emplace_back(c.bias);
  });
  return v;
}

void add_params(NetworkParams& into, NetworkParams& from) {
  FlatView a = flat_view(into), b = flat_view(from);
  for (std::size_t s = 0; s < a.spans.size(); ++s) {
    for (std::size_t i = 0; i < a.spans[s].size(); ++i) a.spans[s][i] += b.spans[s][i];
  }
}

void zero_params(NetworkParams& p) {
  for (auto& s : flat_view(p).spans) std::fill(s.begin(), s.end(), 0.0);
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const NetworkParams& shape)
      : cfg_(cfg), m_(shape.config), v_(shape.config) {}

  void step(NetworkParams& params, NetworkParams& grads) {
    ++t_;
    FlatView p = flat_view(params), g = flat_view(grads);
    if (cfg_.optimizer == OptimizerKind::kSgd) {
      for (std::size_t s = 0; s < p.spans.size(); ++s) {
        for (std::size_t i = 0; i < p.spans[s].size(); ++i) {
          p.spans[s][i] -= cfg_.learning_rate * g.spans[s][i];
        }
      }
      return;
    }
    FlatView m = flat_view(m_), v = flat_view(v_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t s = 0; s < p.spans.size(); ++s) {
      for (std::size_t i = 0; i < p.spans[s].size(); ++i) {
        const double gi = g.spans[s][i];
        double& mi = m.spans[s][i];
        double& vi = v.spans[s][i];
        mi = cfg_.beta1 * mi + (1.0 - cfg_.beta1) * gi;
        vi = cfg_.beta2 * vi + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = mi / c1;
        const double vhat = vi / c2;
        p.spans[s][i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  NetworkParams m_;
  NetworkParams v_;
  std::uint64_t t_ = 0;
};

// Loss and gradients of one batch, split over `threads` workers. Each
// worker owns a gradient buffer; buffers are summed in worker order.
double parallel_batch(const NetworkParams& params, const Tensor& noisy,
                      const Tensor& target, const TrainConfig& cfg,
                      NetworkParams& grads) {
  const std::size_t n = noisy.shape().n;
  const std::size_t workers = std::min(cfg.threads, n);
  // Per-sample normalisation uses the full batch size, so compute each
  // chunk's gradient of its share of the batch loss.
  const double batch = static_cast<double>(n);
  if (workers <= 1) return batch_gradients(params, noisy, target, cfg.normalization, grads);

  std::vector<NetworkParams> partial(workers, NetworkParams(params.config));
  std::vector<double> losses(workers, 0.0);
  std::vector<std::thread> pool;
  const std::size_t per = (n + workers - 1) / workers;
  std::size_t used = 0;
  for (std::size_t w = 0; w < workers && used < n; ++w) {
    const std::size_t first = used, count = std::min(per, n - used);
    used += count;
    pool.emplace_back([&, w, first, count] {
      Tensor y = slice_batch(noisy, first, count);
      Tensor t = slice_batch(target, first, count);
      const double share = static_cast<double>(count) / batch;
      losses[w] = share * batch_gradients(params, y, t, cfg.normalization, partial[w]);
      for (auto& s : flat_view(partial[w]).spans) {
        for (double& v : s) v *= share;
      }
    });
  }
  for (auto& th : pool) th.join();
  double loss = 0.0;
  for (std::size_t w = 0; w < pool.size(); ++w) {
    add_params(grads, partial[w]);
    loss += losses[w];
  }
  return loss;
}

double validation_psnr(const NetworkParams& params, const PairSource& val) {
  double total = 0.0;
  for (std::size_t i = 0; i < val.size; ++i) {
    const TrainingPair p = val.get(i);
    Tensor clean = p.noisy;
    auto c = clean.data();
    auto t = p.target.data();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= t[i];
    total += psnr(denoise(p.noisy, params), clean);
  }
  return total / static_cast<double>(val.size);
}

}  // namespace

TrainResult train(NetworkParams params, std::span<const TrainingPair> pairs,
                  const TrainConfig& config, std::span<const TrainingPair> validation,
                  const TrainProgress& progress) {
  return train(std::move(params), PairSource::view(pairs), config, PairSource::view(validation),
               progress);
}

TrainResult train(NetworkParams params, const PairSource& pairs, const TrainConfig& config,
                  const PairSource& validation, const TrainProgress& progress) {
  config.validate();
  if (pairs.empty()) throw ConfigError("training needs at least one pair");

  TrainResult result{std::move(params), {}};
  NetworkParams& p = result.params;
  NetworkParams grads(p.config);
  Optimizer opt(config, p);

  std::vector<std::size_t> order(pairs.size);
  std::size_t cursor = order.size();  // forces a shuffle on the first batch
  std::uint64_t epoch = 0;

  double interval_loss = 0.0, interval_ms = 0.0;
  std::size_t interval_steps = 0;
  std::vector<Tensor> ys, ts;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    ys.clear();
    ts.clear();
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(derive_seed(config.seed, epoch++));
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      TrainingPair pair = pairs.get(order[cursor++]);
      ys.push_back(std::move(pair.noisy));
      ts.push_back(std::move(pair.target));
    }
    const Tensor y = stack_batch(ys);
    const Tensor t = stack_batch(ts);

    zero_params(grads);
    const double loss = parallel_batch(p, y, t, config, grads);
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at step " + std::to_string(step + 1),
                         static_cast<std::int64_t>(step + 1));
    }
    opt.step(p, grads);

    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.report.step_losses.push_back(loss);
    interval_loss += loss;
    interval_ms += ms;
    ++interval_steps;

    const std::size_t done = step + 1;
    if (done % config.log_interval == 0 || done == config.steps) {
      TrainRow row;
      row.step = done;
      row.loss = interval_loss / static_cast<double>(interval_steps);
      row.ms_per_step = interval_ms / static_cast<double>(interval_steps);
      row.val_psnr = std::numeric_limits<double>::quiet_NaN();
      if (!validation.empty() && config.validation_interval > 0 &&
          (done % config.validation_interval == 0 || done == config.steps)) {
        row.val_psnr = validation_psnr(p, validation);
      }
      result.report.rows.push_back(row);
      if (progress) progress(row);
      interval_loss = interval_ms = 0.0;
      interval_steps = 0;
    }
    if (config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0) {
      save_checkpoint(p, config.checkpoint_path);
    }
  }
  return result;
}

void write_train_report_csv(const TrainReport& report, std::ostream& out) {
  out << "step,loss,val_psnr,ms_per_step\n";
  for (const TrainRow& r : report.rows) {
    out << r.step << ',' << r.loss << ',';
    if (!std::isnan(r.val_psnr)) out << format_psnr(r.val_psnr);
    out << ',' << r.ms_per_step << '\n';
  }
}

}  // namespace dnirb
