#include <benchmark/benchmark.h>

#include "dnirb/dataset.hpp"
#include "dnirb/network.hpp"
#include "dnirb/ops.hpp"
#include "dnirb/trainer.hpp"

namespace dnirb {
namespace {

Tensor filled(const Shape& s) {
  Tensor t(s);
  double v = 0.0;
  for (double& x : t.data()) x = (v += 0.618034) - static_cast<long>(v);
  return t;
}

// Args: kernel, c_in, c_out, side.
void BM_Conv2dForward(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto c_in = static_cast<std::size_t>(state.range(1));
  const auto c_out = static_cast<std::size_t>(state.range(2));
  const auto side = static_cast<std::size_t>(state.range(3));
  ConvParams p(c_out, c_in, k);
  p.weights = filled(p.weights.shape());
  const Tensor x = filled(Shape{1, c_in, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, p));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(side * side));
}
BENCHMARK(BM_Conv2dForward)
    ->Args({3, 32, 32, 40})
    ->Args({1, 64, 32, 40})
    ->Args({3, 64, 64, 40})
    ->Args({7, 1, 64, 40})
    ->Args({3, 32, 32, 160})
    ->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  ConvParams p(32, 32, 3);
  p.weights = filled(p.weights.shape());
  const Tensor x = filled(Shape{1, 32, side, side});
  const Tensor g = filled(x.shape());
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(x, p, g));
}
BENCHMARK(BM_Conv2dBackward)->Arg(40)->Arg(160)->Unit(benchmark::kMicrosecond);

// Single-image inference on a 160x120 frame by block count.
void BM_Denoise(benchmark::State& state) {
  const auto blocks = static_cast<std::size_t>(state.range(0));
  const NetworkParams net = init_params(NetworkConfig{blocks, false}, 1);
  const Tensor y = to_tensor(synth_thermal_scene(160, 120, 2));
  for (auto _ : state) benchmark::DoNotOptimize(denoise(y, net));
}
BENCHMARK(BM_Denoise)->Arg(2)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

// One forward+backward pass over a batch of 40x40 patches.
void BM_TrainingStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const NetworkParams net = init_params(NetworkConfig{2, false}, 1);
  const Tensor y = filled(Shape{batch, 1, 40, 40});
  const Tensor target = filled(y.shape());
  NetworkParams grads(net.config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_gradients(net, y, target, LossNormalization::kPerSample, grads));
  }
}
BENCHMARK(BM_TrainingStep)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dnirb

BENCHMARK_MAIN();
