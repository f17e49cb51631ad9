#include <benchmark/benchmark.h>

#include "hfadapt/adam.hpp"
#include "hfadapt/graph.hpp"
#include "hfadapt/losses.hpp"
#include "hfadapt/metrics.hpp"
#include "hfadapt/models.hpp"
#include "hfadapt/ops.hpp"
#include "hfadapt/pretrain.hpp"
#include "hfadapt/rng.hpp"

using namespace hfadapt;

namespace {

Tensor uniform(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return t;
}

ArchitectureConfig arch_at(std::size_t resolution) {
  ArchitectureConfig a;
  a.resolution = resolution;
  return a;
}

}  // namespace

// Forward and backward of one 4x4 stride-2 convolution, the encoder's shape.
static void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const Tensor x = uniform({10, 16, size, size}, 1);
  const Tensor w = uniform({32, 16, 4, 4}, 2);
  for (auto _ : state) {
    Graph g;
    Var xv = g.constant(x);
    Var wv = g.variable(w);
    Var y = conv2d(xv, wv, std::nullopt, {2, 1});
    g.backward(mean(y));
    benchmark::DoNotOptimize(g.grad(wv));
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// Inference over a batch of 10 at the desk-scale architecture.
static void BM_GeneratorForward(benchmark::State& state) {
  const ArchitectureConfig a = arch_at(static_cast<std::size_t>(state.range(0)));
  const ModelParameters g = build_generator(a, 1);
  const Tensor z = uniform({10, 1, a.resolution, a.resolution}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(generate(g, a, z));
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_GeneratorForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// One alternating critic + generator update on a batch of 10.
static void BM_PretrainStep(benchmark::State& state) {
  const ArchitectureConfig a = arch_at(static_cast<std::size_t>(state.range(0)));
  ModelParameters gen = build_generator(a, 1);
  ModelParameters critic = build_critic(a, 2);
  AdamState g_opt{AdamConfig{}}, d_opt{AdamConfig{}};
  const Tensor z = uniform({10, 1, a.resolution, a.resolution}, 4);
  const Tensor x = uniform({10, 1, a.resolution, a.resolution}, 5);
  std::uint64_t step = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pretrain_step(gen, critic, g_opt, d_opt, a, z, x, 100.0f, ++step));
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_PretrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_Psnr(benchmark::State& state) {
  const Tensor a = uniform({1, 64, 64}, 6);
  const Tensor b = uniform({1, 64, 64}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(psnr(a, b));
}
BENCHMARK(BM_Psnr);

static void BM_Ssim(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const Tensor a = uniform({1, size, size}, 8);
  const Tensor b = uniform({1, size, size}, 9);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(32)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
