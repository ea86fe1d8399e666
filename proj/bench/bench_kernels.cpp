// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "kbcd/distsim.hpp"
#include "kbcd/kernels.hpp"
#include "kbcd/linalg.hpp"
#include "kbcd/random.hpp"

namespace {

kbcd::Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  kbcd::Stream rng(seed);
  kbcd::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

const kbcd::KernelSpec rbf{kbcd::KernelFamily::rbf, 4.0};

void BM_KernelBlock(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(n, 32, 1);
  const auto cols = kbcd::IndexSet::range(0, 64, n);
  for (auto _ : state) benchmark::DoNotOptimize(kbcd::kernel_block(x, cols, rbf));
}

void BM_KernelBlockSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(n, 32, 1);
  const auto cols = kbcd::IndexSet::range(0, 64, n);
  for (auto _ : state) benchmark::DoNotOptimize(kbcd::kernel_block_serial(x, cols, rbf));
}

kbcd::FeatureMapSpec features() {
  kbcd::FeatureMapSpec f;
  f.p = 1024;
  f.bandwidth = 4.0;
  f.master_seed = 7;
  return f;
}

void BM_RandomFeatures(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(n, 32, 2);
  const auto cols = kbcd::IndexSet::range(0, 64, 1024);
  for (auto _ : state) benchmark::DoNotOptimize(kbcd::random_features_block(x, cols, features()));
}

void BM_RandomFeaturesSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(n, 32, 2);
  const auto cols = kbcd::IndexSet::range(0, 64, 1024);
  for (auto _ : state)
    benchmark::DoNotOptimize(kbcd::random_features_block_serial(x, cols, features()));
}

void BM_Gram(benchmark::State& state) {
  const auto zb = gaussian(static_cast<std::size_t>(state.range(0)), 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kbcd::gram(zb));
}

void BM_GramSerial(benchmark::State& state) {
  const auto zb = gaussian(static_cast<std::size_t>(state.range(0)), 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kbcd::gram_serial(zb));
}

void BM_DistributedGram(benchmark::State& state) {
  const auto zb = gaussian(8192, 64, 4);
  const kbcd::Partition part(zb.rows(), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kbcd::distributed_gram(zb, part, nullptr));
}

}  // namespace

BENCHMARK(BM_KernelBlock)->Arg(2048)->Arg(8192);
BENCHMARK(BM_KernelBlockSerial)->Arg(2048)->Arg(8192);
BENCHMARK(BM_RandomFeatures)->Arg(2048)->Arg(8192);
BENCHMARK(BM_RandomFeaturesSerial)->Arg(2048)->Arg(8192);
BENCHMARK(BM_Gram)->Arg(2048)->Arg(8192);
BENCHMARK(BM_GramSerial)->Arg(2048)->Arg(8192);
BENCHMARK(BM_DistributedGram)->Arg(1)->Arg(4)->Arg(16);

BENCHMARK_MAIN();
