// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "cdc/matrix.hpp"

namespace {

cdc::Matrix<float> filled(std::size_t r, std::size_t c, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> v(r * c);
  for (auto& x : v) x = u(rng);
  return cdc::Matrix<float>(r, c, std::move(v));
}

void BM_GemmSquare(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n, n, 1), b = filled(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(cdc::gemm(a, b));
  state.counters["flops"] =
      benchmark::Counter(static_cast<double>(cdc::gemm_flops(n, n, n)), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_GemmSquare)->RangeMultiplier(2)->Range(32, 512);

// Matrix-vector products: one fc layer on a single input.
void BM_FcLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = filled(n, n, 3), x = filled(n, 1, 4);
  for (auto _ : state) benchmark::DoNotOptimize(cdc::gemm(w, x));
}
BENCHMARK(BM_FcLayer)->RangeMultiplier(2)->Range(256, 4096);

void BM_Im2col(benchmark::State& state) {
  cdc::ConvGeometry g;
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(0));
  g.in_c = 16;
  g.filter = 3;
  g.padding = 1;
  g.filters = 32;
  const auto m = filled(g.in_h * g.in_w, g.in_c, 5);
  const cdc::Tensor3<float> x(g.in_h, g.in_w, g.in_c, m.values());
  for (auto _ : state) benchmark::DoNotOptimize(cdc::im2col(x, g));
}
BENCHMARK(BM_Im2col)->Arg(16)->Arg(32)->Arg(64);

void BM_AddBlocks(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n, 64, 6), b = filled(n, 64, 7);
  for (auto _ : state) benchmark::DoNotOptimize(cdc::add(a, b));
}
BENCHMARK(BM_AddBlocks)->Arg(256)->Arg(1024)->Arg(4096);

}  // namespace
