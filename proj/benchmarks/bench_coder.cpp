// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "cdc/coder.hpp"

namespace {

cdc::LayerSpec fc(std::size_t in, std::size_t out) {
  cdc::LayerSpec l;
  l.id = 1;
  l.kind = cdc::FcParams{in, out};
  return l;
}

cdc::WeightStore<float> weights_for(const cdc::LayerSpec& l) {
  cdc::ModelSpec m;
  m.name = "bench";
  m.layers = {l};
  cdc::derive_shapes(m, cdc::Shape{1, 1, l.fc().inputs});
  return cdc::random_weights<float>(m, 1);
}

// Offline cost of building the coded blocks.
void BM_Encode(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto l = fc(1024, 1024);
  const auto ws = weights_for(l);
  const auto plan = cdc::plan_split(l, cdc::SplitMethod::FcOutput, n);
  for (auto _ : state) benchmark::DoNotOptimize(cdc::encode(plan, ws, cdc::default_groups(n, 1)));
}
BENCHMARK(BM_Encode)->DenseRange(2, 8, 2);

// Recovering one lost partial against recomputing it.
void BM_PeelOneLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto l = fc(2048, 2048);
  const auto ws = weights_for(l);
  const auto coded = cdc::encode(cdc::plan_split(l, cdc::SplitMethod::FcOutput, n), ws, cdc::default_groups(n, 1));
  cdc::Tensor3<float> x(1, 1, 2048);
  std::map<std::size_t, cdc::Matrix<float>> base, extra;
  for (std::size_t d = 1; d < n; ++d) {
    const auto t = cdc::extract_device_task(coded.base, ws, d);
    base.emplace(d, cdc::execute_task(t, cdc::select_input(t.selector, x)));
  }
  extra.emplace(0, cdc::execute_task(coded.coded[0].task, x));
  for (auto _ : state) benchmark::DoNotOptimize(cdc::peel_decode(coded, base, extra));
}
BENCHMARK(BM_PeelOneLoss)->DenseRange(2, 8, 2);

void BM_RecomputeOneTask(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto l = fc(2048, 2048);
  const auto ws = weights_for(l);
  const auto plan = cdc::plan_split(l, cdc::SplitMethod::FcOutput, n);
  const auto t = cdc::extract_device_task(plan, ws, 0);
  cdc::Tensor3<float> x(1, 1, 2048);
  const auto in = cdc::select_input(t.selector, x);
  for (auto _ : state) benchmark::DoNotOptimize(cdc::execute_task(t, in));
}
BENCHMARK(BM_RecomputeOneTask)->DenseRange(2, 8, 2);

void BM_Decodability(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cdc::decodability(n, cdc::default_groups(n, 2), 3));
}
BENCHMARK(BM_Decodability)->Arg(4)->Arg(8)->Arg(16);

}  // namespace
