// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "cdc/runtime.hpp"
#include "cdc/wire.hpp"

namespace {

void BM_FrameRoundTrip(benchmark::State& state) {
  cdc::Message m{cdc::MsgType::PartialOutput, 1, 2, 3, std::vector<std::uint8_t>(state.range(0), 0x5a)};
  for (auto _ : state) benchmark::DoNotOptimize(cdc::decode_frame(cdc::encode_frame(m)));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_FrameRoundTrip)->Arg(256)->Arg(16 << 10)->Arg(1 << 20);

// Wall-clock cost of simulating requests, not the simulated latency.
void BM_SimulateRequests(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto model = cdc::load_model(R"({"name": "b", "layers": [
    {"id": 1, "kind": "conv", "input": [16, 16, 3], "filter": 3, "padding": 1, "filters": 8, "activation": "relu"},
    {"id": 2, "kind": "fc", "inputs": 2048, "outputs": 256, "activation": "relu"},
    {"id": 3, "kind": "fc", "inputs": 256, "outputs": 10}]})");
  const auto ws = cdc::random_weights<float>(model, 1);
  const cdc::Tensor3<float> x(16, 16, 3);
  const auto alloc = cdc::uniform_allocation(model, n, true);
  cdc::LatencyModel lat;
  lat.base = cdc::LogNormal{1.0, 1.0};
  cdc::CoordinatorConfig cfg;
  cfg.verify = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdc::run_inference<float>(model, alloc, ws, x, lat, cdc::FailureModel{}, cfg, 10));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 10);
}
BENCHMARK(BM_SimulateRequests)->DenseRange(2, 4);

}  // namespace
