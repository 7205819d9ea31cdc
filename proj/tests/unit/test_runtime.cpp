// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "cdc/analytics.hpp"
#include "cdc/runtime.hpp"
#include "oracles.hpp"

namespace cdc {
namespace {

const char* kModel = R"({"name": "net", "layers": [
  {"id": 1, "kind": "conv", "input": [6, 6, 2], "filter": 3, "padding": 1, "filters": 6, "activation": "relu",
   "bias": true},
  {"id": 2, "kind": "pool", "window": 2},
  {"id": 3, "kind": "fc", "inputs": 54, "outputs": 8, "activation": "relu", "bias": true},
  {"id": 4, "kind": "fc", "inputs": 8, "outputs": 3}]})";

struct Fixture : ::testing::Test {
  ModelSpec model = load_model(kModel);
  WeightStore<double> ws = random_weights<double>(model, 5);
  Tensor3<double> input = [] {
    testing::Rng rng(6);
    return testing::random_tensor<double>(rng, 6, 6, 2);
  }();
  LatencyModel lat = [] {
    LatencyModel l;
    l.base = Deterministic{1.0};
    return l;
  }();
  CoordinatorConfig cfg;
};

using Runtime = Fixture;

TEST_F(Runtime, UncodedMatchesOracle) {
  const auto alloc = uniform_allocation(model, 3, false);
  const auto r = run_inference<double>(model, alloc, ws, input, lat, FailureModel{}, cfg, 4);
  ASSERT_EQ(r.requests.size(), 4u);
  EXPECT_EQ(r.summary.count, 4u);
  EXPECT_EQ(r.output_mismatches, 0u);
  EXPECT_EQ(r.stage_timeouts, 0u);
  for (const auto& q : r.requests) {
    EXPECT_TRUE(q.output_ok);
    EXPECT_LT(q.max_rel_error, 1e-10);
    EXPECT_EQ(q.stages.size(), 3u);
    EXPECT_GE(q.start_ms, 0.0);
    EXPECT_DOUBLE_EQ(q.latency_ms, q.end_ms - q.start_ms);
  }
  // Requests are served back to back.
  EXPECT_DOUBLE_EQ(r.requests[1].start_ms, r.requests[0].end_ms);
}

TEST_F(Runtime, LatencyGrowsWithLinkDelay) {
  const auto alloc = uniform_allocation(model, 2, false);
  const auto fast = run_inference<double>(model, alloc, ws, input, lat, FailureModel{}, cfg, 1);
  LatencyModel slow = lat;
  slow.base = Deterministic{5.0};
  const auto r = run_inference<double>(model, alloc, ws, input, slow, FailureModel{}, cfg, 1);
  // Three stages, two hops each: 6 x 4 ms more.
  EXPECT_NEAR(r.summary.mean - fast.summary.mean, 24.0, 1e-9);
}

TEST_F(Runtime, CodedSurvivesEveryPermanentFailure) {
  const auto alloc = uniform_allocation(model, 3, true);
  for (std::uint32_t dead = 0; dead <= 3; ++dead) {
    const auto f = parse_failures(std::to_string(dead) + ":perm@0");
    const auto r = run_inference<double>(model, alloc, ws, input, lat, f, cfg, 3);
    EXPECT_EQ(r.stage_timeouts, 0u) << dead;
    EXPECT_EQ(r.output_mismatches, 0u) << dead;
    EXPECT_EQ(r.summary.count, 3u);
    // Device 3 is the coded one; a base loss decodes once per stage.
    EXPECT_EQ(r.decode_events, dead < 3 ? 3u * 3u : 0u) << dead;
    for (const auto& q : r.requests) EXPECT_LT(q.max_rel_error, 1e-10);
  }
}

TEST_F(Runtime, DecodeCostIsAddedToStageTime) {
  const auto alloc = uniform_allocation(model, 2, true);
  const auto r = run_inference<double>(model, alloc, ws, input, lat, parse_failures("0:perm@0"), cfg, 1);
  for (const auto& s : r.requests[0].stages) {
    ASSERT_EQ(s.decoded, std::vector<std::uint32_t>{0});
    EXPECT_GT(s.decode_ops, 0u);
    EXPECT_NEAR(s.done_ms - s.collected_ms, static_cast<double>(s.decode_ops) * cfg.ns_per_flop * 1e-6, 1e-9);
  }
}

TEST_F(Runtime, UncodedFailureTimesOutAndIsLost) {
  cfg.detection_ms = 50;
  const auto alloc = uniform_allocation(model, 2, false);
  const auto r = run_inference<double>(model, alloc, ws, input, lat, parse_failures("1:perm@0"), cfg, 2);
  EXPECT_GT(r.stage_timeouts, 0u);
  EXPECT_EQ(r.lost_requests, 2u);
  EXPECT_EQ(r.summary.count, 0u);
}

TEST_F(Runtime, FallbackSwitchesAllocation) {
  cfg.detection_ms = 100;
  const std::vector<AllocationFile> catalog{uniform_allocation(model, 2, false), uniform_allocation(model, 1, false)};
  const auto r = run_inference<double>(model, catalog, ws, input, lat, parse_failures("1:perm@0"), cfg, 3);
  EXPECT_EQ(r.fallback_switches, 1u);
  EXPECT_EQ(r.stage_timeouts, 1u);
  EXPECT_EQ(r.lost_requests, 0u);
  EXPECT_EQ(r.output_mismatches, 0u);
  ASSERT_EQ(r.requests[0].fallbacks.size(), 1u);
  const auto& fb = r.requests[0].fallbacks[0];
  EXPECT_EQ(fb.to_allocation, 1u);
  EXPECT_EQ(fb.suspected, std::vector<std::uint32_t>{1});
  EXPECT_GT(r.requests[0].latency_ms, 100.0);  // includes the detection wait
  EXPECT_EQ(r.requests[1].allocation, 1u);
  EXPECT_TRUE(r.requests[1].fallbacks.empty());
}

TEST_F(Runtime, DownIntervalRecovers) {
  cfg.detection_ms = 20;
  const std::vector<AllocationFile> catalog{uniform_allocation(model, 2, true)};
  const auto r = run_inference<double>(model, catalog, ws, input, lat, parse_failures("0:down@0..15"), cfg, 5);
  EXPECT_EQ(r.stage_timeouts, 0u);
  EXPECT_GT(r.decode_events, 0u);
  EXPECT_EQ(r.requests.back().stages.front().decoded.size(), 0u);
}

TEST_F(Runtime, SameSeedIsDeterministic) {
  LatencyModel ln;
  ln.base = LogNormal{1.0, 0.8};
  cfg.seed = 77;
  const auto alloc = uniform_allocation(model, 3, true);
  const auto f = parse_failures("2:drop@0.3");
  const auto a = run_inference<double>(model, alloc, ws, input, ln, f, cfg, 20);
  const auto b = run_inference<double>(model, alloc, ws, input, ln, f, cfg, 20);
  EXPECT_EQ(to_json(a), to_json(b));
  cfg.seed = 78;
  const auto c = run_inference<double>(model, alloc, ws, input, ln, f, cfg, 20);
  EXPECT_NE(to_json(a), to_json(c));
}

TEST_F(Runtime, CodedDecodeAsapNeverSlowerThanItsOwnWaitAll) {
  LatencyModel ln;
  ln.base = LogNormal{1.0, 1.0};
  const auto alloc = uniform_allocation(model, 3, true);
  cfg.ns_per_flop = 0;  // decoding is free, so the comparison is purely about arrivals
  cfg.policy = Policy::WaitAll;
  const auto slow = run_inference<double>(model, alloc, ws, input, ln, FailureModel{}, cfg, 30);
  cfg.policy = Policy::DecodeAsap;
  const auto fast = run_inference<double>(model, alloc, ws, input, ln, FailureModel{}, cfg, 30);
  // Per-request latency can grow when a straggler's backlog carries into the
  // next request; completion instants cannot.
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_LE(fast.requests[i].end_ms, slow.requests[i].end_ms + 1e-9);
  }
  EXPECT_LT(fast.summary.mean, slow.summary.mean);
}

TEST_F(Runtime, FloatPathAndArguments) {
  const auto wf = random_weights<float>(model, 5);
  testing::Rng rng(6);
  const auto xf = testing::random_tensor<float>(rng, 6, 6, 2);
  const auto alloc = uniform_allocation(model, 2, true);
  const auto r = run_inference<float>(model, alloc, wf, xf, lat, parse_failures("1:perm@0"), cfg, 2);
  EXPECT_EQ(r.output_mismatches, 0u);
  EXPECT_THROW(run_inference<float>(model, alloc, wf, xf, lat, FailureModel{}, cfg, 0), InvalidArgument);
  CoordinatorConfig bad = cfg;
  bad.policy = Policy::ThresholdThenDecode;
  EXPECT_THROW(run_inference<float>(model, alloc, wf, xf, lat, FailureModel{}, bad, 1), InvalidArgument);
}

TEST(RuntimeSummary, NearestRank) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  const auto s = summarize(v);
  EXPECT_EQ(s.count, 5u);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_EQ(s.p50, 3.0);
  EXPECT_EQ(s.p99, 5.0);
  EXPECT_EQ(s.max, 5.0);
  EXPECT_EQ(summarize(std::vector<double>{}).count, 0u);
}

TEST(RuntimeSummary, LayerFlops) {
  LayerSpec fc;
  fc.kind = FcParams{2048, 2048};
  EXPECT_EQ(layer_flops(fc, Shape{1, 1, 2048}), 2ull * 2048 * 2048);
  EXPECT_NEAR(static_cast<double>(layer_flops(fc, Shape{1, 1, 2048})) * kDefaultNsPerFlop * 1e-6, 50.0, 1e-9);
}

}  // namespace
}  // namespace cdc
