// SPDX-License-Identifier: Apache-2.0
//
// Coordinator/worker inference on the virtual-clock transport.
//
// Per request, stage by stage: the coordinator sends each device its input
// slice, workers run their task (compute time = flops x ns/flop, serialized
// per device) and send partials back, the coordinator collects them under
// its policy, decodes what is missing, merges and moves on. A stage that
// cannot complete raises a stage timeout; with a fallback catalog the
// coordinator drops the silent devices, switches allocation and restarts the
// request at the give-up instant.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdc/allocation.hpp"
#include "cdc/coder.hpp"
#include "cdc/collector.hpp"
#include "cdc/latency.hpp"
#include "cdc/model.hpp"
#include "cdc/transport.hpp"
#include "cdc/weight_store.hpp"

namespace cdc {

// A 2048 x 2048 fc layer (2 * 2048^2 flops) takes 50 ms.
inline constexpr double kDefaultNsPerFlop = 50e6 / (2.0 * 2048.0 * 2048.0);

struct CoordinatorConfig {
  Policy policy = Policy::DecodeAsap;
  double threshold_ms = 0.0;
  std::uint64_t seed = 0;
  double detection_ms = kDefaultDetectionMs;
  double ns_per_flop = kDefaultNsPerFlop;
  bool verify = true;
  double tolerance = 0.0;  // 0: 1e-4 for float, 1e-10 for double

  void validate() const;
};

struct DeviceArrival {
  std::uint32_t device = 0;
  bool coded = false;
  std::optional<double> at_ms;
  bool used = false;
  bool late = false;
};

struct StageRecord {
  std::size_t stage = 0;
  std::vector<std::uint32_t> layers;
  double start_ms = 0.0;
  double collected_ms = 0.0;  // policy satisfied (or gave up)
  double done_ms = 0.0;       // after decoding
  bool complete = false;
  std::vector<DeviceArrival> arrivals;
  std::vector<std::uint32_t> decoded;  // roster ids of recovered base devices
  std::uint64_t decode_ops = 0;
};

struct FallbackEvent {
  double at_ms = 0.0;
  std::size_t from_allocation = 0;
  std::size_t to_allocation = 0;
  std::vector<std::uint32_t> suspected;
};

struct RequestRecord {
  std::uint64_t id = 0;
  std::size_t allocation = 0;  // catalog index the request finished on
  double start_ms = 0.0;
  double end_ms = 0.0;
  double latency_ms = 0.0;
  bool completed = false;
  bool output_ok = false;
  double max_rel_error = 0.0;
  std::size_t stage_timeouts = 0;
  std::vector<StageRecord> stages;
  std::vector<FallbackEvent> fallbacks;
};

struct LatencySummary {
  std::size_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

struct RunReport {
  std::string model;
  std::string policy;
  double threshold_ms = 0.0;
  std::uint64_t seed = 0;
  std::string latency;
  std::string failures;
  std::vector<RequestRecord> requests;
  std::size_t stage_timeouts = 0;
  std::size_t lost_requests = 0;
  std::size_t decode_events = 0;
  std::size_t fallback_switches = 0;
  std::size_t late_partials = 0;
  std::size_t output_mismatches = 0;
  std::size_t dropped_messages = 0;
  LatencySummary summary;  // over completed requests
};

LatencySummary summarize(std::span<const double> latencies_ms);
std::vector<double> completed_latencies(const RunReport& report);

// `catalog[0]` is the primary allocation; the rest are fallbacks ordered by
// device count, largest first.
template <typename T>
RunReport run_inference(const ModelSpec& model, std::span<const AllocationFile> catalog,
                        const WeightStore<T>& weights, const Tensor3<T>& input, const LatencyModel& latency,
                        const FailureModel& failures, const CoordinatorConfig& cfg, std::size_t requests);

template <typename T>
RunReport run_inference(const ModelSpec& model, const AllocationFile& alloc, const WeightStore<T>& weights,
                        const Tensor3<T>& input, const LatencyModel& latency, const FailureModel& failures,
                        const CoordinatorConfig& cfg, std::size_t requests) {
  return run_inference<T>(model, std::span<const AllocationFile>(&alloc, 1), weights, input, latency, failures,
                          cfg, requests);
}

// Flop count of running `layer` whole on one device.
std::uint64_t layer_flops(const LayerSpec& layer, const Shape& input);

}  // namespace cdc
