// SPDX-License-Identifier: Apache-2.0
//
// Stage completion under the coordinator's waiting policies.
//
// Devices are indexed in the stage's extended space: base devices 0..n-1,
// then coded device g at n + g. An arrival time of nullopt means the partial
// never arrives.
//
//   WaitAll              all base partials; after the detection latency
//                        (from the first arrival) decode with what is there
//   DecodeAsap           the first instant the arrived set peels to every
//                        base partial
//   ThresholdThenDecode  all base partials within T of the first arrival,
//                        otherwise decode at first + T
//
// With nothing decodable at the deadline the stage times out there.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "cdc/coder.hpp"

namespace cdc {

enum class Policy : std::uint8_t { WaitAll, DecodeAsap, ThresholdThenDecode };

std::string_view to_string(Policy policy);
Policy parse_policy(std::string_view text);

inline constexpr double kDefaultDetectionMs = 10'000.0;

struct CollectParams {
  Policy policy = Policy::DecodeAsap;
  double threshold_ms = 0.0;
  double detection_ms = kDefaultDetectionMs;
  double stage_start_ms = 0.0;
};

struct StageOutcome {
  bool complete = false;
  double done_ms = 0.0;  // completion, or the give-up instant when !complete
  std::vector<bool> used;            // arrived by done_ms, extended index
  std::vector<std::size_t> late;     // arrived after done_ms
  std::vector<std::size_t> missing;  // base devices absent at done_ms
  std::vector<std::size_t> unrecoverable;
};

StageOutcome collect_stage(std::size_t n, const std::vector<Group>& groups,
                           const std::vector<std::optional<double>>& arrivals, const CollectParams& params);

template <typename T>
struct CollectedPartials {
  std::vector<std::optional<Matrix<T>>> partials;  // base devices, all present
  std::vector<Recovered<T>> recovered;
};

// Decodes the missing base partials of a completed stage from the partials
// that arrived in time (extended index -> partial).
template <typename T>
CollectedPartials<T> finish_stage(std::size_t n, const CodedPlan<T>* coded, const StageOutcome& outcome,
                                  const std::map<std::size_t, Matrix<T>>& arrived);

}  // namespace cdc
