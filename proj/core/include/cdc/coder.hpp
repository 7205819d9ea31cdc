// SPDX-License-Identifier: Apache-2.0
//
// Coded devices over a concat-merged partition plan.
//
// A coded device g covers a set of base devices and holds the elementwise sum
// of their weight (and bias) blocks, zero-padded to the tallest member. Its
// output is the sum of the members' outputs, so any single missing member is
// coded - sum(received). Several overlapping groups are decoded by peeling.
//
// All partials handled here are affine, pre-activation values.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cdc/splitter.hpp"
#include "cdc/weight_store.hpp"

namespace cdc {

using Group = std::vector<std::size_t>;

template <typename T>
struct CodedDevice {
  std::size_t index = 0;              // group index; device n + index in the extended space
  Group covers;                       // sorted base device indices
  std::vector<std::size_t> member_rows;  // unpadded block rows, parallel to covers
  DeviceTask<T> task;
};

template <typename T>
struct CodedPlan {
  PartitionPlan base;  // activation moved to the merge point
  std::vector<CodedDevice<T>> coded;
  // base device -> indices of the coded devices covering it
  std::vector<std::vector<std::size_t>> recovery;

  std::vector<Group> groups() const;
  std::size_t total_devices() const noexcept { return base.n + coded.size(); }
};

// Same plan with activation deferred to the merge point, as coded stages need.
PartitionPlan coded_base_plan(const PartitionPlan& plan);

// Single group {0..n-1} for r=1; for r=2 the first and last ceil(n/2)+1
// devices (overlapping in the middle).
std::vector<Group> default_groups(std::size_t n, std::size_t r);

template <typename T>
CodedPlan<T> encode(const PartitionPlan& plan, const LayerWeights<T>& weights, const std::vector<Group>& groups);

// Uses the layer weights from the store; a coded block already stored for
// (layer, group) must equal the freshly computed sum.
template <typename T>
CodedPlan<T> encode(const PartitionPlan& plan, const WeightStore<T>& weights, const std::vector<Group>& groups);

// Writes the plan's coded blocks into the store under (layer id, group).
template <typename T>
void store_coded_blocks(const CodedPlan<T>& plan, WeightStore<T>& weights);

template <typename T>
struct Recovered {
  std::size_t device = 0;
  std::size_t via = 0;  // coded device index
  Matrix<T> partial;
  std::uint64_t subtractions = 0;  // element-wise operations performed
  std::uint64_t additions = 0;
};

// coded - sum(received members). Exactly one member of the group must be
// absent from `received`.
template <typename T>
Recovered<T> decode_single(const CodedDevice<T>& coded, const Matrix<T>& coded_partial,
                           const std::map<std::size_t, Matrix<T>>& received);

template <typename T>
struct PeelResult {
  bool complete = false;
  std::map<std::size_t, Matrix<T>> partials;  // base device -> partial
  std::vector<Recovered<T>> recovered;        // in decode order
  std::vector<std::size_t> unrecoverable;
};

template <typename T>
PeelResult<T> peel_decode(const CodedPlan<T>& plan, const std::map<std::size_t, Matrix<T>>& received_base,
                          const std::map<std::size_t, Matrix<T>>& received_coded);

// Structure-only peeling: which base devices stay unknown given the sets of
// present base and coded devices. Empty result means decodable.
std::vector<std::size_t> peel_unrecoverable(std::size_t n, const std::vector<Group>& groups,
                                            const std::vector<bool>& base_present,
                                            const std::vector<bool>& coded_present);

struct DecodabilityRow {
  std::size_t failures = 0;
  std::uint64_t total = 0;
  std::uint64_t recoverable = 0;
  double fraction = 0.0;
};

struct DecodabilityReport {
  std::size_t n = 0;
  std::vector<Group> groups;
  std::vector<DecodabilityRow> rows;  // failures = 0..max
};

inline constexpr std::uint64_t kDefaultPatternCap = 1'000'000;

// Every failure pattern over the n + |groups| devices of each size up to
// max_failures, peeled. Throws ExplosionGuard past `cap` patterns.
DecodabilityReport decodability(std::size_t n, const std::vector<Group>& groups, std::size_t max_failures,
                                std::uint64_t cap = kDefaultPatternCap);

// (n + groups) / n.
double hardware_cost(std::size_t n, std::size_t groups);

void validate_groups(std::size_t n, const std::vector<Group>& groups);

}  // namespace cdc
