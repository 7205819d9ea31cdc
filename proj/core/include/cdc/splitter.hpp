// SPDX-License-Identifier: Apache-2.0
//
// Model-parallel splitting of one layer into per-device matrix tasks.
//
//   FcOutput     weight rows split, input broadcast, outputs concatenated
//   FcInput      weight columns + input elements split, partial sums added
//   ConvChannel  filters split, input broadcast, output channels concatenated
//   ConvSpatial  output rows split, input rows (plus halo) split, tiles concatenated
//   ConvFilter   input depth split, partial sums added
//
// Device indices inside a plan are 0..n-1; the allocation layer maps them to
// roster ids.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "cdc/matrix.hpp"
#include "cdc/model.hpp"
#include "cdc/weight_store.hpp"

namespace cdc {

enum class SplitMethod : std::uint8_t { FcOutput, FcInput, ConvChannel, ConvSpatial, ConvFilter };

std::string_view to_string(SplitMethod method);
SplitMethod parse_split_method(std::string_view text);

enum class MergeKind : std::uint8_t { ConcatRows, SumPartials, ConcatChannels, ConcatSpatial };
enum class ActivationPlacement : std::uint8_t { PerDevice, AtMerge };

struct MergeSpec {
  MergeKind kind = MergeKind::ConcatRows;
  ActivationPlacement activation = ActivationPlacement::PerDevice;
  friend bool operator==(const MergeSpec&, const MergeSpec&) = default;
};

struct DeviceBlock {
  std::size_t device = 0;
  // Extent along the split axis: output rows (FcOutput), input elements
  // (FcInput), filters (ConvChannel), output rows (ConvSpatial), input
  // channels (ConvFilter).
  Range split;
  // ConvSpatial only: input rows read, clipped to the input, and the zero
  // rows that stand in for padding above/below them.
  Range input_rows;
  std::size_t pad_top = 0;
  std::size_t pad_bottom = 0;
  friend bool operator==(const DeviceBlock&, const DeviceBlock&) = default;
};

struct PartitionPlan {
  LayerSpec layer;
  SplitMethod method = SplitMethod::FcOutput;
  std::size_t n = 1;
  std::size_t extent = 0;  // length of the split axis
  std::vector<DeviceBlock> blocks;
  MergeSpec merge;
};

struct SelectAll {
  friend bool operator==(const SelectAll&, const SelectAll&) = default;
};
struct SelectRowRange {  // contiguous elements of the flattened input
  Range rows;
  friend bool operator==(const SelectRowRange&, const SelectRowRange&) = default;
};
struct SelectSpatial {  // input rows with halo; the worker re-inserts padding
  Range rows;
  std::size_t pad_top = 0;
  std::size_t pad_bottom = 0;
  std::size_t pad_side = 0;
  friend bool operator==(const SelectSpatial&, const SelectSpatial&) = default;
};
struct SelectDepth {
  Range channels;
  friend bool operator==(const SelectDepth&, const SelectDepth&) = default;
};
using InputSelector = std::variant<SelectAll, SelectRowRange, SelectSpatial, SelectDepth>;

enum class Produces : std::uint8_t { OutputRows, PartialSum, OutputChannels, SpatialTile };

template <typename T>
struct DeviceTask {
  std::size_t device = 0;
  SplitMethod method = SplitMethod::FcOutput;
  Matrix<T> weight;
  std::vector<T> bias;  // empty for sum-merged tasks
  InputSelector selector;
  Produces produces = Produces::OutputRows;
  // Conv tasks: geometry of the GEMM this device runs (sub-input for
  // ConvSpatial/ConvFilter, filter subset for ConvChannel).
  std::optional<ConvGeometry> geometry;
  ActivationKind activation = ActivationKind::Identity;
  bool apply_activation = false;

  std::uint64_t flops() const;
};

struct Suitability {
  bool suitable_for_cdc = false;
  bool divides_input = false;
  bool divides_weight = false;
  bool divides_output = false;
  friend bool operator==(const Suitability&, const Suitability&) = default;
};

// Method compatibility and robustness properties per method.
Suitability suitability(SplitMethod method);

// Balanced contiguous blocks; the first (extent mod n) devices get one extra.
std::vector<Range> balanced_blocks(std::size_t extent, std::size_t n);

PartitionPlan plan_split(const LayerSpec& layer, SplitMethod method, std::size_t n);

template <typename T>
DeviceTask<T> extract_device_task(const PartitionPlan& plan, const LayerWeights<T>& weights, std::size_t device);

template <typename T>
DeviceTask<T> extract_device_task(const PartitionPlan& plan, const WeightStore<T>& weights, std::size_t device) {
  return extract_device_task(plan, weights.at(plan.layer.id), device);
}

// The slice of the layer input a device needs (what would be transmitted).
template <typename T>
Tensor3<T> select_input(const InputSelector& selector, const Tensor3<T>& layer_input);

// Runs one device's GEMM on its input slice; bias is added when the task
// carries one and activation only when apply_activation is set.
template <typename T>
Matrix<T> execute_task(const DeviceTask<T>& task, const Tensor3<T>& input_slice);

// Merges one partial per device (index = device). Sum-merges add `bias`
// and apply `act` after aggregation; concat-merges apply `act` only when the
// plan places activation AtMerge (their bias travels with the blocks).
template <typename T>
Matrix<T> merge(const PartitionPlan& plan, std::span<const std::optional<Matrix<T>>> partials,
                std::span<const T> bias, ActivationKind act);

// Merged matrix (m x 1 or K x HoWo) as the layer's output tensor.
template <typename T>
Tensor3<T> merged_to_tensor(const PartitionPlan& plan, const Matrix<T>& merged);

}  // namespace cdc
