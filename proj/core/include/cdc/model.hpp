// SPDX-License-Identifier: Apache-2.0
//
// Layer/model descriptions and the single-device reference executor.
//
// Activations flow between layers as Tensor3 values. A fully-connected layer
// consumes its input flattened in Tensor3 order and produces a 1 x 1 x m
// tensor, so conv -> fc chains need no explicit reshape layer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cdc/matrix.hpp"

namespace cdc {

enum class PoolKind : std::uint8_t { Max, Avg };

struct FcParams {
  std::size_t inputs = 1;   // k
  std::size_t outputs = 1;  // m
  friend bool operator==(const FcParams&, const FcParams&) = default;
};

struct ConvParams {
  ConvGeometry geometry;
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct PoolParams {
  std::size_t window = 2;
  std::size_t stride = 2;
  PoolKind kind = PoolKind::Max;
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

struct Shape {
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t c = 1;
  std::size_t elements() const noexcept { return h * w * c; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct LayerSpec {
  std::uint32_t id = 0;
  std::variant<FcParams, ConvParams, PoolParams> kind;
  ActivationKind activation = ActivationKind::Identity;
  bool has_bias = false;

  bool is_fc() const noexcept { return std::holds_alternative<FcParams>(kind); }
  bool is_conv() const noexcept { return std::holds_alternative<ConvParams>(kind); }
  bool is_pool() const noexcept { return std::holds_alternative<PoolParams>(kind); }
  bool has_weights() const noexcept { return !is_pool(); }
  const FcParams& fc() const { return std::get<FcParams>(kind); }
  const ConvParams& conv() const { return std::get<ConvParams>(kind); }
  const PoolParams& pool() const { return std::get<PoolParams>(kind); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<Shape> input_shapes;   // per layer, derived
  std::vector<Shape> output_shapes;  // per layer, derived

  std::size_t index_of(std::uint32_t layer_id) const;
  const LayerSpec& layer(std::uint32_t layer_id) const { return layers[index_of(layer_id)]; }
  Shape input_shape() const { return input_shapes.front(); }
  Shape output_shape() const { return output_shapes.back(); }
};

// Fills input/output shapes and checks adjacent layers agree. Throws
// ShapeMismatch naming the first offending layer. A pool layer cannot be
// first (its input shape is inherited).
void derive_shapes(ModelSpec& model, std::optional<Shape> first_input = std::nullopt);

// Parses the JSON model descriptor:
//   {"name": ..., "layers": [{"id", "kind": "fc"|"conv"|"pool", ...}]}
// fc: inputs, outputs; conv: input [h,w,c] (required on the first layer),
// filter, stride, padding, filters; pool: window, stride, mode max|avg.
// Common: activation identity|relu, bias true|false.
ModelSpec load_model(std::string_view json_text);
ModelSpec load_model_file(const std::filesystem::path& path);
std::string model_to_json(const ModelSpec& model);

Shape layer_output_shape(const LayerSpec& layer, const Shape& input);

template <typename T>
Tensor3<T> pool_forward(const Tensor3<T>& input, const PoolParams& pool);

template <typename T>
struct WeightStore;

// One layer on one device. Pool layers ignore `weights`.
template <typename T>
Tensor3<T> layer_forward(const LayerSpec& layer, const WeightStore<T>& weights, const Tensor3<T>& input);

// Whole model on one device; the oracle every distributed run is checked against.
template <typename T>
std::vector<T> reference_forward(const ModelSpec& model, const WeightStore<T>& weights,
                                 const Tensor3<T>& input);

template <typename T>
std::vector<T> reference_forward(const ModelSpec& model, const WeightStore<T>& weights,
                                 std::span<const T> input);

std::string_view to_string(ActivationKind act);
ActivationKind parse_activation(std::string_view text);

}  // namespace cdc
