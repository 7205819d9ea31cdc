// SPDX-License-Identifier: Apache-2.0
//
// Per-layer weights and the little-endian "CDCW" weight file.
//
// File layout:
//   magic "CDCW" | version u16 | record count u32 |
//   records: id u32 | dtype u8 (0=f32, 1=f64) | rank u8 | dims u32 x rank |
//            raw data | CRC32 (of id..data)
// A layer contributes a weight record (rank 2 fc m x k, rank 4 conv K,F,F,C)
// and, when it has a bias, a rank-1 record with the same id. Coded blocks use
// id kCodedRecordFlag | group << 20 | layer id.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "cdc/matrix.hpp"
#include "cdc/model.hpp"

namespace cdc {

inline constexpr std::uint16_t kWeightFormatVersion = 1;
inline constexpr std::uint32_t kCodedRecordFlag = 0x8000'0000u;
inline constexpr std::uint32_t kMaxLayerId = (1u << 20) - 1;

template <typename T>
struct LayerWeights {
  std::variant<Matrix<T>, Tensor4<T>> weight;
  std::vector<T> bias;

  const Matrix<T>& matrix() const { return std::get<Matrix<T>>(weight); }
  const Tensor4<T>& filters() const { return std::get<Tensor4<T>>(weight); }
  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

// Offline-summed weight block of one coded device.
template <typename T>
struct CodedBlock {
  Matrix<T> weight;
  std::vector<T> bias;
  friend bool operator==(const CodedBlock&, const CodedBlock&) = default;
};

template <typename T>
struct WeightStore {
  std::map<std::uint32_t, LayerWeights<T>> layers;
  // (layer id, group index) -> block
  std::map<std::pair<std::uint32_t, std::uint32_t>, CodedBlock<T>> coded;

  const LayerWeights<T>& at(std::uint32_t layer_id) const;
  friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

// Checks every weighted layer has an entry of the right shape.
template <typename T>
void validate_weights(const ModelSpec& model, const WeightStore<T>& store);

// Uniform(-scale, scale) weights with a fixed seed; used where no trained
// weights exist (tests, demos, synthetic runs).
template <typename T>
WeightStore<T> random_weights(const ModelSpec& model, std::uint64_t seed, double scale = 0.5);

template <typename T>
std::vector<std::uint8_t> serialize_weights(const WeightStore<T>& store);

template <typename T>
WeightStore<T> deserialize_weights(std::span<const std::uint8_t> bytes);

template <typename T>
void save_weights(const WeightStore<T>& store, const std::filesystem::path& path);

template <typename T>
WeightStore<T> load_weights(const std::filesystem::path& path);

// Element width recorded in a weight file (0=f32, 1=f64); nullopt for a file
// with zero records.
std::optional<std::uint8_t> weight_file_dtype(const std::filesystem::path& path);

template <typename T>
constexpr std::uint8_t dtype_tag() noexcept {
  return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace cdc
