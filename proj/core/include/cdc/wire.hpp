// SPDX-License-Identifier: Apache-2.0
//
// Little-endian message frames:
//
//   "CDC1" | version u16 | type u8 | request_id u64 | layer_id u32 |
//   device_id u32 | payload_len u64 | payload | CRC32(magic..payload)
//
// Matrix payloads are rows u32 | cols u32 | dtype u8 | raw elements.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdc/matrix.hpp"

namespace cdc {

enum class MsgType : std::uint8_t {
  TaskAssign = 0,
  InputBlock = 1,
  PartialOutput = 2,
  CodedOutput = 3,
  Heartbeat = 4,
  FallbackSwitch = 5,
};

std::string_view to_string(MsgType type);

struct Message {
  MsgType type = MsgType::Heartbeat;
  std::uint64_t request_id = 0;
  std::uint32_t layer_id = 0;
  std::uint32_t device_id = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Message&, const Message&) = default;
};

inline constexpr std::array<char, 4> kFrameMagic{'C', 'D', 'C', '1'};
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 4 + 2 + 1 + 8 + 4 + 4 + 8;
inline constexpr std::size_t kFrameTrailerSize = 4;
inline constexpr std::uint64_t kMaxPayload = 1ull << 32;

std::vector<std::uint8_t> encode_frame(const Message& msg);

struct FrameHeader {
  MsgType type;
  std::uint64_t request_id;
  std::uint32_t layer_id;
  std::uint32_t device_id;
  std::uint64_t payload_len;
};

// Checks magic, version and type; throws FormatVersionError/ParseError.
FrameHeader parse_frame_header(std::span<const std::uint8_t> header);

// Decodes one complete frame; trailing bytes are an error. Throws
// ChecksumError on CRC mismatch or truncation.
Message decode_frame(std::span<const std::uint8_t> frame);

// Length of the first complete frame in `bytes`, or nullopt if more bytes
// are needed.
std::optional<std::size_t> frame_length(std::span<const std::uint8_t> bytes);

template <typename T>
std::vector<std::uint8_t> encode_matrix(const Matrix<T>& m);

template <typename T>
Matrix<T> decode_matrix(std::span<const std::uint8_t> payload);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace cdc
