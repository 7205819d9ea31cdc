// SPDX-License-Identifier: Apache-2.0

#include "cdc/wire.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

#include "cdc/weight_store.hpp"

namespace cdc {

static_assert(std::endian::native == std::endian::little, "frames are written in host order");

namespace {

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  const auto at = out.size();
  out.resize(at + sizeof(U));
  std::memcpy(out.data() + at, &value, sizeof(U));
}

template <typename U>
U get(std::span<const std::uint8_t> bytes, std::size_t at) {
  U value;
  std::memcpy(&value, bytes.data() + at, sizeof(U));
  return value;
}

}  // namespace

std::string_view to_string(MsgType type) {
  switch (type) {
    case MsgType::TaskAssign: return "TaskAssign";
    case MsgType::InputBlock: return "InputBlock";
    case MsgType::PartialOutput: return "PartialOutput";
    case MsgType::CodedOutput: return "CodedOutput";
    case MsgType::Heartbeat: return "Heartbeat";
    case MsgType::FallbackSwitch: return "FallbackSwitch";
  }
  return "Unknown";
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint8_t> encode_frame(const Message& msg) {
  if (msg.payload.size() > kMaxPayload) throw InvalidArgument("payload too large for one frame");
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + msg.payload.size() + kFrameTrailerSize);
  out.insert(out.end(), kFrameMagic.begin(), kFrameMagic.end());
  put(out, kWireVersion);
  put(out, static_cast<std::uint8_t>(msg.type));
  put(out, msg.request_id);
  put(out, msg.layer_id);
  put(out, msg.device_id);
  put(out, static_cast<std::uint64_t>(msg.payload.size()));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  put(out, crc32_of(out));
  return out;
}

FrameHeader parse_frame_header(std::span<const std::uint8_t> header) {
  if (header.size() < kFrameHeaderSize) throw ChecksumError("frame header truncated");
  if (std::memcmp(header.data(), kFrameMagic.data(), kFrameMagic.size()) != 0) {
    throw FormatVersionError("bad frame magic");
  }
  const auto version = get<std::uint16_t>(header, 4);
  if (version != kWireVersion) throw FormatVersionError("unsupported wire version " + std::to_string(version));
  const auto type = get<std::uint8_t>(header, 6);
  if (type > static_cast<std::uint8_t>(MsgType::FallbackSwitch)) {
    throw ParseError("unknown message type " + std::to_string(type));
  }
  FrameHeader h{static_cast<MsgType>(type), get<std::uint64_t>(header, 7), get<std::uint32_t>(header, 15),
                get<std::uint32_t>(header, 19), get<std::uint64_t>(header, 23)};
  if (h.payload_len > kMaxPayload) throw ParseError("frame payload length out of range");
  return h;
}

std::optional<std::size_t> frame_length(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) return std::nullopt;
  const auto h = parse_frame_header(bytes.first(kFrameHeaderSize));
  const std::size_t total = kFrameHeaderSize + h.payload_len + kFrameTrailerSize;
  if (bytes.size() < total) return std::nullopt;
  return total;
}

Message decode_frame(std::span<const std::uint8_t> frame) {
  const auto h = parse_frame_header(frame);
  const std::size_t total = kFrameHeaderSize + h.payload_len + kFrameTrailerSize;
  if (frame.size() < total) throw ChecksumError("frame truncated");
  if (frame.size() > total) throw ParseError("trailing bytes after frame");
  const auto stored = get<std::uint32_t>(frame, total - kFrameTrailerSize);
  if (crc32_of(frame.first(total - kFrameTrailerSize)) != stored) throw ChecksumError("frame CRC mismatch");
  Message msg{h.type, h.request_id, h.layer_id, h.device_id, {}};
  const auto body = frame.subspan(kFrameHeaderSize, h.payload_len);
  msg.payload.assign(body.begin(), body.end());
  return msg;
}

template <typename T>
std::vector<std::uint8_t> encode_matrix(const Matrix<T>& m) {
  std::vector<std::uint8_t> out;
  out.reserve(9 + m.size() * sizeof(T));
  put(out, static_cast<std::uint32_t>(m.rows()));
  put(out, static_cast<std::uint32_t>(m.cols()));
  put(out, dtype_tag<T>());
  const auto at = out.size();
  out.resize(at + m.size() * sizeof(T));
  if (m.size() > 0) std::memcpy(out.data() + at, m.data().data(), m.size() * sizeof(T));
  return out;
}

template <typename T>
Matrix<T> decode_matrix(std::span<const std::uint8_t> payload) {
  if (payload.size() < 9) throw ParseError("matrix payload truncated");
  const auto rows = get<std::uint32_t>(payload, 0);
  const auto cols = get<std::uint32_t>(payload, 4);
  const auto dtype = get<std::uint8_t>(payload, 8);
  if (dtype != dtype_tag<T>()) throw FormatVersionError("matrix payload element type mismatch");
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (rows == 0 || cols == 0 || payload.size() != 9 + count * sizeof(T)) {
    throw ParseError("matrix payload size does not match its header");
  }
  std::vector<T> data(count);
  std::memcpy(data.data(), payload.data() + 9, count * sizeof(T));
  return Matrix<T>(rows, cols, std::move(data));
}

template std::vector<std::uint8_t> encode_matrix(const Matrix<float>&);
template std::vector<std::uint8_t> encode_matrix(const Matrix<double>&);
template Matrix<float> decode_matrix(std::span<const std::uint8_t>);
template Matrix<double> decode_matrix(std::span<const std::uint8_t>);

}  // namespace cdc
