// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy shared by every cdc module. Each error names one
// failure condition; callers that only care about "something went wrong"
// catch cdc::Error.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cdc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CDC_DEFINE_ERROR(Name)                \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

CDC_DEFINE_ERROR(DimensionMismatch);
CDC_DEFINE_ERROR(InvalidGeometry);
CDC_DEFINE_ERROR(InvalidArgument);
CDC_DEFINE_ERROR(ParseError);
CDC_DEFINE_ERROR(IoError);
CDC_DEFINE_ERROR(FormatVersionError);
CDC_DEFINE_ERROR(ChecksumError);
CDC_DEFINE_ERROR(IncompatibleMethod);
CDC_DEFINE_ERROR(TooManyDevices);
CDC_DEFINE_ERROR(UnknownDevice);
CDC_DEFINE_ERROR(UnsuitableMethod);
CDC_DEFINE_ERROR(TooManyMissing);
CDC_DEFINE_ERROR(NothingMissing);
CDC_DEFINE_ERROR(ExplosionGuard);
CDC_DEFINE_ERROR(AllocationInvalid);
CDC_DEFINE_ERROR(NoFeasibleAllocation);
CDC_DEFINE_ERROR(ConnectionClosed);
CDC_DEFINE_ERROR(EmptySamples);

#undef CDC_DEFINE_ERROR

// Layer output or input shape disagrees with what the model expects.
class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what, std::int64_t layer_id = -1)
      : Error(what), layer_id_(layer_id) {}
  std::int64_t layer_id() const noexcept { return layer_id_; }

 private:
  std::int64_t layer_id_;
};

class MissingPartial : public Error {
 public:
  explicit MissingPartial(std::vector<std::size_t> missing)
      : Error(describe(missing)), missing_(std::move(missing)) {}
  const std::vector<std::size_t>& missing() const noexcept { return missing_; }

 private:
  static std::string describe(const std::vector<std::size_t>& missing) {
    std::string out = "missing partial from device(s):";
    for (auto d : missing) out += " " + std::to_string(d);
    return out;
  }

  std::vector<std::size_t> missing_;
};

// Raised when a stage cannot complete; at_ms is the virtual time of the
// give-up decision.
class StageTimeout : public Error {
 public:
  StageTimeout(const std::string& what, double at_ms) : Error(what), at_ms_(at_ms) {}
  double at_ms() const noexcept { return at_ms_; }

 private:
  double at_ms_;
};

}  // namespace cdc
