#pragma once

#include <stdexcept>
#include <string>

namespace monose3 {

enum class ErrorCode {
  DegenerateRotation6D,
  BehindCamera,
  NonPositiveDepth,
  EmptyPointSet,
  InvalidScheduleParams,
  InvalidTimestepOrder,
  OddEmbeddingSize,
  DimensionMismatch,
  InvalidIterationCount,
  InvalidRange,
  EmptyInput,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this type; the C API maps the
// code onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace monose3
