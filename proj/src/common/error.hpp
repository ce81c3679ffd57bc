#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccan {

enum class ErrorCode {
  kDimension = 1,
  kNumeric,
  kUsage,
  kConfig,
  kData,
  kFormat,
  kIo,
  kMetric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& what) : Error(ErrorCode::kDimension, what) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCode::kNumeric, what) {}
};
struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorCode::kUsage, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorCode::kData, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& what) : Error(ErrorCode::kMetric, what) {}
};

// Malformed binary input. `offset` is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(ErrorCode::kFormat, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace ccan
