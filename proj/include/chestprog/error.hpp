#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chestprog {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kMalformedHeader,
  kTruncatedPayload,
  kPayloadMismatch,
  kIo,
  kManifest,
  kPhantomTooSmall,
  kEmptyData,
  kSingleClass,
  kNonFinite,
  kCatalogMismatch,
  kExtraction,
  kUnmatchedCohort,
  kFormat,
};

std::string_view to_string(ErrorCode code);

/// Structured failure carrying a machine-checkable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chestprog
