#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vamix {

enum class Errc {
  MalformedFile,
  UnsupportedFormat,
  SampleRateMismatch,
  IoError,
  InvalidClip,
  EmptyClip,
  DegenerateWindowSum,
  DimensionMismatch,
  InvalidAlpha,
  InvalidParams,
  VersionUnsupported,
  GainOutOfRange,
  LengthMismatch,
  SilentReference,
  DegenerateDenominator,
  TooShort,
  EmptyGrid,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the engine carries one of the codes above so that
/// callers (CLI exit codes, HTTP status mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vamix
