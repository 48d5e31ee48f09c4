#include "vamix/error.hpp"

namespace vamix {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedFile: return "MalformedFile";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::SampleRateMismatch: return "SampleRateMismatch";
    case Errc::IoError: return "IoError";
    case Errc::InvalidClip: return "InvalidClip";
    case Errc::EmptyClip: return "EmptyClip";
    case Errc::DegenerateWindowSum: return "DegenerateWindowSum";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidAlpha: return "InvalidAlpha";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::VersionUnsupported: return "VersionUnsupported";
    case Errc::GainOutOfRange: return "GainOutOfRange";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::SilentReference: return "SilentReference";
    case Errc::DegenerateDenominator: return "DegenerateDenominator";
    case Errc::TooShort: return "TooShort";
    case Errc::EmptyGrid: return "EmptyGrid";
  }
  return "Unknown";
}

}  // namespace vamix
