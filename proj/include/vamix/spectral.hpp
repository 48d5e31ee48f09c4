#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "vamix/audio_io.hpp"

namespace vamix {

enum class WindowKind { HannPeriodic };

/// Analysis parameters. Defaults give 512 bins per frame at 44.1 kHz.
struct StftParams {
  std::size_t window_size = 1022;
  std::size_t hop = 512;
  std::size_t fft_size = 1022;
  WindowKind window = WindowKind::HannPeriodic;
  int sample_rate = kEngineSampleRate;
  bool center_pad = true;

  std::size_t bins() const noexcept { return fft_size / 2 + 1; }
  /// Number of frames stft() produces for a clip of `length` samples.
  std::size_t frames_for(std::size_t length) const;
  /// Throws InvalidParams when the invariants (hop <= window <= fft) fail.
  void validate() const;

  bool operator==(const StftParams&) const = default;
};

std::vector<double> make_window(const StftParams& params);

/// Rows are frequency bins, columns are frames. Column-major storage keeps
/// each frame contiguous.
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

struct ComplexSpectrogram {
  ComplexMatrix data;
  StftParams params;
  std::size_t original_length = 0;

  std::size_t bins() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t frames() const noexcept { return static_cast<std::size_t>(data.cols()); }
};

struct MagnitudeSpectrogram {
  RealMatrix data;
  StftParams params;

  std::size_t bins() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t frames() const noexcept { return static_cast<std::size_t>(data.cols()); }
};

ComplexSpectrogram stft(const AudioClip& clip, const StftParams& params = {});

/// Weighted overlap-add with squared-window normalization, trimmed or
/// zero-extended to `target_length`.
AudioClip istft(const ComplexSpectrogram& spec, std::size_t target_length);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

/// Number of forward transforms computed by stft() in this process. Lets
/// callers assert that cached paths never re-analyse a clip.
std::uint64_t stft_call_count() noexcept;

}  // namespace vamix
