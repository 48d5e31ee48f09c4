#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vamix {

inline constexpr int kEngineSampleRate = 44100;

/// Mono time-domain signal. Samples are nominally in [-1, 1] and always finite.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kEngineSampleRate;
  std::optional<std::string> source_path;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_seconds() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Throws InvalidClip on NaN/Inf samples or a non-positive rate.
void validate_clip(const AudioClip& clip);

enum class WavFormat { Pcm16, Float32 };

/// Parses a RIFF/WAVE image. Accepts PCM 16/24/32-bit and IEEE float 32/64,
/// including WAVE_FORMAT_EXTENSIBLE wrappers. Channels are averaged to mono.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavFormat format);

AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavFormat format);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace vamix
