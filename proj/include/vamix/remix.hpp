#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "vamix/masking.hpp"

namespace vamix {

/// ZLBM pole used by the default remix pipeline (CLI and service).
inline constexpr double kDefaultSmoothingAlpha = 0.7;

/// Per-source gains s_i applied through the field G = max(0, 1 + sum s_i M_i).
/// s_i = -1 mutes a source, 0 leaves it unchanged, +1 doubles it (+6.02 dB).
struct RemixSpec {
  std::vector<double> gains;
  std::shared_ptr<const MaskSet> mask_set;
  double s_min = -1.0;
  double s_max = 1.0;
  double clamp_floor = 0.0;

  /// Throws GainOutOfRange / DimensionMismatch / InvalidParams.
  void validate() const;
};

/// Builds and validates a spec.
RemixSpec make_remix_spec(MaskSet masks, std::vector<double> gains);

/// Slider position v in [0, 1] to gain s = 2v - 1.
double slider_to_gain(double v);
std::vector<double> sliders_to_gains(const std::vector<double>& sliders);

struct GainField {
  RealMatrix values;
  std::size_t clamped_bins = 0;
};

GainField gain_field(const RemixSpec& spec, std::size_t bins, std::size_t frames);

struct RemixResult {
  AudioClip clip;
  std::size_t clamped_bins = 0;
};

/// Applies the gain field to an already-analysed mixture. No forward STFT.
RemixResult remix_spectrogram(const ComplexSpectrogram& mix_spec, const RemixSpec& spec);

AudioClip remix(const AudioClip& mix, const RemixSpec& spec, const StftParams& params = {});

/// Mixture-phase masked reconstruction istft(M * stft(mix)).
AudioClip separate_source(const AudioClip& mix, const Mask& mask, const StftParams& params = {});
AudioClip separate_source(const ComplexSpectrogram& mix_spec, const Mask& mask);

/// Baseline: sum_i (1 + s_i) * separate_source(mix, M_i) in the time domain.
AudioClip separate_and_add(const AudioClip& mix, const RemixSpec& spec, const StftParams& params = {});
AudioClip separate_and_add(const ComplexSpectrogram& mix_spec, const RemixSpec& spec);

}  // namespace vamix
