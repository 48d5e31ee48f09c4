#include "vamix/remix.hpp"

#include <cmath>
#include <string>

#include "vamix/error.hpp"

namespace vamix {

void RemixSpec::validate() const {
  if (!mask_set) throw Error(Errc::InvalidParams, "remix spec has no mask set");
  if (!(s_min >= -1.0) || !(s_max >= s_min)) throw Error(Errc::InvalidParams, "gain bounds must satisfy -1 <= s_min <= s_max");
  if (gains.size() != mask_set->size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(gains.size()) + " gains for " +
                                             std::to_string(mask_set->size()) + " masks");
  }
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double s = gains[i];
    if (!std::isfinite(s) || s < s_min || s > s_max) {
      throw Error(Errc::GainOutOfRange, "gain " + std::to_string(i) + " = " + std::to_string(s) + " outside [" +
                                            std::to_string(s_min) + ", " + std::to_string(s_max) + "]");
    }
  }
}

RemixSpec make_remix_spec(MaskSet masks, std::vector<double> gains) {
  RemixSpec spec;
  spec.gains = std::move(gains);
  spec.mask_set = std::make_shared<const MaskSet>(std::move(masks));
  spec.validate();
  return spec;
}

double slider_to_gain(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::GainOutOfRange, "slider value " + std::to_string(v) + " outside [0,1]");
  return 2.0 * v - 1.0;
}

std::vector<double> sliders_to_gains(const std::vector<double>& sliders) {
  std::vector<double> s;
  s.reserve(sliders.size());
  for (double v : sliders) s.push_back(slider_to_gain(v));
  return s;
}

GainField gain_field(const RemixSpec& spec, std::size_t bins, std::size_t frames) {
  spec.validate();
  spec.mask_set->expect_shape(bins, frames);
  GainField g;
  g.values = RealMatrix::Ones(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(frames));
  for (std::size_t i = 0; i < spec.gains.size(); ++i) {
    if (spec.gains[i] != 0.0) g.values += spec.gains[i] * spec.mask_set->masks[i].data;
  }
  double* p = g.values.data();
  for (Eigen::Index c = 0; c < g.values.size(); ++c) {
    if (p[c] < spec.clamp_floor) {
      p[c] = spec.clamp_floor;
      ++g.clamped_bins;
    }
  }
  return g;
}

RemixResult remix_spectrogram(const ComplexSpectrogram& mix_spec, const RemixSpec& spec) {
  GainField g = gain_field(spec, mix_spec.bins(), mix_spec.frames());
  ComplexSpectrogram y{mix_spec.data.cwiseProduct(g.values.cast<std::complex<double>>()), mix_spec.params,
                       mix_spec.original_length};
  return RemixResult{istft(y, mix_spec.original_length), g.clamped_bins};
}

AudioClip remix(const AudioClip& mix, const RemixSpec& spec, const StftParams& params) {
  spec.validate();
  return remix_spectrogram(stft(mix, params), spec).clip;
}

AudioClip separate_source(const ComplexSpectrogram& mix_spec, const Mask& mask) {
  if (mask.bins() != mix_spec.bins() || mask.frames() != mix_spec.frames()) {
    throw Error(Errc::DimensionMismatch, "mask '" + mask.source_label + "' does not match the mixture spectrogram");
  }
  ComplexSpectrogram y{mix_spec.data.cwiseProduct(mask.data.cast<std::complex<double>>()), mix_spec.params,
                       mix_spec.original_length};
  return istft(y, mix_spec.original_length);
}

AudioClip separate_source(const AudioClip& mix, const Mask& mask, const StftParams& params) {
  return separate_source(stft(mix, params), mask);
}

AudioClip separate_and_add(const ComplexSpectrogram& mix_spec, const RemixSpec& spec) {
  spec.validate();
  spec.mask_set->expect_shape(mix_spec.bins(), mix_spec.frames());
  AudioClip out;
  out.sample_rate = mix_spec.params.sample_rate;
  out.samples.assign(mix_spec.original_length, 0.0);
  for (std::size_t i = 0; i < spec.gains.size(); ++i) {
    const double w = 1.0 + spec.gains[i];
    if (w == 0.0) continue;
    const AudioClip part = separate_source(mix_spec, spec.mask_set->masks[i]);
    for (std::size_t n = 0; n < out.samples.size(); ++n) out.samples[n] += w * part.samples[n];
  }
  return out;
}

AudioClip separate_and_add(const AudioClip& mix, const RemixSpec& spec, const StftParams& params) {
  spec.validate();
  return separate_and_add(stft(mix, params), spec);
}

}  // namespace vamix
