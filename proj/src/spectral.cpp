#include "vamix/spectral.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include "vamix/error.hpp"
#include "vamix/fft.hpp"

namespace vamix {
namespace {

std::atomic<std::uint64_t> g_stft_calls{0};

constexpr double kMinWindowSum = 1e-10;

// Mirror index into [0, n) without repeating the edge sample, folding as many
// times as needed so short clips still pad.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

std::size_t left_pad(const StftParams& p) { return p.center_pad ? p.window_size / 2 : 0; }

}  // namespace

void StftParams::validate() const {
  if (window_size == 0 || hop == 0) throw Error(Errc::InvalidParams, "window_size and hop must be positive");
  if (hop > window_size) throw Error(Errc::InvalidParams, "hop must not exceed window_size");
  if (fft_size < window_size) throw Error(Errc::InvalidParams, "fft_size must be >= window_size");
  if (sample_rate <= 0) throw Error(Errc::InvalidParams, "sample_rate must be positive");
}

std::size_t StftParams::frames_for(std::size_t length) const {
  // Centered framing: reflect-pad window/2 on both sides, then zero-extend
  // the tail to a whole hop so the last real sample sits under two frames.
  if (center_pad) return (length + hop - 1) / hop + 1;
  if (length < window_size) return 1;
  return (length - window_size + hop - 1) / hop + 1;
}

std::vector<double> make_window(const StftParams& params) {
  std::vector<double> w(params.window_size);
  const double n = static_cast<double>(params.window_size);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  }
  return w;
}

ComplexSpectrogram stft(const AudioClip& clip, const StftParams& params) {
  params.validate();
  if (clip.sample_rate != params.sample_rate) {
    throw Error(Errc::SampleRateMismatch, "clip rate " + std::to_string(clip.sample_rate) +
                                              " Hz, analysis configured for " +
                                              std::to_string(params.sample_rate) + " Hz");
  }
  if (clip.samples.empty()) throw Error(Errc::EmptyClip, "cannot analyse an empty clip");
  g_stft_calls.fetch_add(1, std::memory_order_relaxed);

  const std::size_t n = clip.samples.size();
  const std::size_t frames = params.frames_for(n);
  const std::size_t pad = left_pad(params);
  const auto window = make_window(params);

  ComplexSpectrogram spec;
  spec.params = params;
  spec.original_length = n;
  spec.data.resize(static_cast<Eigen::Index>(params.bins()), static_cast<Eigen::Index>(frames));

  std::vector<double> frame(params.fft_size, 0.0);
  std::vector<std::complex<double>> bins(params.bins());
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * params.hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t i = 0; i < params.window_size; ++i) {
      const std::ptrdiff_t src = start + static_cast<std::ptrdiff_t>(i);
      double x = 0.0;
      if (src >= 0 && src < static_cast<std::ptrdiff_t>(n)) {
        x = clip.samples[static_cast<std::size_t>(src)];
      } else if (params.center_pad) {
        // Reflection covers the window/2 margins; beyond the right margin the
        // tail is zero-extended.
        const bool in_left = src < 0 && -src <= static_cast<std::ptrdiff_t>(pad);
        const bool in_right = src >= static_cast<std::ptrdiff_t>(n) &&
                              src < static_cast<std::ptrdiff_t>(n + pad);
        if (in_left || in_right) x = clip.samples[reflect_index(src, n)];
      }
      frame[i] = x * window[i];
    }
    fft::forward(frame, bins);
    for (std::size_t k = 0; k < bins.size(); ++k) {
      spec.data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = bins[k];
    }
  }
  return spec;
}

AudioClip istft(const ComplexSpectrogram& spec, std::size_t target_length) {
  const StftParams& params = spec.params;
  params.validate();
  if (spec.bins() != params.bins()) {
    throw Error(Errc::DimensionMismatch, "spectrogram has " + std::to_string(spec.bins()) + " bins, params imply " +
                                             std::to_string(params.bins()));
  }
  const std::size_t frames = spec.frames();
  const std::size_t pad = left_pad(params);
  const auto window = make_window(params);
  const std::size_t span = frames == 0 ? 0 : (frames - 1) * params.hop + params.window_size;

  std::vector<double> acc(span, 0.0);
  std::vector<double> wsum(span, 0.0);
  std::vector<std::complex<double>> bins(params.bins());
  std::vector<double> frame(params.fft_size);
  const double scale = 1.0 / static_cast<double>(params.fft_size);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins.size(); ++k) {
      bins[k] = spec.data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    }
    fft::inverse(bins, frame);
    const std::size_t offset = t * params.hop;
    for (std::size_t i = 0; i < params.window_size; ++i) {
      acc[offset + i] += frame[i] * scale * window[i];
      wsum[offset + i] += window[i] * window[i];
    }
  }

  AudioClip out;
  out.sample_rate = params.sample_rate;
  out.samples.assign(target_length, 0.0);
  const std::size_t valid_end = std::min(spec.original_length, target_length);
  for (std::size_t i = 0; i < target_length; ++i) {
    const std::size_t j = i + pad;
    if (j >= span) break;
    if (wsum[j] < kMinWindowSum) {
      if (i < valid_end) {
        throw Error(Errc::DegenerateWindowSum, "window-sum normalization below 1e-10 at sample " + std::to_string(i));
      }
      continue;
    }
    out.samples[i] = acc[j] / wsum[j];
  }
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  return MagnitudeSpectrogram{spec.data.cwiseAbs(), spec.params};
}

std::uint64_t stft_call_count() noexcept { return g_stft_calls.load(std::memory_order_relaxed); }

}  // namespace vamix
