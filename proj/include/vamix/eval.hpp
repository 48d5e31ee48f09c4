#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vamix/audio_io.hpp"

namespace vamix {

inline constexpr double kClampDb = 100.0;
inline constexpr std::size_t kDefaultFilterLen = 512;

/// Metrics for one estimated source. A metric is empty when the reference is
/// silent (energy below 1e-12), in which case it is undefined.
struct SourceMetrics {
  std::string label;
  std::optional<double> sdr;
  std::optional<double> sir;
  std::optional<double> sar;
  std::optional<double> nsdr;
};

struct EvalReport {
  std::vector<SourceMetrics> sources;
  std::size_t filter_len = kDefaultFilterLen;
  double clamp_db = kClampDb;
};

/// Orthogonal decomposition of an estimate against its references with
/// time-invariant distortion filters of `filter_len` taps.
struct Decomposition {
  std::vector<double> target;
  std::vector<double> interference;
  std::vector<double> artifacts;
};

/// Decomposes estimate `index` given all references. Exposed for tests.
Decomposition bss_decompose(std::span<const double> estimate, std::span<const AudioClip> references,
                            std::size_t index, std::size_t filter_len);

/// BSS-Eval style SDR/SIR/SAR; sources are matched by index. When `mixture`
/// is given, NSDR is filled in as well.
EvalReport bss_eval(std::span<const AudioClip> estimates, std::span<const AudioClip> references,
                    std::size_t filter_len = kDefaultFilterLen, const AudioClip* mixture = nullptr,
                    std::span<const std::string> labels = {});

/// SDR with a single reference in the projection span.
double sdr_single(const AudioClip& estimate, const AudioClip& reference, std::size_t filter_len = kDefaultFilterLen);

double nsdr(const AudioClip& estimate, const AudioClip& reference, const AudioClip& mixture,
            std::size_t filter_len = kDefaultFilterLen);

/// 20 log10(rms(ref - bin) / rms(ref - smooth)): positive when the smoothed
/// reconstruction is closer to the reference than the binary one.
double smoothing_gain(const AudioClip& ref, const AudioClip& bin_recon, const AudioClip& smooth_recon);

/// 10 log10(|ref|^2 / |ref - test|^2), clamped to +-100 dB.
double snr_to_reference(const AudioClip& test, const AudioClip& ref);

double clamp_db(double value_db);

/// One JSON object per source, newline-terminated, with `config` echoed in
/// every record.
std::string eval_report_jsonl(const EvalReport& report, const std::string& clip_id, const nlohmann::json& config);

}  // namespace vamix
