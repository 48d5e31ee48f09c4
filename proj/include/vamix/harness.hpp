#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vamix/eval.hpp"
#include "vamix/masking.hpp"
#include "vamix/remix.hpp"

namespace vamix {

inline constexpr std::size_t kSegmentLength = 262144;
inline constexpr double kStemPeak = 0.45;
inline constexpr double kDefaultCorruption = 0.05;

/// Two ground-truth stems and their sample-wise sum.
struct StemPair {
  AudioClip stem_a;
  AudioClip stem_b;
  AudioClip mixture;
  std::string label_a = "a";
  std::string label_b = "b";
};

/// Picks a seeded random segment of each clip, peak-normalizes each to 0.45
/// and sums them. The offset for a clip depends only on (seed, clip length),
/// so the same clip passed twice yields the same segment.
StemPair make_pair(const AudioClip& clip_a, const AudioClip& clip_b, std::size_t segment_len = kSegmentLength,
                   std::uint64_t seed = 0, std::string label_a = "a", std::string label_b = "b");

/// Uses the stems as given (truncated to the shorter one), no normalization.
StemPair pair_from_stems(const AudioClip& a, const AudioClip& b, std::string label_a = "a",
                         std::string label_b = "b");

// -- synthetic material ------------------------------------------------------

struct SynthVoice {
  double midi_low = 40.0;
  double midi_high = 60.0;
  int harmonics = 10;
  double harmonic_rolloff = 0.7;  // amplitude ratio between successive partials
  double note_min_s = 0.35;
  double note_max_s = 0.9;
  double vibrato_cents = 8.0;
};

SynthVoice low_voice();
SynthVoice high_voice();

/// Monophonic note sequence from a seeded generator, peak-normalized to 0.45.
AudioClip synth_voice(const SynthVoice& voice, std::size_t length, std::uint64_t seed, int sample_rate = kEngineSampleRate);

/// Low/high voice pairs; pair k uses seeds derived from (seed, k).
std::vector<StemPair> synthetic_pairs(std::size_t count, std::uint64_t seed, std::size_t length = kSegmentLength);

/// Two stems with disjoint spectral support (a partial-rich low band and a
/// high band separated by several kHz).
StemPair disjoint_band_pair(std::size_t length, std::uint64_t seed = 0);

// -- dataset manifest --------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path file;
  std::string label;
  std::string instrument;
};

/// {"stems": [{"file": "...", "label": "...", "instrument": "..."}, ...]}.
/// Relative files resolve against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

/// Draws `count` pairs of distinct manifest entries and cuts segments.
std::vector<StemPair> pairs_from_manifest(const std::vector<ManifestEntry>& entries, std::size_t count,
                                          std::uint64_t seed, std::size_t segment_len = kSegmentLength);

// -- experiments -------------------------------------------------------------

struct MetricMeans {
  double nsdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
  std::size_t count = 0;
};

struct BoundsReport {
  std::vector<EvalReport> ibm;  // one per pair
  std::vector<EvalReport> rbm;
  MetricMeans ibm_mean;
  MetricMeans rbm_mean;
  nlohmann::ordered_json config;
};

struct BenchConfig {
  StftParams stft;
  std::size_t filter_len = kDefaultFilterLen;
  std::uint64_t seed = 0;
  double rbm_density = 0.5;
};

BoundsReport bounds_benchmark(const std::vector<StemPair>& pairs, const BenchConfig& config = {});

/// NSDR/SIR/SAR rows by IBM/RBM columns.
std::string bounds_table_csv(const BoundsReport& report);
nlohmann::ordered_json bounds_report_json(const BoundsReport& report);

enum class SmoothingMethod { Zlbm, Cbm };

struct TuneConfig {
  StftParams stft;
  double rho = kDefaultCorruption;
  std::uint64_t seed = 0;
  double cbm_floor_db = -80.0;
};

struct TunePoint {
  double param = 0.0;
  double mean_gain_db = 0.0;
  std::vector<double> gains_db;  // pair-major, then source
};

struct TuneReport {
  SmoothingMethod method = SmoothingMethod::Zlbm;
  std::vector<TunePoint> points;
  double best_param = 0.0;
  double best_gain_db = 0.0;
  nlohmann::ordered_json config;
};

/// For each parameter: corrupt each source's IBM (independent flips), smooth,
/// reconstruct, and score against the ideal-ratio-mask reconstruction.
/// For CBM the parameter is the lifter cutoff.
TuneReport tune_smoothing(const std::vector<StemPair>& pairs, SmoothingMethod method, const std::vector<double>& grid,
                          const TuneConfig& config = {});

nlohmann::ordered_json tune_report_json(const TuneReport& report);

struct SweepPoint {
  double s1 = 0.0;
  double s2 = 0.0;
  std::optional<double> snr_remix;    // empty when the reference is silent
  std::optional<double> snr_sep_add;
  std::optional<double> delta;
};

struct SweepConfig {
  StftParams stft;
  double alpha = kDefaultSmoothingAlpha;
  bool smoothing = true;
  double rho = kDefaultCorruption;
  std::uint64_t seed = 0;
};

struct SweepReport {
  std::vector<double> grid;
  std::vector<SweepPoint> points;  // row-major in (s1, s2)
  bool smoothing = true;
  nlohmann::ordered_json config;

  const SweepPoint& at(std::size_t i1, std::size_t i2) const { return points[i1 * grid.size() + i2]; }
};

/// Compares remix() and separate_and_add() against the weighted stem sum
/// (1+s1) a + (1+s2) b on every grid point.
SweepReport sweep_gains(const StemPair& pair, const std::vector<double>& grid, const SweepConfig& config = {});

std::string sweep_csv(const SweepReport& report);
nlohmann::ordered_json sweep_report_json(const SweepReport& report);

/// Stable 64-bit FNV-1a hash of a config's compact JSON text, as hex.
std::string config_hash(const nlohmann::ordered_json& config);

/// Corrupted binary masks for both stems of a pair, flipped independently.
MaskSet corrupted_ibm(const StemPair& pair, const StftParams& params, double rho, std::uint64_t seed);

}  // namespace vamix
