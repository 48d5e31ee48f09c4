#include "vamix/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "vamix/error.hpp"
#include "vamix/parallel.hpp"
#include "vamix/random.hpp"
#include "vamix/remix.hpp"

namespace vamix {
namespace {

void peak_normalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m <= 0.0) return;
  const double g = peak / m;
  for (double& v : x) v *= g;
}

AudioClip sum_clips(const AudioClip& a, const AudioClip& b) {
  AudioClip out;
  out.sample_rate = a.sample_rate;
  out.samples.resize(a.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = a.samples[i] + b.samples[i];
  return out;
}

std::string fmt_num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::ordered_json stft_json(const StftParams& p) {
  return {{"window_size", p.window_size}, {"hop", p.hop}, {"fft_size", p.fft_size}, {"sample_rate", p.sample_rate},
          {"center_pad", p.center_pad}};
}

void attach_hash(nlohmann::ordered_json& config) { config["config_hash"] = config_hash(config); }

std::vector<MagnitudeSpectrogram> stem_magnitudes(const StemPair& pair, const StftParams& params) {
  return {magnitude(stft(pair.stem_a, params)), magnitude(stft(pair.stem_b, params))};
}

}  // namespace

StemPair make_pair(const AudioClip& clip_a, const AudioClip& clip_b, std::size_t segment_len, std::uint64_t seed,
                   std::string label_a, std::string label_b) {
  for (const AudioClip* c : {&clip_a, &clip_b}) {
    if (c->sample_rate != kEngineSampleRate) {
      throw Error(Errc::SampleRateMismatch, "stem at " + std::to_string(c->sample_rate) + " Hz, expected 44100 Hz");
    }
    if (c->samples.size() < segment_len || segment_len == 0) {
      throw Error(Errc::TooShort, "stem has " + std::to_string(c->samples.size()) + " samples, segment needs " +
                                      std::to_string(segment_len));
    }
  }
  auto cut = [&](const AudioClip& c) {
    Rng rng(derive_seed(seed, c.samples.size()));
    const std::size_t offset = uniform_index(rng, c.samples.size() - segment_len + 1);
    AudioClip seg;
    seg.sample_rate = c.sample_rate;
    seg.source_path = c.source_path;
    seg.samples.assign(c.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                       c.samples.begin() + static_cast<std::ptrdiff_t>(offset + segment_len));
    peak_normalize(seg.samples, kStemPeak);
    return seg;
  };
  StemPair pair;
  pair.stem_a = cut(clip_a);
  pair.stem_b = cut(clip_b);
  pair.mixture = sum_clips(pair.stem_a, pair.stem_b);
  pair.label_a = std::move(label_a);
  pair.label_b = std::move(label_b);
  return pair;
}

StemPair pair_from_stems(const AudioClip& a, const AudioClip& b, std::string label_a, std::string label_b) {
  if (a.sample_rate != b.sample_rate) throw Error(Errc::SampleRateMismatch, "stems differ in sample rate");
  const std::size_t n = std::min(a.samples.size(), b.samples.size());
  if (n == 0) throw Error(Errc::TooShort, "empty stem");
  StemPair pair;
  pair.stem_a = a;
  pair.stem_b = b;
  pair.stem_a.samples.resize(n);
  pair.stem_b.samples.resize(n);
  pair.mixture = sum_clips(pair.stem_a, pair.stem_b);
  pair.label_a = std::move(label_a);
  pair.label_b = std::move(label_b);
  return pair;
}

SynthVoice low_voice() { return SynthVoice{40.0, 58.0, 12, 0.72, 0.4, 1.0, 6.0}; }

SynthVoice high_voice() { return SynthVoice{64.0, 84.0, 6, 0.5, 0.3, 0.8, 10.0}; }

AudioClip synth_voice(const SynthVoice& voice, std::size_t length, std::uint64_t seed, int sample_rate) {
  Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(length, 0.0);
  const double fs = sample_rate;
  const double nyquist = fs / 2.0;
  const double attack = 0.015 * fs;
  const double release = 0.04 * fs;
  std::size_t pos = 0;
  while (pos < length) {
    const double dur_s = voice.note_min_s + (voice.note_max_s - voice.note_min_s) * uniform01(rng);
    const double rest_s = 0.08 * uniform01(rng);
    const double midi = std::round(voice.midi_low + (voice.midi_high - voice.midi_low) * uniform01(rng));
    const double amp = 0.6 + 0.4 * uniform01(rng);
    const double vib_rate = 4.5 + 2.0 * uniform01(rng);
    const double f0 = 440.0 * std::pow(2.0, (midi - 69.0) / 12.0);
    const auto note_len = static_cast<std::size_t>(dur_s * fs);
    double phase = 0.0;
    for (std::size_t i = 0; i < note_len && pos + i < length; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double cents = voice.vibrato_cents * std::sin(2.0 * std::numbers::pi * vib_rate * t);
      const double f = f0 * std::pow(2.0, cents / 1200.0);
      phase += 2.0 * std::numbers::pi * f / fs;
      double env = std::min(1.0, static_cast<double>(i) / attack);
      const double remaining = static_cast<double>(note_len - i);
      if (remaining < release) env *= remaining / release;
      env *= std::exp(-0.8 * t);
      double s = 0.0;
      double a = 1.0;
      for (int h = 1; h <= voice.harmonics; ++h) {
        if (f * h >= nyquist) break;
        s += a * std::sin(h * phase);
        a *= voice.harmonic_rolloff;
      }
      clip.samples[pos + i] = amp * env * s;
    }
    pos += note_len + static_cast<std::size_t>(rest_s * fs);
  }
  peak_normalize(clip.samples, kStemPeak);
  return clip;
}

std::vector<StemPair> synthetic_pairs(std::size_t count, std::uint64_t seed, std::size_t length) {
  std::vector<StemPair> pairs;
  pairs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const AudioClip a = synth_voice(low_voice(), length, derive_seed(seed, 2 * k));
    const AudioClip b = synth_voice(high_voice(), length, derive_seed(seed, 2 * k + 1));
    pairs.push_back(make_pair(a, b, length, derive_seed(seed, 1000 + k), "low", "high"));
  }
  return pairs;
}

StemPair disjoint_band_pair(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  AudioClip a, b;
  a.samples.assign(length, 0.0);
  b.samples.assign(length, 0.0);
  const double fs = kEngineSampleRate;
  // Partials at 300-900 Hz for one stem and 6-9 kHz for the other.
  const double fa[] = {300.0, 450.0, 600.0, 900.0};
  const double fb[] = {6000.0, 7000.0, 8000.0, 9000.0};
  double pa[4], pb[4];
  for (int k = 0; k < 4; ++k) {
    pa[k] = 2.0 * std::numbers::pi * uniform01(rng);
    pb[k] = 2.0 * std::numbers::pi * uniform01(rng);
  }
  for (std::size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) / fs;
    for (int k = 0; k < 4; ++k) {
      a.samples[n] += std::sin(2.0 * std::numbers::pi * fa[k] * t + pa[k]) / (k + 1);
      b.samples[n] += std::sin(2.0 * std::numbers::pi * fb[k] * t + pb[k]) / (k + 1);
    }
  }
  return make_pair(a, b, length, seed, "low_band", "high_band");
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedFile, std::string("manifest: ") + e.what());
  }
  if (!j.contains("stems") || !j["stems"].is_array()) throw Error(Errc::MalformedFile, "manifest lacks a 'stems' array");
  std::vector<ManifestEntry> out;
  for (const auto& e : j["stems"]) {
    if (!e.contains("file")) throw Error(Errc::MalformedFile, "manifest entry without 'file'");
    ManifestEntry m;
    m.file = e["file"].get<std::string>();
    if (m.file.is_relative()) m.file = path.parent_path() / m.file;
    m.label = e.value("label", m.file.stem().string());
    m.instrument = e.value("instrument", std::string());
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<StemPair> pairs_from_manifest(const std::vector<ManifestEntry>& entries, std::size_t count,
                                          std::uint64_t seed, std::size_t segment_len) {
  if (entries.size() < 2) throw Error(Errc::InvalidParams, "manifest needs at least two stems");
  std::vector<AudioClip> clips;
  clips.reserve(entries.size());
  for (const auto& e : entries) clips.push_back(read_wav(e.file));
  Rng rng(seed);
  std::vector<StemPair> pairs;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = uniform_index(rng, entries.size());
    std::size_t j = uniform_index(rng, entries.size() - 1);
    if (j >= i) ++j;
    pairs.push_back(make_pair(clips[i], clips[j], segment_len, derive_seed(seed, k), entries[i].label, entries[j].label));
  }
  return pairs;
}

BoundsReport bounds_benchmark(const std::vector<StemPair>& pairs, const BenchConfig& config) {
  if (pairs.empty()) throw Error(Errc::InvalidParams, "bounds benchmark needs at least one pair");
  BoundsReport report;
  report.ibm.resize(pairs.size());
  report.rbm.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const StemPair& p = pairs[k];
    const ComplexSpectrogram X = stft(p.mixture, config.stft);
    const auto mags = stem_magnitudes(p, config.stft);
    const std::vector<std::string> labels{p.label_a, p.label_b};
    const MaskSet ibm = ideal_binary_masks(mags, labels);
    const std::vector<AudioClip> refs{p.stem_a, p.stem_b};

    std::vector<AudioClip> est_ibm, est_rbm;
    for (std::size_t i = 0; i < 2; ++i) {
      est_ibm.push_back(separate_source(X, ibm.masks[i]));
      const Mask rbm = random_binary_mask(X.bins(), X.frames(), derive_seed(config.seed, 2 * k + i), config.rbm_density);
      est_rbm.push_back(separate_source(X, rbm));
    }
    report.ibm[k] = bss_eval(est_ibm, refs, config.filter_len, &p.mixture, labels);
    report.rbm[k] = bss_eval(est_rbm, refs, config.filter_len, &p.mixture, labels);
  });

  auto mean_of = [](const std::vector<EvalReport>& reports) {
    MetricMeans m;
    for (const auto& r : reports) {
      for (const auto& s : r.sources) {
        if (!s.sdr) continue;
        m.nsdr += *s.nsdr;
        m.sir += *s.sir;
        m.sar += *s.sar;
        ++m.count;
      }
    }
    if (m.count > 0) {
      m.nsdr /= static_cast<double>(m.count);
      m.sir /= static_cast<double>(m.count);
      m.sar /= static_cast<double>(m.count);
    }
    return m;
  };
  report.ibm_mean = mean_of(report.ibm);
  report.rbm_mean = mean_of(report.rbm);
  report.config = {{"experiment", "bounds"},
                   {"pairs", pairs.size()},
                   {"seed", config.seed},
                   {"filter_len", config.filter_len},
                   {"rbm_density", config.rbm_density},
                   {"stft", stft_json(config.stft)}};
  attach_hash(report.config);
  return report;
}

std::string bounds_table_csv(const BoundsReport& r) {
  std::string out = "metric,IBM,RBM\n";
  out += "NSDR," + fmt_num(r.ibm_mean.nsdr) + "," + fmt_num(r.rbm_mean.nsdr) + "\n";
  out += "SIR," + fmt_num(r.ibm_mean.sir) + "," + fmt_num(r.rbm_mean.sir) + "\n";
  out += "SAR," + fmt_num(r.ibm_mean.sar) + "," + fmt_num(r.rbm_mean.sar) + "\n";
  return out;
}

nlohmann::ordered_json bounds_report_json(const BoundsReport& r) {
  auto means = [](const MetricMeans& m) {
    return nlohmann::ordered_json{{"nsdr", m.nsdr}, {"sir", m.sir}, {"sar", m.sar}, {"count", m.count}};
  };
  auto per_pair = [](const std::vector<EvalReport>& reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& rep : reports) {
      nlohmann::ordered_json srcs = nlohmann::ordered_json::array();
      for (const auto& s : rep.sources) {
        auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
        srcs.push_back({{"label", s.label}, {"sdr", opt(s.sdr)}, {"sir", opt(s.sir)}, {"sar", opt(s.sar)}, {"nsdr", opt(s.nsdr)}});
      }
      arr.push_back(srcs);
    }
    return arr;
  };
  return {{"config", r.config},
          {"ibm", {{"mean", means(r.ibm_mean)}, {"pairs", per_pair(r.ibm)}}},
          {"rbm", {{"mean", means(r.rbm_mean)}, {"pairs", per_pair(r.rbm)}}}};
}

MaskSet corrupted_ibm(const StemPair& pair, const StftParams& params, double rho, std::uint64_t seed) {
  const auto mags = stem_magnitudes(pair, params);
  const std::vector<std::string> labels{pair.label_a, pair.label_b};
  MaskSet ibm = ideal_binary_masks(mags, labels);
  for (std::size_t i = 0; i < ibm.masks.size(); ++i) {
    ibm.masks[i] = corrupt_binary_mask(ibm.masks[i], rho, derive_seed(seed, i));
  }
  return ibm;
}

TuneReport tune_smoothing(const std::vector<StemPair>& pairs, SmoothingMethod method, const std::vector<double>& grid,
                          const TuneConfig& config) {
  if (grid.empty()) throw Error(Errc::EmptyGrid, "smoothing parameter grid is empty");
  if (pairs.empty()) throw Error(Errc::InvalidParams, "tuning needs at least one pair");
  const std::size_t bins = config.stft.bins();
  for (double p : grid) {
    if (method == SmoothingMethod::Zlbm && !(p >= 0.0 && p < 1.0)) {
      throw Error(Errc::InvalidAlpha, "alpha " + std::to_string(p) + " outside [0,1)");
    }
    if (method == SmoothingMethod::Cbm && !(p >= 0.0 && p < static_cast<double>(bins) && p == std::floor(p))) {
      throw Error(Errc::InvalidParams, "lifter cutoff " + std::to_string(p) + " must be an integer below " +
                                           std::to_string(bins));
    }
  }

  struct Prepared {
    ComplexSpectrogram X;
    MaskSet corrupted;
    std::vector<AudioClip> ref;
    std::vector<AudioClip> bin;
  };
  std::vector<Prepared> prep(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    Prepared& p = prep[k];
    p.X = stft(pairs[k].mixture, config.stft);
    const auto mags = stem_magnitudes(pairs[k], config.stft);
    const MaskSet irm = ideal_ratio_masks(mags);
    p.corrupted = corrupted_ibm(pairs[k], config.stft, config.rho, derive_seed(config.seed, k));
    for (std::size_t i = 0; i < 2; ++i) {
      p.ref.push_back(separate_source(p.X, irm.masks[i]));
      p.bin.push_back(separate_source(p.X, p.corrupted.masks[i]));
    }
  });

  TuneReport report;
  report.method = method;
  report.points.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    report.points[g].param = grid[g];
    report.points[g].gains_db.assign(pairs.size() * 2, 0.0);
  }
  parallel_for(grid.size() * pairs.size(), [&](std::size_t task) {
    const std::size_t g = task / pairs.size();
    const std::size_t k = task % pairs.size();
    const Prepared& p = prep[k];
    for (std::size_t i = 0; i < 2; ++i) {
      const Mask smoothed = method == SmoothingMethod::Zlbm
                                ? smooth_zlbm(p.corrupted.masks[i], grid[g])
                                : smooth_cbm(p.corrupted.masks[i], static_cast<std::size_t>(grid[g]), config.cbm_floor_db);
      const AudioClip rec = separate_source(p.X, smoothed);
      report.points[g].gains_db[2 * k + i] = smoothing_gain(p.ref[i], p.bin[i], rec);
    }
  });
  for (auto& pt : report.points) {
    double sum = 0.0;
    for (double v : pt.gains_db) sum += v;
    pt.mean_gain_db = sum / static_cast<double>(pt.gains_db.size());
  }
  auto best = std::max_element(report.points.begin(), report.points.end(),
                               [](const TunePoint& a, const TunePoint& b) { return a.mean_gain_db < b.mean_gain_db; });
  report.best_param = best->param;
  report.best_gain_db = best->mean_gain_db;
  report.config = {{"experiment", "tune"},
                   {"method", method == SmoothingMethod::Zlbm ? "zlbm" : "cbm"},
                   {"grid", grid},
                   {"pairs", pairs.size()},
                   {"rho", config.rho},
                   {"seed", config.seed},
                   {"cbm_floor_db", config.cbm_floor_db},
                   {"stft", stft_json(config.stft)}};
  attach_hash(report.config);
  return report;
}

nlohmann::ordered_json tune_report_json(const TuneReport& r) {
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& p : r.points) pts.push_back({{"param", p.param}, {"mean_gain_db", p.mean_gain_db}, {"gains_db", p.gains_db}});
  return {{"config", r.config}, {"best_param", r.best_param}, {"best_gain_db", r.best_gain_db}, {"points", pts}};
}

SweepReport sweep_gains(const StemPair& pair, const std::vector<double>& grid, const SweepConfig& config) {
  if (grid.empty()) throw Error(Errc::EmptyGrid, "gain grid is empty");
  for (double s : grid) {
    if (!(s >= -1.0 && s <= 1.0)) throw Error(Errc::GainOutOfRange, "grid value " + std::to_string(s) + " outside [-1,1]");
  }
  const ComplexSpectrogram X = stft(pair.mixture, config.stft);
  MaskSet masks = corrupted_ibm(pair, config.stft, config.rho, config.seed);
  if (config.smoothing) masks = smooth_zlbm(masks, config.alpha);
  auto shared = std::make_shared<const MaskSet>(std::move(masks));

  SweepReport report;
  report.grid = grid;
  report.smoothing = config.smoothing;
  report.points.resize(grid.size() * grid.size());
  parallel_for(report.points.size(), [&](std::size_t idx) {
    const double s1 = grid[idx / grid.size()];
    const double s2 = grid[idx % grid.size()];
    RemixSpec spec;
    spec.gains = {s1, s2};
    spec.mask_set = shared;
    AudioClip reference;
    reference.sample_rate = pair.mixture.sample_rate;
    reference.samples.resize(pair.mixture.samples.size());
    for (std::size_t n = 0; n < reference.samples.size(); ++n) {
      reference.samples[n] = (1.0 + s1) * pair.stem_a.samples[n] + (1.0 + s2) * pair.stem_b.samples[n];
    }
    SweepPoint pt{s1, s2, std::nullopt, std::nullopt, std::nullopt};
    const AudioClip via_remix = remix_spectrogram(X, spec).clip;
    const AudioClip via_sep = separate_and_add(X, spec);
    try {
      pt.snr_remix = snr_to_reference(via_remix, reference);
      pt.snr_sep_add = snr_to_reference(via_sep, reference);
      pt.delta = *pt.snr_remix - *pt.snr_sep_add;
    } catch (const Error& e) {
      if (e.code() != Errc::SilentReference) throw;
    }
    report.points[idx] = pt;
  });
  report.config = {{"experiment", "sweep"},
                   {"grid", grid},
                   {"alpha", config.alpha},
                   {"smoothing", config.smoothing},
                   {"rho", config.rho},
                   {"seed", config.seed},
                   {"stft", stft_json(config.stft)}};
  attach_hash(report.config);
  return report;
}

std::string sweep_csv(const SweepReport& r) {
  std::string out = "s1,s2,snr_remix_db,snr_sep_add_db,delta_db\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt_num(*v) : std::string("nan"); };
  for (const auto& p : r.points) {
    out += fmt_num(p.s1) + "," + fmt_num(p.s2) + "," + opt(p.snr_remix) + "," + opt(p.snr_sep_add) + "," +
           opt(p.delta) + "\n";
  }
  return out;
}

nlohmann::ordered_json sweep_report_json(const SweepReport& r) {
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  for (const auto& p : r.points) {
    pts.push_back({{"s1", p.s1}, {"s2", p.s2}, {"snr_remix_db", opt(p.snr_remix)},
                   {"snr_sep_add_db", opt(p.snr_sep_add)}, {"delta_db", opt(p.delta)}});
  }
  return {{"config", r.config}, {"points", pts}};
}

std::string config_hash(const nlohmann::ordered_json& config) {
  nlohmann::ordered_json copy = config;
  copy.erase("config_hash");
  const std::string text = copy.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vamix
