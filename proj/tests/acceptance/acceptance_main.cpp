// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <Eigen/QR>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "test_support.hpp"
#include "vamix/cli.hpp"
#include "vamix/eval.hpp"
#include "vamix/harness.hpp"
#include "vamix/masking.hpp"
#include "vamix/random.hpp"
#include "vamix/remix.hpp"

using namespace vamix;
using namespace vamix::testing;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void warn(int id, const std::string& detail) {
  std::printf("[WARN] %d %s\n", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ---------------------------------------------------------------------------

void stft_round_trip() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    AudioClip c = noise_clip(6 * 44100, derive_seed(1, k));
    const auto back = istft(stft(c), c.samples.size());
    worst = std::max(worst, rel_l2(back.samples, c.samples));
  }
  const double secs = seconds_since(t0);
  report(1, "STFT round trip", worst < 1e-6 && secs < 30.0,
         fmt("100 clips x 6 s, worst rel L2 %.3e (< 1e-6), %.2f s (< 30 s)", worst, secs));
}

// 2 ---------------------------------------------------------------------------

MaskSet random_mask_set(std::size_t kind, std::size_t n_sources, std::size_t bins, std::size_t frames, std::uint64_t seed) {
  MaskSet set;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_sources; ++i) {
    Mask m = random_binary_mask(bins, frames, derive_seed(seed, i), 0.5);
    if (kind == 1) {
      m.kind = MaskKind::Ratio;
      for (Eigen::Index j = 0; j < m.data.size(); ++j) m.data(j) = uniform01(rng);
    } else if (kind == 2) {
      m = smooth_zlbm(m, 0.2 + 0.07 * static_cast<double>(i));
    }
    set.masks.push_back(std::move(m));
  }
  return set;
}

void remix_identity() {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    AudioClip mix = noise_clip(3 * 44100 + 123 * k, derive_seed(2, k));
    const auto X = stft(mix);
    const std::size_t n_sources = 2 + k % 3;
    MaskSet set = random_mask_set(k % 3, n_sources, X.bins(), X.frames(), derive_seed(20, k));
    const auto out = remix_spectrogram(X, make_remix_spec(set, std::vector<double>(n_sources, 0.0))).clip;
    worst = std::max(worst, rel_l2(out.samples, mix.samples));
  }
  report(2, "Remix identity", worst < 1e-6,
         fmt("20 mask sets (binary/ratio/smoothed), worst rel error %.3e (< 1e-6)", worst));
}

// 3 ---------------------------------------------------------------------------

void partition_equivalence() {
  double worst = 0.0;
  std::size_t clamped = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const std::size_t n_sources = 2 + k % 3;
    const std::size_t len = 2 * 44100;
    std::vector<AudioClip> stems;
    AudioClip mix;
    mix.samples.assign(len, 0.0);
    std::vector<MagnitudeSpectrogram> mags;
    for (std::size_t i = 0; i < n_sources; ++i) {
      stems.push_back(noise_clip(len, derive_seed(300 + k, i), 0.3));
      for (std::size_t t = 0; t < len; ++t) mix.samples[t] += stems.back().samples[t];
      mags.push_back(magnitude(stft(stems.back())));
    }
    const auto X = stft(mix);
    Rng rng(derive_seed(3, k));
    std::vector<double> gains(n_sources);
    for (auto& g : gains) g = 2.0 * uniform01(rng) - 1.0;
    const auto spec = make_remix_spec(ideal_binary_masks(mags), gains);
    const auto r = remix_spectrogram(X, spec);
    clamped += r.clamped_bins;
    worst = std::max(worst, rel_l2(r.clip.samples, separate_and_add(X, spec).samples));
  }
  report(3, "Partition equivalence", worst < 1e-6,
         fmt("100 gain vectors on IBM partitions, worst rel diff %.3e (< 1e-6), clamped bins %zu", worst, clamped));
}

// 4 ---------------------------------------------------------------------------

void bounds_ordering() {
  const auto t0 = Clock::now();
  const auto pairs = synthetic_pairs(10, 4);
  const auto r = bounds_benchmark(pairs);
  const double secs = seconds_since(t0);
  const double gap = r.ibm_mean.nsdr - r.rbm_mean.nsdr;
  report(4, "IBM/RBM bounds ordering", gap >= 10.0 && r.rbm_mean.nsdr < 0.0 && secs < 300.0,
         fmt("10 pairs, IBM NSDR %.2f dB, RBM NSDR %.2f dB, gap %.2f dB (>= 10), RBM < 0, %.1f s (< 300 s)",
             r.ibm_mean.nsdr, r.rbm_mean.nsdr, gap, secs));
}

// 5 ---------------------------------------------------------------------------

Eigen::VectorXd dense_projection(const std::vector<const AudioClip*>& refs, const Eigen::VectorXd& est, std::size_t L) {
  const auto n = static_cast<Eigen::Index>(refs.front()->samples.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + static_cast<Eigen::Index>(L) - 1, static_cast<Eigen::Index>(refs.size() * L));
  for (std::size_t i = 0; i < refs.size(); ++i)
    for (std::size_t d = 0; d < L; ++d)
      for (Eigen::Index t = 0; t < n; ++t)
        A(t + static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i * L + d)) = refs[i]->samples[static_cast<std::size_t>(t)];
  return A * A.householderQr().solve(est);
}

void bss_oracle() {
  // orthogonal noise at -20 dB, single tap
  AudioClip ref = noise_clip(44100, 51);
  AudioClip e = noise_clip(44100, 52);
  const double proj = std::inner_product(e.samples.begin(), e.samples.end(), ref.samples.begin(), 0.0) / energy(ref.samples);
  for (std::size_t i = 0; i < e.samples.size(); ++i) e.samples[i] -= proj * ref.samples[i];
  const double scale = std::sqrt(energy(ref.samples) * 0.01 / energy(e.samples));
  AudioClip est = ref;
  for (std::size_t i = 0; i < est.samples.size(); ++i) est.samples[i] += scale * e.samples[i];
  const double sdr20 = sdr_single(est, ref, 1);
  const double sdr_self = sdr_single(ref, ref, kDefaultFilterLen);

  // dense least squares vs fast path
  double worst = 0.0;
  for (std::size_t L : {1u, 3u, 8u}) {
    std::vector<AudioClip> refs{noise_clip(1000, 60 + L), sine_clip(1000, 2000.0, 0.4)};
    AudioClip x = noise_clip(1000, 70 + L, 0.1);
    for (std::size_t t = 0; t < 1000; ++t) x.samples[t] += 0.7 * refs[0].samples[t] + 0.2 * refs[1].samples[(t + 5) % 1000];
    const auto fast = bss_eval(std::vector<AudioClip>{x, refs[1]}, refs, L);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(1000 + static_cast<Eigen::Index>(L) - 1);
    for (Eigen::Index t = 0; t < 1000; ++t) v(t) = x.samples[static_cast<std::size_t>(t)];
    const Eigen::VectorXd target = dense_projection({&refs[0]}, v, L);
    const Eigen::VectorXd p_all = dense_projection({&refs[0], &refs[1]}, v, L);
    const double sdr = 10.0 * std::log10(target.squaredNorm() / (v - target).squaredNorm());
    const double sir = 10.0 * std::log10(target.squaredNorm() / (p_all - target).squaredNorm());
    const double sar = 10.0 * std::log10(p_all.squaredNorm() / (v - p_all).squaredNorm());
    worst = std::max({worst, std::abs(sdr - *fast.sources[0].sdr), std::abs(sir - *fast.sources[0].sir),
                      std::abs(sar - *fast.sources[0].sar)});
  }
  report(5, "BSS-Eval oracle", std::abs(sdr20 - 20.0) <= 0.1 && sdr_self == kClampDb && worst <= 0.05,
         fmt("orthogonal -20 dB -> SDR %.4f dB (20 +- 0.1), self SDR %.1f dB (clamp 100), dense vs fast max diff %.2e dB "
             "(<= 0.05)",
             sdr20, sdr_self, worst));
}

// 6 ---------------------------------------------------------------------------

void smoothing_gain_check() {
  const auto pairs = synthetic_pairs(10, 6);
  TuneConfig cfg;
  cfg.rho = 0.05;
  cfg.seed = 6;
  const auto zl = tune_smoothing(pairs, SmoothingMethod::Zlbm, {kDefaultSmoothingAlpha}, cfg);
  const auto cb = tune_smoothing(pairs, SmoothingMethod::Cbm, {5, 10, 20, 40, 80, 160, 320}, cfg);
  const double z = zl.points.front().mean_gain_db;
  report(6, "Smoothing gain", z > 0.0,
         fmt("10 pairs, rho 0.05, alpha %.2f: mean ZLBM gain %.3f dB (> 0); best CBM (cutoff %.0f) %.3f dB",
             kDefaultSmoothingAlpha, z, cb.best_param, cb.best_gain_db));
  if (z < cb.best_gain_db) warn(6, fmt("ZLBM mean %.3f dB below CBM mean %.3f dB", z, cb.best_gain_db));
}

// 7 ---------------------------------------------------------------------------

void sweep_shape() {
  const auto pairs = synthetic_pairs(3, 7);
  const std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};
  bool ok = true;
  std::string detail;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto t0 = Clock::now();
    SweepConfig cfg;
    cfg.alpha = kDefaultSmoothingAlpha;
    cfg.seed = k;
    const auto r = sweep_gains(pairs[k], grid, cfg);
    const double secs = seconds_since(t0);
    double corner_min = std::numeric_limits<double>::infinity();
    for (auto [i, j] : {std::pair{0, 4}, {4, 0}, {0, 0}}) {
      const auto& p = r.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (p.delta) corner_min = std::min(corner_min, *p.delta);
    }
    const auto& center = r.at(2, 2);
    double inner = 0.0, outer = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        const auto& p = r.at(i, j);
        if (!p.delta) continue;
        const bool boundary = i == 0 || j == 0 || i == 4 || j == 4;
        (boundary ? outer : inner) += *p.delta;
        ++(boundary ? n_out : n_in);
      }
    }
    inner /= static_cast<double>(n_in);
    outer /= static_cast<double>(n_out);
    const bool pass = corner_min >= -1.0 && center.delta && *center.delta > 0.0 && inner > outer && secs < 120.0;
    ok = ok && pass;
    detail += fmt("%spair %zu: mute-corner min %.2f dB (>= -1), center %.2f dB (> 0), interior %.2f > boundary %.2f, %.1f s",
                  k ? "; " : "", k, corner_min, center.delta.value_or(std::nan("")), inner, outer, secs);
  }
  report(7, "Gain sweep shape", ok, detail);
}

// 8 ---------------------------------------------------------------------------

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::vector<std::uint8_t>> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

void determinism() {
  TempDir inputs;
  auto pair = synthetic_pairs(1, 8, 3 * 44100).front();
  const auto a = (inputs / "a.wav").string(), b = (inputs / "b.wav").string(), mix = (inputs / "mix.wav").string();
  write_wav(a, pair.stem_a, WavFormat::Float32);
  write_wav(b, pair.stem_b, WavFormat::Float32);
  write_wav(mix, pair.mixture, WavFormat::Float32);

  using Cmd = std::vector<std::string>;
  auto commands = [&](const std::string& o) -> std::vector<Cmd> {
    return {
        {"masks", "ibm", "--stems", a, b, "--labels", "low,high", "-o", o + "/ibm.tfmk"},
        {"masks", "irm", "--stems", a, b, "-o", o + "/irm.tfmk"},
        {"masks", "rbm", "--mix", mix, "--sources", "2", "--seed", "5", "-o", o + "/rbm.tfmk"},
        {"masks", "smooth", "--in", o + "/ibm.tfmk", "--method", "zlbm", "--alpha", "0.5", "-o", o + "/z.tfmk"},
        {"masks", "smooth", "--in", o + "/ibm.tfmk", "--method", "cbm", "--cutoff", "40", "-o", o + "/c.tfmk"},
        {"remix", "--mix", mix, "--masks", o + "/ibm.tfmk", "--gains", "0.5,-0.5", "-o", o + "/remix.wav"},
        {"remix", "--mix", mix, "--masks", o + "/irm.tfmk", "--volumes", "0.2,0.9", "--format", "pcm16", "-o",
         o + "/remix16.wav"},
        {"remix", "--mix", mix, "--masks", o + "/ibm.tfmk", "--gains", "1,-1", "--separate-and-add", "-o",
         o + "/sa.wav"},
        {"separate", "--mix", mix, "--masks", o + "/ibm.tfmk", "-o", o + "/parts"},
        {"eval", "--mix", mix, "--masks", o + "/ibm.tfmk", "--refs", a, b, "--filter-len", "64", "-o",
         o + "/eval.jsonl"},
        {"tune", "--stems", a, b, "--grid", "0.2,0.5", "--seed", "3", "-o", o + "/tune.json"},
        {"tune", "--stems", a, b, "--method", "cbm", "--grid", "20,80", "-o", o + "/tune_cbm.json"},
        {"sweep", "--stems", a, b, "--alpha", "0.6", "--grid", "-1,0,1", "-o", o + "/sweep.csv", "--json",
         o + "/sweep.json"},
        {"bounds", "--synthetic", "1", "--segment", "44100", "--filter-len", "32", "-o", o + "/bounds.csv", "--json",
         o + "/bounds.json"},
    };
  };
  // Same argv both times: run into one directory, snapshot, wipe, rerun.
  TempDir work;
  const auto cmds = commands(work.path().string());
  int errors = 0;
  std::map<std::string, std::vector<std::uint8_t>> snaps[2];
  for (auto& snap : snaps) {
    for (const auto& e : std::filesystem::directory_iterator(work.path())) std::filesystem::remove_all(e.path());
    for (const auto& c : cmds) {
      std::ostringstream out, err;
      if (run_cli(c, out, err) != 0) {
        ++errors;
        std::fprintf(stderr, "%s", err.str().c_str());
      }
    }
    snap = snapshot(work.path());
  }
  const auto& s1 = snaps[0];
  const auto& s2 = snaps[1];
  const std::size_t n_cmds = cmds.size();
  std::size_t differing = 0;
  for (const auto& [name, bytes] : s1) {
    auto it = s2.find(name);
    if (it == s2.end() || it->second != bytes) {
      ++differing;
      std::fprintf(stderr, "differs: %s\n", name.c_str());
    }
  }
  const bool pass = errors == 0 && s1.size() == s2.size() && differing == 0 && !s1.empty();
  report(8, "Determinism", pass,
         fmt("%zu commands run twice, %zu output files, %zu differ, %d command errors", n_cmds, s1.size(), differing,
             errors));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{stft_round_trip, remix_identity,        partition_equivalence,
                                                     bounds_ordering, bss_oracle,            smoothing_gain_check,
                                                     sweep_shape,     determinism};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion threw: %s\n", e.what());
      ++g_failures;
    }
  }
  std::printf("%d failure(s)\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
