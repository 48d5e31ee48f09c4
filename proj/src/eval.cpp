#include "vamix/eval.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <limits>

#include "vamix/error.hpp"
#include "vamix/fft.hpp"

namespace vamix {
namespace {

constexpr double kSilentEnergy = 1e-12;
constexpr double kRegularization = 1e-10;

using Spectrum = std::vector<std::complex<double>>;

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double ratio_db(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kClampDb : 0.0;
  if (num <= 0.0) return -kClampDb;
  return clamp_db(10.0 * std::log10(num / den));
}

// Zero-padded real spectra of length `n` for fast correlation/convolution.
class FastCorrelator {
 public:
  FastCorrelator(std::size_t signal_len, std::size_t filter_len)
      : n_(fft::next_pow2(signal_len + filter_len - 1)), filter_len_(filter_len) {}

  Spectrum spectrum(std::span<const double> x) const {
    std::vector<double> buf(n_, 0.0);
    std::copy(x.begin(), x.end(), buf.begin());
    Spectrum out(n_ / 2 + 1);
    fft::forward(buf, out);
    return out;
  }

  // r[d] = sum_u a(u) b(u + d) for d in (-L, L); stored at index d + L - 1.
  std::vector<double> correlate(const Spectrum& a, const Spectrum& b) const {
    Spectrum prod(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) prod[k] = std::conj(a[k]) * b[k];
    std::vector<double> circ(n_);
    fft::inverse(prod, circ);
    const double scale = 1.0 / static_cast<double>(n_);
    const auto L = static_cast<std::ptrdiff_t>(filter_len_);
    std::vector<double> r(2 * filter_len_ - 1);
    for (std::ptrdiff_t d = -(L - 1); d <= L - 1; ++d) {
      const std::size_t idx = d >= 0 ? static_cast<std::size_t>(d) : n_ - static_cast<std::size_t>(-d);
      r[static_cast<std::size_t>(d + L - 1)] = circ[idx] * scale;
    }
    return r;
  }

  // Convolution of a signal spectrum with `taps`, first `out_len` samples.
  std::vector<double> filter(const Spectrum& x, std::span<const double> taps, std::size_t out_len) const {
    Spectrum h = spectrum(taps);
    for (std::size_t k = 0; k < h.size(); ++k) h[k] *= x[k];
    std::vector<double> y(n_);
    fft::inverse(h, y);
    const double scale = 1.0 / static_cast<double>(n_);
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = y[i] * scale;
    return out;
  }

 private:
  std::size_t n_;
  std::size_t filter_len_;
};

// Least-squares projection of an estimate onto the span of L delayed copies of
// a set of references. The Gram matrix is block Toeplitz and is factored once.
class Projector {
 public:
  Projector(const FastCorrelator& corr, std::vector<const Spectrum*> refs, std::size_t filter_len)
      : corr_(corr), refs_(std::move(refs)), L_(filter_len) {
    const std::size_t dim = refs_.size() * L_;
    Eigen::MatrixXd gram(dim, dim);
    for (std::size_t i = 0; i < refs_.size(); ++i) {
      for (std::size_t j = i; j < refs_.size(); ++j) {
        const auto c = corr_.correlate(*refs_[i], *refs_[j]);
        // block(i,j)[a,b] = sum_t s_i(t - a) s_j(t - b) = c_ij[a - b]
        for (std::size_t a = 0; a < L_; ++a) {
          for (std::size_t b = 0; b < L_; ++b) {
            const double v = c[a + L_ - 1 - b];
            gram(static_cast<Eigen::Index>(i * L_ + a), static_cast<Eigen::Index>(j * L_ + b)) = v;
            gram(static_cast<Eigen::Index>(j * L_ + b), static_cast<Eigen::Index>(i * L_ + a)) = v;
          }
        }
      }
    }
    const double lambda = kRegularization * gram.trace() / static_cast<double>(dim);
    gram.diagonal().array() += lambda;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success) throw Error(Errc::InvalidParams, "Gram matrix factorization failed");
  }

  std::vector<double> project(const Spectrum& estimate, std::size_t out_len) const {
    const std::size_t dim = refs_.size() * L_;
    Eigen::VectorXd rhs(dim);
    for (std::size_t i = 0; i < refs_.size(); ++i) {
      const auto c = corr_.correlate(*refs_[i], estimate);
      for (std::size_t a = 0; a < L_; ++a) rhs(static_cast<Eigen::Index>(i * L_ + a)) = c[a + L_ - 1];
    }
    const Eigen::VectorXd coef = llt_.solve(rhs);
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < refs_.size(); ++i) {
      auto part = corr_.filter(*refs_[i], std::span(coef.data() + i * L_, L_), out_len);
      for (std::size_t t = 0; t < out_len; ++t) out[t] += part[t];
    }
    return out;
  }

 private:
  const FastCorrelator& corr_;
  std::vector<const Spectrum*> refs_;
  std::size_t L_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

void check_lengths(std::span<const AudioClip> clips, std::size_t n, const char* what) {
  for (const auto& c : clips) {
    if (c.samples.size() != n) throw Error(Errc::LengthMismatch, std::string(what) + " lengths differ");
  }
}

struct Metrics {
  double sdr, sir, sar;
};

Metrics metrics_from(const Decomposition& d) {
  std::vector<double> noise(d.target.size());
  std::vector<double> signal_interf(d.target.size());
  for (std::size_t t = 0; t < noise.size(); ++t) {
    noise[t] = d.interference[t] + d.artifacts[t];
    signal_interf[t] = d.target[t] + d.interference[t];
  }
  const double e_target = energy(d.target);
  return Metrics{ratio_db(e_target, energy(noise)), ratio_db(e_target, energy(d.interference)),
                 ratio_db(energy(signal_interf), energy(d.artifacts))};
}

Decomposition decompose_with(const FastCorrelator& corr, const Projector& own, const Projector& all,
                             std::span<const double> estimate, std::size_t filter_len) {
  const std::size_t out_len = estimate.size() + filter_len - 1;
  const Spectrum est = corr.spectrum(estimate);
  Decomposition d;
  d.target = own.project(est, out_len);
  std::vector<double> p_all = all.project(est, out_len);
  d.interference.resize(out_len);
  d.artifacts.resize(out_len);
  for (std::size_t t = 0; t < out_len; ++t) {
    const double s = t < estimate.size() ? estimate[t] : 0.0;
    d.interference[t] = p_all[t] - d.target[t];
    d.artifacts[t] = s - p_all[t];
  }
  return d;
}

}  // namespace

double clamp_db(double value_db) {
  if (std::isnan(value_db)) return value_db;
  return std::clamp(value_db, -kClampDb, kClampDb);
}

Decomposition bss_decompose(std::span<const double> estimate, std::span<const AudioClip> references,
                            std::size_t index, std::size_t filter_len) {
  if (filter_len == 0) throw Error(Errc::InvalidParams, "filter length must be positive");
  if (index >= references.size()) throw Error(Errc::InvalidParams, "reference index out of range");
  check_lengths(references, estimate.size(), "reference");
  FastCorrelator corr(estimate.size(), filter_len);
  std::vector<Spectrum> spectra;
  std::vector<const Spectrum*> active;
  spectra.reserve(references.size());
  for (const auto& r : references) spectra.push_back(corr.spectrum(r.samples));
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (energy(references[i].samples) >= kSilentEnergy) active.push_back(&spectra[i]);
  }
  if (energy(references[index].samples) < kSilentEnergy) throw Error(Errc::SilentReference, "reference is silent");
  Projector own(corr, {&spectra[index]}, filter_len);
  Projector all(corr, active, filter_len);
  return decompose_with(corr, own, all, estimate, filter_len);
}

EvalReport bss_eval(std::span<const AudioClip> estimates, std::span<const AudioClip> references,
                    std::size_t filter_len, const AudioClip* mixture, std::span<const std::string> labels) {
  if (filter_len == 0) throw Error(Errc::InvalidParams, "filter length must be positive");
  if (estimates.size() != references.size() || estimates.empty()) {
    throw Error(Errc::LengthMismatch, std::to_string(estimates.size()) + " estimates vs " +
                                          std::to_string(references.size()) + " references");
  }
  const std::size_t n = references.front().samples.size();
  if (n == 0) throw Error(Errc::LengthMismatch, "empty signals");
  check_lengths(references, n, "reference");
  check_lengths(estimates, n, "estimate");
  if (mixture && mixture->samples.size() != n) throw Error(Errc::LengthMismatch, "mixture length differs");

  FastCorrelator corr(n, filter_len);
  std::vector<Spectrum> spectra;
  spectra.reserve(references.size());
  std::vector<const Spectrum*> active;
  std::vector<bool> silent(references.size());
  for (std::size_t i = 0; i < references.size(); ++i) {
    spectra.push_back(corr.spectrum(references[i].samples));
    silent[i] = energy(references[i].samples) < kSilentEnergy;
    if (!silent[i]) active.push_back(&spectra[i]);
  }

  EvalReport report;
  report.filter_len = filter_len;
  std::optional<Projector> all;
  if (!active.empty()) all.emplace(corr, active, filter_len);
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    SourceMetrics m;
    m.label = i < labels.size() ? labels[i] : "source" + std::to_string(i);
    if (!silent[i]) {
      Projector own(corr, {&spectra[i]}, filter_len);
      const Metrics x = metrics_from(decompose_with(corr, own, *all, estimates[i].samples, filter_len));
      m.sdr = x.sdr;
      m.sir = x.sir;
      m.sar = x.sar;
      if (mixture) {
        const double sdr_est = metrics_from(decompose_with(corr, own, own, estimates[i].samples, filter_len)).sdr;
        const double sdr_mix = metrics_from(decompose_with(corr, own, own, mixture->samples, filter_len)).sdr;
        m.nsdr = sdr_est - sdr_mix;
      }
    }
    report.sources.push_back(std::move(m));
  }
  return report;
}

double sdr_single(const AudioClip& estimate, const AudioClip& reference, std::size_t filter_len) {
  if (filter_len == 0) throw Error(Errc::InvalidParams, "filter length must be positive");
  if (estimate.samples.size() != reference.samples.size()) throw Error(Errc::LengthMismatch, "estimate vs reference");
  if (energy(reference.samples) < kSilentEnergy) throw Error(Errc::SilentReference, "reference is silent");
  FastCorrelator corr(reference.samples.size(), filter_len);
  const Spectrum ref = corr.spectrum(reference.samples);
  Projector own(corr, {&ref}, filter_len);
  return metrics_from(decompose_with(corr, own, own, estimate.samples, filter_len)).sdr;
}

double nsdr(const AudioClip& estimate, const AudioClip& reference, const AudioClip& mixture, std::size_t filter_len) {
  if (mixture.samples.size() != reference.samples.size()) throw Error(Errc::LengthMismatch, "mixture vs reference");
  if (filter_len == 0) throw Error(Errc::InvalidParams, "filter length must be positive");
  if (estimate.samples.size() != reference.samples.size()) throw Error(Errc::LengthMismatch, "estimate vs reference");
  if (energy(reference.samples) < kSilentEnergy) throw Error(Errc::SilentReference, "reference is silent");
  FastCorrelator corr(reference.samples.size(), filter_len);
  const Spectrum ref = corr.spectrum(reference.samples);
  Projector own(corr, {&ref}, filter_len);
  const double a = metrics_from(decompose_with(corr, own, own, estimate.samples, filter_len)).sdr;
  const double b = metrics_from(decompose_with(corr, own, own, mixture.samples, filter_len)).sdr;
  return a - b;
}

double smoothing_gain(const AudioClip& ref, const AudioClip& bin_recon, const AudioClip& smooth_recon) {
  const std::size_t n = ref.samples.size();
  if (bin_recon.samples.size() != n || smooth_recon.samples.size() != n) {
    throw Error(Errc::LengthMismatch, "smoothing gain inputs differ in length");
  }
  double e_bin = 0.0, e_smooth = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double db = ref.samples[t] - bin_recon.samples[t];
    const double ds = ref.samples[t] - smooth_recon.samples[t];
    e_bin += db * db;
    e_smooth += ds * ds;
  }
  if (e_bin <= 0.0) throw Error(Errc::DegenerateDenominator, "binary reconstruction equals the reference");
  if (e_smooth <= 0.0) return kClampDb;
  // rms ratio in amplitude dB equals the energy ratio in power dB.
  return clamp_db(10.0 * std::log10(e_bin / e_smooth));
}

double snr_to_reference(const AudioClip& test, const AudioClip& ref) {
  if (test.samples.size() != ref.samples.size()) throw Error(Errc::LengthMismatch, "test vs reference");
  const double e_ref = energy(ref.samples);
  if (e_ref < kSilentEnergy) throw Error(Errc::SilentReference, "reference is silent");
  double e_err = 0.0;
  for (std::size_t t = 0; t < ref.samples.size(); ++t) {
    const double d = ref.samples[t] - test.samples[t];
    e_err += d * d;
  }
  return ratio_db(e_ref, e_err);
}

std::string eval_report_jsonl(const EvalReport& report, const std::string& clip_id, const nlohmann::json& config) {
  std::string out;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (std::size_t i = 0; i < report.sources.size(); ++i) {
    const auto& s = report.sources[i];
    nlohmann::ordered_json rec;
    rec["clip"] = clip_id;
    rec["source_index"] = i;
    rec["label"] = s.label;
    rec["sdr"] = opt(s.sdr);
    rec["sir"] = opt(s.sir);
    rec["sar"] = opt(s.sar);
    rec["nsdr"] = opt(s.nsdr);
    rec["filter_len"] = report.filter_len;
    rec["clamp_db"] = report.clamp_db;
    rec["config"] = config;
    out += rec.dump() + "\n";
  }
  return out;
}

}  // namespace vamix
