#include "vamix/masking.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>

#include "vamix/error.hpp"
#include "vamix/fft.hpp"
#include "vamix/random.hpp"

namespace vamix {
namespace {

constexpr double kRatioEpsilon = 1e-12;
constexpr std::uint32_t kMaskFileVersion = 1;

void check_stems(std::span<const MagnitudeSpectrogram> stems) {
  if (stems.size() < 2) throw Error(Errc::DimensionMismatch, "need at least two stems");
  for (const auto& s : stems) {
    if (s.data.rows() != stems[0].data.rows() || s.data.cols() != stems[0].data.cols()) {
      throw Error(Errc::DimensionMismatch, "stem spectrograms differ in shape");
    }
  }
}

std::string label_for(std::span<const std::string> labels, std::size_t i) {
  if (i < labels.size()) return labels[i];
  return "source" + std::to_string(i);
}

std::string shape_string(std::size_t bins, std::size_t frames) {
  return std::to_string(bins) + "x" + std::to_string(frames);
}

}  // namespace

std::string_view to_string(MaskKind kind) noexcept {
  switch (kind) {
    case MaskKind::Binary: return "binary";
    case MaskKind::Ratio: return "ratio";
    case MaskKind::Smoothed: return "smoothed";
    case MaskKind::External: return "external";
  }
  return "unknown";
}

void validate_mask(const Mask& mask) {
  for (Eigen::Index j = 0; j < mask.data.cols(); ++j) {
    for (Eigen::Index i = 0; i < mask.data.rows(); ++i) {
      const double v = mask.data(i, j);
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidParams, "mask value outside [0,1]");
      if (mask.kind == MaskKind::Binary && v != 0.0 && v != 1.0) {
        throw Error(Errc::InvalidParams, "binary mask holds a non-binary value");
      }
    }
  }
}

std::vector<std::string> MaskSet::labels() const {
  std::vector<std::string> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(m.source_label);
  return out;
}

void MaskSet::validate() const {
  if (masks.empty()) throw Error(Errc::DimensionMismatch, "mask set is empty");
  if (bins() != stft_params.bins()) {
    throw Error(Errc::DimensionMismatch, "masks have " + std::to_string(bins()) + " bins, STFT params imply " +
                                             std::to_string(stft_params.bins()));
  }
  expect_shape(bins(), frames());
}

void MaskSet::expect_shape(std::size_t b, std::size_t f) const {
  for (const auto& m : masks) {
    if (m.bins() != b || m.frames() != f) {
      throw Error(Errc::DimensionMismatch, "mask '" + m.source_label + "' is " + shape_string(m.bins(), m.frames()) +
                                               ", expected " + shape_string(b, f));
    }
  }
}

MaskSet ideal_binary_masks(std::span<const MagnitudeSpectrogram> stem_mags, std::span<const std::string> labels) {
  check_stems(stem_mags);
  const Eigen::Index rows = stem_mags[0].data.rows();
  const Eigen::Index cols = stem_mags[0].data.cols();
  MaskSet set;
  set.stft_params = stem_mags[0].params;
  for (std::size_t i = 0; i < stem_mags.size(); ++i) {
    set.masks.push_back(Mask{RealMatrix::Zero(rows, cols), MaskKind::Binary, label_for(labels, i)});
  }
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::size_t best = 0;
      double best_mag = stem_mags[0].data(r, j);
      for (std::size_t i = 1; i < stem_mags.size(); ++i) {
        // Strict comparison keeps ties on the lowest index.
        if (stem_mags[i].data(r, j) > best_mag) {
          best = i;
          best_mag = stem_mags[i].data(r, j);
        }
      }
      set.masks[best].data(r, j) = 1.0;
    }
  }
  return set;
}

MaskSet ideal_ratio_masks(std::span<const MagnitudeSpectrogram> stem_mags, std::span<const std::string> labels) {
  check_stems(stem_mags);
  RealMatrix total = RealMatrix::Constant(stem_mags[0].data.rows(), stem_mags[0].data.cols(), kRatioEpsilon);
  for (const auto& s : stem_mags) total += s.data;
  MaskSet set;
  set.stft_params = stem_mags[0].params;
  for (std::size_t i = 0; i < stem_mags.size(); ++i) {
    RealMatrix m = stem_mags[i].data.cwiseQuotient(total).cwiseMin(1.0).cwiseMax(0.0);
    set.masks.push_back(Mask{std::move(m), MaskKind::Ratio, label_for(labels, i)});
  }
  return set;
}

Mask random_binary_mask(std::size_t bins, std::size_t frames, std::uint64_t seed, double density) {
  if (!(density >= 0.0 && density <= 1.0)) throw Error(Errc::InvalidParams, "density must lie in [0,1]");
  Rng rng(seed);
  Mask mask{RealMatrix(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(frames)), MaskKind::Binary, "random"};
  // Frame-major fill order matches the on-disk layout.
  for (Eigen::Index j = 0; j < mask.data.cols(); ++j) {
    for (Eigen::Index i = 0; i < mask.data.rows(); ++i) {
      mask.data(i, j) = uniform01(rng) < density ? 1.0 : 0.0;
    }
  }
  return mask;
}

Mask corrupt_binary_mask(const Mask& mask, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error(Errc::InvalidParams, "flip fraction must lie in [0,1]");
  Rng rng(seed);
  Mask out = mask;
  for (Eigen::Index j = 0; j < out.data.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.data.rows(); ++i) {
      if (uniform01(rng) < rho) out.data(i, j) = out.data(i, j) >= 0.5 ? 0.0 : 1.0;
    }
  }
  return out;
}

Mask smooth_zlbm(const Mask& mask, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(Errc::InvalidAlpha, "alpha must lie in [0,1)");
  if (mask.kind != MaskKind::Binary && mask.kind != MaskKind::External) {
    throw Error(Errc::InvalidParams, "zero-phase smoothing expects a binary or external mask");
  }
  const Eigen::Index frames = mask.data.cols();
  Mask out{RealMatrix(mask.data.rows(), frames), MaskKind::Smoothed, mask.source_label};
  if (frames == 0) return out;
  const double b = 1.0 - alpha;
  const double tail_gain = alpha / (1.0 + alpha);
  std::vector<double> y(static_cast<std::size_t>(frames));
  for (Eigen::Index r = 0; r < mask.data.rows(); ++r) {
    double state = mask.data(r, 0);
    for (Eigen::Index t = 0; t < frames; ++t) {
      state = b * mask.data(r, t) + alpha * state;
      y[static_cast<std::size_t>(t)] = state;
    }
    const double edge = mask.data(r, frames - 1);
    state = edge + (y.back() - edge) * tail_gain;
    for (Eigen::Index t = frames - 1; t >= 0; --t) {
      state = b * y[static_cast<std::size_t>(t)] + alpha * state;
      out.data(r, t) = std::clamp(state, 0.0, 1.0);
    }
  }
  return out;
}

Mask smooth_cbm(const Mask& mask, std::size_t lifter_cutoff, double floor_db) {
  if (mask.kind != MaskKind::Binary) throw Error(Errc::InvalidParams, "cepstral smoothing expects a binary mask");
  const std::size_t bins = mask.bins();
  if (bins < 2) throw Error(Errc::InvalidParams, "cepstral smoothing needs at least two bins");
  if (lifter_cutoff >= bins) throw Error(Errc::InvalidParams, "lifter cutoff must be below the bin count");
  if (!std::isfinite(floor_db) || floor_db >= 0.0) throw Error(Errc::InvalidParams, "floor_db must be negative");

  const double floor = std::pow(10.0, floor_db / 20.0);
  const std::size_t n = 2 * (bins - 1);
  Mask out{RealMatrix(mask.data.rows(), mask.data.cols()), MaskKind::Smoothed, mask.source_label};
  std::vector<std::complex<double>> spectrum(bins);
  std::vector<double> cepstrum(n);
  for (Eigen::Index t = 0; t < mask.data.cols(); ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      spectrum[k] = std::log(std::max(mask.data(static_cast<Eigen::Index>(k), t), floor));
    }
    fft::inverse(spectrum, cepstrum);
    for (double& c : cepstrum) c /= static_cast<double>(n);
    // Real cepstrum of an even sequence: quefrency q lives at q and n-q.
    for (std::size_t q = lifter_cutoff + 1; q <= n - lifter_cutoff - 1 && q < n; ++q) cepstrum[q] = 0.0;
    fft::forward(cepstrum, spectrum);
    for (std::size_t k = 0; k < bins; ++k) {
      out.data(static_cast<Eigen::Index>(k), t) = std::clamp(std::exp(spectrum[k].real()), 0.0, 1.0);
    }
  }
  return out;
}

MaskSet smooth_zlbm(const MaskSet& set, double alpha) {
  MaskSet out{{}, set.stft_params};
  for (const auto& m : set.masks) out.masks.push_back(smooth_zlbm(m, alpha));
  return out;
}

MaskSet smooth_cbm(const MaskSet& set, std::size_t lifter_cutoff, double floor_db) {
  MaskSet out{{}, set.stft_params};
  for (const auto& m : set.masks) out.masks.push_back(smooth_cbm(m, lifter_cutoff, floor_db));
  return out;
}

// ---------------------------------------------------------------------------
// Mask-set file
//
//   "TFMK" | version u32 | n_sources u32 | bins u32 | frames u32 |
//   window_size u32 | hop u32 | sample_rate u32 |
//   per source: label_len u16, label bytes, kind u8, bins*frames f32
//
// All integers little-endian; values frame-major.
// ---------------------------------------------------------------------------

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw Error(Errc::MalformedFile, "mask file truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_mask_set(const MaskSet& set) {
  set.validate();
  std::vector<std::uint8_t> out;
  const std::size_t cells = set.bins() * set.frames();
  out.reserve(32 + set.size() * (cells * 4 + 64));
  for (char c : {'T', 'F', 'M', 'K'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kMaskFileVersion);
  put_u32(out, static_cast<std::uint32_t>(set.size()));
  put_u32(out, static_cast<std::uint32_t>(set.bins()));
  put_u32(out, static_cast<std::uint32_t>(set.frames()));
  put_u32(out, static_cast<std::uint32_t>(set.stft_params.window_size));
  put_u32(out, static_cast<std::uint32_t>(set.stft_params.hop));
  put_u32(out, static_cast<std::uint32_t>(set.stft_params.sample_rate));
  for (const auto& m : set.masks) {
    if (m.source_label.size() > 0xFFFF) throw Error(Errc::InvalidParams, "label longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(m.source_label.size()));
    out.insert(out.end(), m.source_label.begin(), m.source_label.end());
    out.push_back(static_cast<std::uint8_t>(m.kind));
    const double* p = m.data.data();
    for (std::size_t c = 0; c < cells; ++c) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p[c])));
  }
  return out;
}

MaskSet decode_mask_set(std::span<const std::uint8_t> bytes) {
  Cursor cur(bytes);
  auto magic = cur.take(4);
  if (!std::equal(magic.begin(), magic.end(), "TFMK")) throw Error(Errc::MalformedFile, "bad magic");
  const std::uint32_t version = cur.u32();
  if (version != kMaskFileVersion) {
    throw Error(Errc::VersionUnsupported, "mask file version " + std::to_string(version));
  }
  const std::uint32_t n_sources = cur.u32();
  const std::uint32_t bins = cur.u32();
  const std::uint32_t frames = cur.u32();
  MaskSet set;
  set.stft_params.window_size = cur.u32();
  set.stft_params.hop = cur.u32();
  set.stft_params.fft_size = set.stft_params.window_size;
  set.stft_params.sample_rate = static_cast<int>(cur.u32());
  if (n_sources == 0) throw Error(Errc::MalformedFile, "mask file declares zero sources");
  try {
    set.stft_params.validate();
  } catch (const Error& e) {
    throw Error(Errc::MalformedFile, std::string("embedded STFT params invalid: ") + e.what());
  }
  if (bins != set.stft_params.bins()) {
    throw Error(Errc::DimensionMismatch, "header bins " + std::to_string(bins) + " vs window_size " +
                                             std::to_string(set.stft_params.window_size) + " implying " +
                                             std::to_string(set.stft_params.bins()));
  }
  const std::size_t cells = static_cast<std::size_t>(bins) * frames;
  for (std::uint32_t s = 0; s < n_sources; ++s) {
    const std::uint16_t label_len = cur.u16();
    auto label = cur.take(label_len);
    const std::uint8_t kind = cur.u8();
    if (kind > 3) throw Error(Errc::MalformedFile, "unknown mask kind " + std::to_string(kind));
    Mask m{RealMatrix(bins, frames), static_cast<MaskKind>(kind), std::string(label.begin(), label.end())};
    auto raw = cur.take(cells * 4);
    double* p = m.data.data();
    for (std::size_t c = 0; c < cells; ++c) {
      const std::uint8_t* q = raw.data() + 4 * c;
      std::uint32_t u = static_cast<std::uint32_t>(q[0]) | (static_cast<std::uint32_t>(q[1]) << 8) |
                        (static_cast<std::uint32_t>(q[2]) << 16) | (static_cast<std::uint32_t>(q[3]) << 24);
      p[c] = static_cast<double>(std::bit_cast<float>(u));
    }
    try {
      validate_mask(m);
    } catch (const Error& e) {
      throw Error(Errc::MalformedFile, "source '" + m.source_label + "': " + e.what());
    }
    set.masks.push_back(std::move(m));
  }
  if (!cur.at_end()) throw Error(Errc::MalformedFile, "trailing bytes after last source");
  return set;
}

std::string mask_set_sidecar_json(const MaskSet& set) {
  nlohmann::ordered_json j;
  j["format"] = "TFMK";
  j["version"] = kMaskFileVersion;
  j["n_sources"] = set.size();
  j["bins"] = set.bins();
  j["frames"] = set.frames();
  j["window_size"] = set.stft_params.window_size;
  j["hop"] = set.stft_params.hop;
  j["sample_rate"] = set.stft_params.sample_rate;
  j["sources"] = nlohmann::ordered_json::array();
  for (const auto& m : set.masks) {
    j["sources"].push_back({{"label", m.source_label}, {"kind", std::string(to_string(m.kind))}, {"mean", m.data.mean()}});
  }
  return j.dump(2) + "\n";
}

void write_mask_set(const std::filesystem::path& path, const MaskSet& set) {
  const auto bytes = encode_mask_set(set);
  write_file_bytes(path, bytes);
  auto sidecar = path;
  sidecar.replace_extension(".json");
  const std::string text = mask_set_sidecar_json(set);
  write_file_bytes(sidecar, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

MaskSet read_mask_set(const std::filesystem::path& path) { return decode_mask_set(read_file_bytes(path)); }

}  // namespace vamix
