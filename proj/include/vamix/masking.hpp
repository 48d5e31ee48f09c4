#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vamix/spectral.hpp"

namespace vamix {

enum class MaskKind : std::uint8_t { Binary = 0, Ratio = 1, Smoothed = 2, External = 3 };

std::string_view to_string(MaskKind kind) noexcept;

/// Per-bin weight in [0, 1] over a bins x frames grid.
struct Mask {
  RealMatrix data;
  MaskKind kind = MaskKind::External;
  std::string source_label;

  std::size_t bins() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t frames() const noexcept { return static_cast<std::size_t>(data.cols()); }
};

/// Checks the range invariant (and {0,1} for binary masks).
void validate_mask(const Mask& mask);

struct MaskSet {
  std::vector<Mask> masks;
  StftParams stft_params;

  std::size_t size() const noexcept { return masks.size(); }
  std::size_t bins() const noexcept { return masks.empty() ? 0 : masks.front().bins(); }
  std::size_t frames() const noexcept { return masks.empty() ? 0 : masks.front().frames(); }
  std::vector<std::string> labels() const;

  /// Throws DimensionMismatch when masks disagree with each other or with
  /// the bin count the STFT parameters imply.
  void validate() const;
  /// Throws DimensionMismatch unless every mask is bins x frames.
  void expect_shape(std::size_t bins, std::size_t frames) const;
};

MaskSet ideal_binary_masks(std::span<const MagnitudeSpectrogram> stem_mags,
                           std::span<const std::string> labels = {});
MaskSet ideal_ratio_masks(std::span<const MagnitudeSpectrogram> stem_mags,
                          std::span<const std::string> labels = {});

Mask random_binary_mask(std::size_t bins, std::size_t frames, std::uint64_t seed, double density = 0.5);

/// Flips each bin of a binary mask with probability `rho`. Used to emulate an
/// imperfect mask estimator.
Mask corrupt_binary_mask(const Mask& mask, double rho, std::uint64_t seed);

/// Zero-phase low-pass smoothing along time: a single-pole filter
/// y[t] = (1-alpha) x[t] + alpha y[t-1] run forward, then backward over its
/// output. Both passes start from steady state, so the combined operator is
/// convolution with the symmetric kernel (1-alpha)/(1+alpha) * alpha^|k| over
/// the edge-extended row.
Mask smooth_zlbm(const Mask& mask, double alpha);

/// Cepstral smoothing per frame: log of the floored mask, keep quefrencies up
/// to `lifter_cutoff`, back to the linear domain, clamp to [0, 1].
Mask smooth_cbm(const Mask& mask, std::size_t lifter_cutoff, double floor_db = -80.0);

MaskSet smooth_zlbm(const MaskSet& set, double alpha);
MaskSet smooth_cbm(const MaskSet& set, std::size_t lifter_cutoff, double floor_db = -80.0);

// Binary interchange format ("TFMK", version 1) plus a JSON sidecar.
std::vector<std::uint8_t> encode_mask_set(const MaskSet& set);
MaskSet decode_mask_set(std::span<const std::uint8_t> bytes);
std::string mask_set_sidecar_json(const MaskSet& set);

/// Writes `path` and `path` with extension replaced by ".json".
void write_mask_set(const std::filesystem::path& path, const MaskSet& set);
MaskSet read_mask_set(const std::filesystem::path& path);

}  // namespace vamix
