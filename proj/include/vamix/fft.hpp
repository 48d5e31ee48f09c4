#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace vamix::fft {

/// Real-to-complex transform of length n: writes n/2+1 bins. Unnormalized.
void forward(std::span<const double> in, std::span<std::complex<double>> out);

/// Complex-to-real transform of length n = out.size() from n/2+1 bins.
/// Unnormalized: forward then inverse scales by n. The imaginary parts of the
/// DC and (even n) Nyquist bins are ignored.
void inverse(std::span<const std::complex<double>> in, std::span<double> out);

std::size_t next_pow2(std::size_t n);

}  // namespace vamix::fft
