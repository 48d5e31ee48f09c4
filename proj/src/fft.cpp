#include "vamix/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace vamix::fft {
namespace {

// FFTW planning is not thread-safe, execution with the new-array interface is.
// Plans are created once per (size, direction) and cached for the process.
struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  ~PlanPair() {
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

struct Buffer {
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
  explicit Buffer(std::size_t n)
      : real(fftw_alloc_real(n)), cplx(fftw_alloc_complex(n / 2 + 1)) {}
  ~Buffer() {
    fftw_free(real);
    fftw_free(cplx);
  }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
};

const PlanPair& plans_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<PlanPair>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;
  Buffer scratch(n);
  auto pair = std::make_unique<PlanPair>();
  const int size = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  pair->r2c = fftw_plan_dft_r2c_1d(size, scratch.real, scratch.cplx, flags);
  pair->c2r = fftw_plan_dft_c2r_1d(size, scratch.cplx, scratch.real, flags | FFTW_DESTROY_INPUT);
  if (!pair->r2c || !pair->c2r) throw std::runtime_error("FFTW plan creation failed");
  return *cache.emplace(n, std::move(pair)).first->second;
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void forward(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  if (out.size() != n / 2 + 1) throw std::invalid_argument("fft::forward: output must hold n/2+1 bins");
  const PlanPair& p = plans_for(n);
  Buffer buf(n);
  std::copy(in.begin(), in.end(), buf.real);
  fftw_execute_dft_r2c(p.r2c, buf.real, buf.cplx);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {buf.cplx[k][0], buf.cplx[k][1]};
}

void inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  const std::size_t n = out.size();
  if (in.size() != n / 2 + 1) throw std::invalid_argument("fft::inverse: input must hold n/2+1 bins");
  const PlanPair& p = plans_for(n);
  Buffer buf(n);
  for (std::size_t k = 0; k < in.size(); ++k) {
    buf.cplx[k][0] = in[k].real();
    buf.cplx[k][1] = in[k].imag();
  }
  fftw_execute_dft_c2r(p.c2r, buf.cplx, buf.real);
  std::copy(buf.real, buf.real + n, out.begin());
}

}  // namespace vamix::fft
