/* fft.hpp: FFTW-backed transforms between grid fields and Fourier modes.
 *
 * Convention: the forward transform carries the 1/n^d factor, so the k = 0
 * coefficient is the grid mean and a unit-mass convolution kernel multiplies
 * spectra without any extra volume factor.
 *
 * Real-to-complex layout. 1d: k = 0 .. n/2 (n/2+1 entries). 2d: row index
 * runs over the full set {0, 1, .., n/2, -n/2+1, .., -1} in FFTW order and
 * the column index over ky = 0 .. n/2, giving n*(n/2+1) entries.
 *
 * Plans are created once per (dim, n) under a global mutex (the FFTW planner
 * is not thread safe) with FFTW_ESTIMATE, which never measures at runtime, so
 * planning is deterministic. Each thread keeps its own workspace.
 */

#ifndef VPME_FFT_HPP
#define VPME_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "vpme/grid.hpp"

namespace vpme {

struct Spectrum {
  TorusGrid grid;
  std::vector<std::complex<double>> c;  // half-spectrum, layout above

  Spectrum() = default;
  explicit Spectrum(const TorusGrid& g)
      : grid(g), c(spectrum_size(g), std::complex<double>(0.0, 0.0)) {}

  static std::size_t spectrum_size(const TorusGrid& g) {
    std::size_t half = static_cast<std::size_t>(g.n / 2 + 1);
    return g.dim == 1 ? half : static_cast<std::size_t>(g.n) * half;
  }
};

/* signed integer frequency for a full-range index in FFTW order */
inline int fft_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

class SpectralWorkspace {
 public:
  explicit SpectralWorkspace(const TorusGrid& g) : grid_(g) {
    nreal_ = g.cells();
    ncplx_ = Spectrum::spectrum_size(g);
    real_ = fftw_alloc_real(nreal_);
    cplx_ = fftw_alloc_complex(ncplx_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (g.dim == 1) {
      fwd_ = fftw_plan_dft_r2c_1d(g.n, real_, cplx_, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_c2r_1d(g.n, cplx_, real_, FFTW_ESTIMATE);
    } else {
      fwd_ = fftw_plan_dft_r2c_2d(g.n, g.n, real_, cplx_, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_c2r_2d(g.n, g.n, cplx_, real_, FFTW_ESTIMATE);
    }
    if (!fwd_ || !bwd_) throw Error("fftw plan creation failed");
  }

  ~SpectralWorkspace() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(cplx_);
  }

  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  void forward(const double* in, std::complex<double>* out) {
    for (std::size_t i = 0; i < nreal_; ++i) real_[i] = in[i];
    fftw_execute(fwd_);
    double scale = 1.0 / static_cast<double>(nreal_);
    for (std::size_t i = 0; i < ncplx_; ++i)
      out[i] = std::complex<double>(cplx_[i][0], cplx_[i][1]) * scale;
  }

  /* c2r destroys its input, which is why the spectrum is copied in */
  void inverse(const std::complex<double>* in, double* out) {
    for (std::size_t i = 0; i < ncplx_; ++i) {
      cplx_[i][0] = in[i].real();
      cplx_[i][1] = in[i].imag();
    }
    fftw_execute(bwd_);
    for (std::size_t i = 0; i < nreal_; ++i) out[i] = real_[i];
  }

  const TorusGrid& grid() const { return grid_; }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  TorusGrid grid_;
  std::size_t nreal_ = 0, ncplx_ = 0;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

/* per-thread workspace cache keyed by (dim, n) */
inline SpectralWorkspace& spectral_workspace(const TorusGrid& g) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<SpectralWorkspace>>
      cache;
  auto key = std::make_pair(g.dim, g.n);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<SpectralWorkspace>(g)).first;
  return *it->second;
}

inline Spectrum fft_forward(const ScalarField& f) {
  Spectrum s(f.grid);
  spectral_workspace(f.grid).forward(f.v.data(), s.c.data());
  return s;
}

inline ScalarField fft_inverse(const Spectrum& s) {
  ScalarField f(s.grid);
  spectral_workspace(s.grid).inverse(s.c.data(), f.v.data());
  return f;
}

/* Visit every stored coefficient with its signed integer frequencies.
 * F receives (flat_index, kx, ky); ky is 0 in one dimension. */
template <class F>
void for_each_mode(const TorusGrid& g, F&& f) {
  if (g.dim == 1) {
    for (int k = 0; k <= g.n / 2; ++k) f(static_cast<std::size_t>(k), k, 0);
  } else {
    int half = g.n / 2 + 1;
    for (int i = 0; i < g.n; ++i) {
      int kx = fft_freq(i, g.n);
      for (int j = 0; j < half; ++j)
        f(static_cast<std::size_t>(i) * half + j, kx, j);
    }
  }
}

}  // namespace vpme

#endif
