/* operators.hpp: spectral calculus on the torus.
 *
 * laplacian and gradient are exact on resolved modes. The gradient (and
 * divergence) zero the Nyquist frequency of the differentiated direction:
 * an odd derivative of the unpaired mode has no consistent real
 * representation, and dropping it keeps div(grad f) = lap f on all modes
 * below Nyquist, which is where band-limited data lives.
 */

#ifndef VPME_OPERATORS_HPP
#define VPME_OPERATORS_HPP

#include <cmath>

#include "vpme/fft.hpp"

namespace vpme {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline ScalarField laplacian(const ScalarField& f) {
  Spectrum s = fft_forward(f);
  for_each_mode(f.grid, [&](std::size_t i, int kx, int ky) {
    double k2 = kTwoPi * kTwoPi * (static_cast<double>(kx) * kx +
                                   static_cast<double>(ky) * ky);
    s.c[i] *= -k2;
  });
  return fft_inverse(s);
}

inline VectorField gradient(const ScalarField& f) {
  Spectrum s = fft_forward(f);
  VectorField g(f.grid);
  int nyq = f.grid.n / 2;
  for (int c = 0; c < f.grid.dim; ++c) {
    Spectrum sc(f.grid);
    for_each_mode(f.grid, [&](std::size_t i, int kx, int ky) {
      int k = (c == 0) ? kx : ky;
      if (k == nyq || k == -nyq) {
        sc.c[i] = 0.0;
        return;
      }
      sc.c[i] = s.c[i] * std::complex<double>(0.0, kTwoPi * k);
    });
    spectral_workspace(f.grid).inverse(sc.c.data(), g.comp[c].data());
  }
  return g;
}

inline ScalarField divergence(const VectorField& f) {
  Spectrum acc(f.grid);
  int nyq = f.grid.n / 2;
  for (int c = 0; c < f.grid.dim; ++c) {
    ScalarField comp;
    comp.grid = f.grid;
    comp.v = f.comp[c];
    Spectrum s = fft_forward(comp);
    for_each_mode(f.grid, [&](std::size_t i, int kx, int ky) {
      int k = (c == 0) ? kx : ky;
      if (k == nyq || k == -nyq) return;
      acc.c[i] += s.c[i] * std::complex<double>(0.0, kTwoPi * k);
    });
  }
  return fft_inverse(acc);
}

/* Solve lap u = g for the unique zero-mean u. The right side must already be
 * mean free; anything else has no periodic solution. */
inline ScalarField inverse_laplacian(const ScalarField& g,
                                     double mean_tol = 1e-10) {
  Spectrum s = fft_forward(g);
  if (std::fabs(s.c[0].real()) > mean_tol)
    throw DomainError("inverse_laplacian: right side has nonzero mean " +
                      std::to_string(s.c[0].real()));
  for_each_mode(g.grid, [&](std::size_t i, int kx, int ky) {
    if (kx == 0 && ky == 0) {
      s.c[i] = 0.0;
      return;
    }
    double k2 = kTwoPi * kTwoPi * (static_cast<double>(kx) * kx +
                                   static_cast<double>(ky) * ky);
    s.c[i] /= -k2;
  });
  return fft_inverse(s);
}

}  // namespace vpme

#endif
