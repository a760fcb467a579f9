/* mollifier.hpp: compactly supported bump and periodic convolution.
 *
 * chi_r(x) = r^{-d} chi(x/r) built from the standard bump exp(-1/(1-t^2)),
 * sampled on the grid and renormalised so the discrete grid integral is
 * exactly 1 (the continuum normalising constant would leave O(h^2) mass
 * error, and exact unit mass is what keeps convolution mean-preserving).
 *
 * Convolution runs through the FFT. The kernel transform is built from the
 * offset layout (array index p corresponds to displacement p*h), not the
 * coordinate layout fields use; mixing those two up shifts every convolution
 * by half the domain.
 */

#ifndef VPME_MOLLIFIER_HPP
#define VPME_MOLLIFIER_HPP

#include "vpme/kernel.hpp"

namespace vpme {

struct Mollifier {
  TorusGrid grid;
  double r = 0.0;
  ScalarField chi;        // coordinate layout, bump centred at x = 0
  Spectrum chi_hat;       // transform of the offset layout, used by convolve
};

inline Mollifier make_mollifier(const TorusGrid& g, double r) {
  if (!(r > 0.0) || r > 0.25)
    throw ConfigError("mollifier: width must lie in (0, 1/4], got " +
                      std::to_string(r));
  if (r < 2.0 * g.spacing())
    throw UnresolvableWidth("mollifier: width " + std::to_string(r) +
                            " under-resolved, need r >= 2h = " +
                            std::to_string(2.0 * g.spacing()));

  Mollifier m;
  m.grid = g;
  m.r = r;
  m.chi = ScalarField(g);

  // sample the bump; torus distances make the sampling exactly even
  auto bump = [&](double dist) {
    double t2 = (dist / r) * (dist / r);
    return t2 < 1.0 ? std::exp(-1.0 / (1.0 - t2)) : 0.0;
  };
  if (g.dim == 1) {
    for (int i = 0; i < g.n; ++i)
      m.chi.v[g.idx(i)] = bump(torus_distance1(g.coord(i), 0.0));
  } else {
    for (int i = 0; i < g.n; ++i) {
      double dx = torus_distance1(g.coord(i), 0.0);
      for (int j = 0; j < g.n; ++j) {
        double dy = torus_distance1(g.coord(j), 0.0);
        m.chi.v[g.idx(i, j)] = bump(std::sqrt(dx * dx + dy * dy));
      }
    }
  }

  double mass = m.chi.integral();
  if (!(mass > 0.0)) throw UnresolvableWidth("mollifier: sampled bump is empty");
  m.chi *= 1.0 / mass;

  // offset layout: entry p holds chi at displacement p*h, i.e. roll by n/2
  ScalarField shifted(g);
  if (g.dim == 1) {
    for (int i = 0; i < g.n; ++i)
      shifted.v[g.idx(i)] = m.chi.v[g.idx((i + g.n / 2) % g.n)];
  } else {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        shifted.v[g.idx(i, j)] =
            m.chi.v[g.idx((i + g.n / 2) % g.n, (j + g.n / 2) % g.n)];
  }
  m.chi_hat = fft_forward(shifted);
  return m;
}

inline ScalarField convolve(const Mollifier& m, const ScalarField& f) {
  require_same_grid(m.grid, f.grid, "convolve");
  Spectrum s = fft_forward(f);
  for (std::size_t i = 0; i < s.c.size(); ++i) s.c[i] *= m.chi_hat.c[i];
  return fft_inverse(s);
}

inline VectorField convolve(const Mollifier& m, const VectorField& f) {
  require_same_grid(m.grid, f.grid, "convolve");
  VectorField out(f.grid);
  for (int c = 0; c < f.grid.dim; ++c) {
    ScalarField comp;
    comp.grid = f.grid;
    comp.v = f.comp[c];
    out.comp[c] = convolve(m, comp).v;
  }
  return out;
}

/* B(r) = sup over x != 0 of |chi_r * K|(x) / (1 + |x|^{1-d}).
 * The interesting fact is that B stays bounded as r shrinks: smoothing the
 * Coulomb kernel cannot beat the kernel's own envelope. */
inline double regularised_kernel_bound(const TorusGrid& g, double r) {
  Mollifier m = make_mollifier(g, r);
  CoulombKernelView kv = coulomb_kernel(g);
  VectorField sk = convolve(m, kv.field);

  double best = 0.0;
  double origin[2] = {0.0, 0.0};
  if (g.dim == 1) {
    // |x|^{1-d} is identically 1, the envelope is the constant 2
    for (int i = 0; i < g.n; ++i) {
      std::size_t id = g.idx(i);
      if (id == kv.origin) continue;
      best = std::max(best, sk.magnitude(id) / 2.0);
    }
  } else {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) {
        std::size_t id = g.idx(i, j);
        if (id == kv.origin) continue;
        double x[2] = {g.coord(i), g.coord(j)};
        double dist = torus_distance(2, x, origin);
        best = std::max(best, sk.magnitude(id) / (1.0 + 1.0 / dist));
      }
  }
  return best;
}

}  // namespace vpme

#endif
