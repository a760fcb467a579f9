/* helpers.hpp: shared fixtures for the test suites.
 *
 * Oracles follow one rule: they never go through the code path they check.
 * Direct summation against FFT, analytic formulas against solvers, factorial
 * enumeration against the assignment engine.
 */

#ifndef VPME_TEST_HELPERS_HPP
#define VPME_TEST_HELPERS_HPP

#include <memory>

#include "vpme/field_solver.hpp"
#include "vpme/mollifier.hpp"
#include "vpme/particles.hpp"

namespace vpme::testing {

/* random smooth field: modes up to kmax with decaying random amplitudes */
inline ScalarField random_band_limited(const TorusGrid& g, int kmax,
                                       uint64_t seed) {
  Rng rng(seed);
  ScalarField f(g);
  if (g.dim == 1) {
    for (int k = 1; k <= kmax; ++k) {
      double a = rng.uniform(-1.0, 1.0) / k;
      double phi = rng.uniform(0.0, kTwoPi);
      for (int i = 0; i < g.n; ++i)
        f.v[g.idx(i)] += a * std::cos(kTwoPi * k * g.coord(i) + phi);
    }
  } else {
    for (int kx = -kmax; kx <= kmax; ++kx)
      for (int ky = 0; ky <= kmax; ++ky) {
        if (kx == 0 && ky == 0) continue;
        if (ky == 0 && kx < 0) continue;  // conjugate pair already counted
        double kk = std::sqrt(double(kx) * kx + double(ky) * ky);
        double a = rng.uniform(-1.0, 1.0) / (kk * kk);
        double phi = rng.uniform(0.0, kTwoPi);
        for (int i = 0; i < g.n; ++i)
          for (int j = 0; j < g.n; ++j)
            f.v[g.idx(i, j)] +=
                a * std::cos(kTwoPi * (kx * g.coord(i) + ky * g.coord(j)) + phi);
      }
  }
  return f;
}

/* zero-mean version, for Poisson right sides */
inline ScalarField random_mean_free(const TorusGrid& g, int kmax, uint64_t seed) {
  ScalarField f = random_band_limited(g, kmax, seed);
  double m = f.mean();
  for (double& x : f.v) x -= m;
  return f;
}

/* strictly positive unit-mass density: 1 + bounded trigonometric noise */
inline ScalarField random_unit_density(const TorusGrid& g, uint64_t seed,
                                       double roughness = 0.8) {
  ScalarField f = random_mean_free(g, 4, seed);
  double sup = f.sup_abs();
  double scale = sup > 0 ? roughness / sup : 0.0;
  ScalarField rho(g, 1.0);
  for (std::size_t i = 0; i < rho.size(); ++i) rho.v[i] += scale * f.v[i];
  // trig modes have zero grid mean exactly, but renormalise anyway
  rho *= 1.0 / rho.integral();
  return rho;
}

/* unit-mass mixture of mollifier bumps, nonnegative by construction */
inline ScalarField random_bump_density(const TorusGrid& g, uint64_t seed,
                                       int n_bumps = 4) {
  Rng rng(seed);
  ScalarField rho(g, 0.0);
  double total = 0.0;
  std::vector<double> weights(n_bumps);
  for (int b = 0; b < n_bumps; ++b) {
    weights[b] = rng.uniform(0.2, 1.0);
    total += weights[b];
  }
  static const double widths[3] = {1.0 / 8.0, 1.0 / 16.0, 3.0 / 32.0};
  for (int b = 0; b < n_bumps; ++b) {
    double w = weights[b] / total;
    double r = widths[rng.index(3)];
    double c0 = rng.uniform(-0.5, 0.5);
    double c1 = g.dim == 2 ? rng.uniform(-0.5, 0.5) : 0.0;
    Mollifier m = make_mollifier(g, r);
    // chi is centred at the origin node; shift by whole cells so mass stays 1
    int s0 = static_cast<int>(std::lround((c0 + 0.5) / g.spacing())) % g.n;
    int s1 = static_cast<int>(std::lround((c1 + 0.5) / g.spacing())) % g.n;
    if (g.dim == 1) {
      for (int i = 0; i < g.n; ++i)
        rho.v[g.idx(i)] += w * m.chi.v[g.idx((i + g.n / 2 - s0 + 2 * g.n) % g.n)];
    } else {
      for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
          rho.v[g.idx(i, j)] +=
              w * m.chi.v[g.idx((i + g.n / 2 - s0 + 2 * g.n) % g.n,
                                (j + g.n / 2 - s1 + 2 * g.n) % g.n)];
    }
  }
  return rho;
}

/* standard normal quantile: Acklam's rational approximation polished by one
 * Halley step against erfc, good to ~1e-15 */
inline double norm_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 0.97575) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * kTwoPi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/* van der Corput radical inverse, base 2 */
inline double vdc2(uint64_t i) {
  double r = 0.0, f = 0.5;
  while (i) {
    r += f * (i & 1);
    i >>= 1;
    f *= 0.5;
  }
  return r;
}

/* Deterministic quiet-start loading of a perturbed Maxwellian (d=1):
 * stratified positions through the inverse CDF, van der Corput velocities
 * through the normal quantile (a Hammersley pairing). Kills the shot-noise
 * component of the deposited density, which is what energy-convergence
 * studies need; the iid kinds keep their Monte-Carlo character. */
inline InitialData quiet_perturbed_initial(double temperature, double amplitude,
                                           int mode, std::size_t n) {
  InitialData data;
  data.kind = InitialData::Kind::Custom;
  data.temperature = temperature;
  data.amplitude = amplitude;
  data.mode = mode;
  double sigma = std::sqrt(temperature);
  auto counter = std::make_shared<std::size_t>(0);
  data.sampler = [=](Rng&, int dim, double* x, double* v) {
    if (dim != 1)
      throw ConfigError("quiet_perturbed_initial: d=1 only");
    std::size_t p = (*counter)++;
    double u = (static_cast<double>(p) + 0.5) / static_cast<double>(n);
    x[0] = vpme::detail::sample_perturbed_coord(u, amplitude, mode);
    v[0] = sigma * norm_quantile(vdc2(p + 1));
  };
  return data;
}

}  // namespace vpme::testing

#endif
