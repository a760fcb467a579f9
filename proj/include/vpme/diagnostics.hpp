/* diagnostics.hpp: conserved quantities, moments, and the measurement side
 * of the analysis (interpolation inequality, log-Lipschitz probe), plus the
 * run loop that samples them on a schedule.
 *
 * Energy splits as kinetic + field + potential-weighted mass:
 *     E = 1/2 sum w |v|^2 + 1/2 int |grad U|^2 + int U e^U.
 * The last term is bounded below by -1/e pointwise (x e^x >= -1/e), so the
 * total can never run away downwards; drift in E is the headline check on
 * the integrator.
 */

#ifndef VPME_DIAGNOSTICS_HPP
#define VPME_DIAGNOSTICS_HPP

#include <limits>

#include "vpme/particles.hpp"

namespace vpme {

struct EnergyBreakdown {
  double kinetic = 0.0;
  double field = 0.0;
  double ue_term = 0.0;
  double total() const { return kinetic + field + ue_term; }
};

inline EnergyBreakdown energy(const ParticleEnsemble& e,
                              const FieldSolution& sol) {
  EnergyBreakdown out;
  out.kinetic = 0.5 * pairwise_sum_indexed(e.n, [&](std::size_t p) {
    double s = 0.0;
    for (int c = 0; c < e.dim; ++c) s += e.v[p * e.dim + c] * e.v[p * e.dim + c];
    return e.w[p] * s;
  });

  // E = -grad U exactly, so |grad U|^2 is the magnitude of e_bar + e_hat
  const TorusGrid& g = sol.u_bar.grid;
  out.field = 0.5 * g.cell_volume() *
              pairwise_sum_indexed(g.cells(), [&](std::size_t i) {
                double s = 0.0;
                for (int c = 0; c < g.dim; ++c) {
                  double ec = sol.e_bar.comp[c][i] + sol.e_hat.comp[c][i];
                  s += ec * ec;
                }
                return s;
              });

  out.ue_term = g.cell_volume() *
                pairwise_sum_indexed(g.cells(), [&](std::size_t i) {
                  double u = sol.u_bar.v[i] + sol.u_hat.v[i];
                  return u * std::exp(u);
                });
  return out;
}

/* m-th absolute velocity moment, sum w |v|^m */
inline double moment(const ParticleEnsemble& e, double m) {
  if (m < 0.0) throw DomainError("moment: order must be nonnegative");
  return pairwise_sum_indexed(e.n, [&](std::size_t p) {
    double s = 0.0;
    for (int c = 0; c < e.dim; ++c) s += e.v[p * e.dim + c] * e.v[p * e.dim + c];
    return e.w[p] * std::pow(s, 0.5 * m);
  });
}

inline double density_lp(const ScalarField& rho, double p) {
  if (p < 1.0) throw DomainError("density_lp: p must be >= 1");
  double q = pairwise_sum_indexed(rho.size(), [&](std::size_t i) {
    return std::pow(std::fabs(rho.v[i]), p);
  });
  return std::pow(q * rho.grid.cell_volume(), 1.0 / p);
}

/* Probe the almost-Lipschitz character of the linear field: for pairs of
 * grid points at distance at least 2h, form
 *     |E(x) - E(y)| / ( h_sup |x-y| (1 + log( sqrt(d) / (2 |x-y|) )) )
 * and report the worst ratio seen. h_sup is the sup norm of the Poisson
 * source 1 - rho. A zero field reports 0 regardless of h_sup. */
inline double log_lipschitz_probe(const VectorField& e_bar, double h_sup,
                                  int n_pairs, uint64_t seed) {
  const TorusGrid& g = e_bar.grid;
  if (n_pairs <= 0) throw DomainError("log_lipschitz_probe: need pairs");
  Rng rng(seed);
  double worst = 0.0;
  double sqrt_d = std::sqrt(static_cast<double>(g.dim));
  int tries = 0;
  for (int t = 0; t < n_pairs && tries < 100 * n_pairs; ++t) {
    ++tries;
    std::size_t ia = rng.index(g.cells());
    std::size_t ib = rng.index(g.cells());
    double xa[2], xb[2];
    if (g.dim == 1) {
      xa[0] = g.coord(static_cast<int>(ia));
      xb[0] = g.coord(static_cast<int>(ib));
    } else {
      xa[0] = g.coord(static_cast<int>(ia) / g.n);
      xa[1] = g.coord(static_cast<int>(ia) % g.n);
      xb[0] = g.coord(static_cast<int>(ib) / g.n);
      xb[1] = g.coord(static_cast<int>(ib) % g.n);
    }
    double dist = torus_distance(g.dim, xa, xb);
    if (dist < 2.0 * g.spacing()) {
      --t;  // resample, short pairs sit below the probe's resolution
      continue;
    }
    double diff2 = 0.0;
    for (int c = 0; c < g.dim; ++c) {
      double d = e_bar.comp[c][ia] - e_bar.comp[c][ib];
      diff2 += d * d;
    }
    double num = std::sqrt(diff2);
    if (num == 0.0) continue;
    if (h_sup <= 0.0)
      throw DomainError("log_lipschitz_probe: field nonzero but h_sup is 0");
    double denom = h_sup * dist * (1.0 + std::log(sqrt_d / (2.0 * dist)));
    worst = std::max(worst, num / denom);
  }
  return worst;
}

/* gridded phase-space test function: spatial nodes times a velocity box
 * [-vmax, vmax)^d in cell-centred layout (no cell sits exactly at v = 0) */
struct PhaseSpaceGrid {
  int dim = 1;
  int nx = 0;       // spatial nodes per axis
  int nv = 0;       // velocity cells per axis
  double vmax = 1.0;
  std::vector<double> g;  // size nx^dim * nv^dim, x-major

  double dv() const { return 2.0 * vmax / nv; }
  std::size_t x_cells() const {
    return dim == 1 ? static_cast<std::size_t>(nx)
                    : static_cast<std::size_t>(nx) * nx;
  }
  std::size_t v_cells() const {
    return dim == 1 ? static_cast<std::size_t>(nv)
                    : static_cast<std::size_t>(nv) * nv;
  }
  double v_coord(int j) const { return -vmax + (j + 0.5) * dv(); }

  /* |v| at a flat velocity index */
  double v_mag(std::size_t j) const {
    if (dim == 1) return std::fabs(v_coord(static_cast<int>(j)));
    double a = v_coord(static_cast<int>(j) / nv);
    double b = v_coord(static_cast<int>(j) % nv);
    return std::sqrt(a * a + b * b);
  }
};

struct InterpolationCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
  double margin = 0.0;  // rhs / lhs, large means comfortable
  bool pass = false;
};

/* Moment interpolation: for 0 <= k < m,
 *
 *   || int |v|^k g dv ||_{L^p_x}  <=  C ||g||_inf^{(m-k)/(m+d)}
 *                                       || int |v|^m g dv ||_{L^1_x}^{(k+d)/(m+d)}
 *   with p = (m+d)/(k+d).
 *
 * The constant comes from splitting the k-th moment at radius R,
 *     l_k(x) <= ||g(x,.)||_inf sigma_d R^{k+d}/(k+d) + R^{k-m} l_m(x),
 * and minimising over R. Writing theta = (k+d)/(m+d) and
 * tau = (m-k)/(k+d), the optimum R = (l_m (m-k) (k+d) / (sigma_d
 * ||g||_inf (k+d)^2))^{1/(m+d)} collapses the right side to
 *     (tau^theta + tau^(theta-1)) (sigma_d/(k+d))^{1-theta}
 *         ||g||_inf^{1-theta} l_m^theta,
 * and the L^p norm in x follows by integrating the pointwise bound.
 * sigma_d is the sphere area: 2 for d=1, 2 pi for d=2. */
inline double interpolation_constant(int d, int m, int k) {
  double sigma = d == 1 ? 2.0 : kTwoPi;
  double theta = static_cast<double>(k + d) / (m + d);
  double tau = static_cast<double>(m - k) / (k + d);
  double c = std::pow(tau, theta) + std::pow(tau, theta - 1.0);
  return c * std::pow(sigma / (k + d), 1.0 - theta);
}

inline InterpolationCheck interpolation_check(const PhaseSpaceGrid& ps, int m,
                                              int k) {
  if (k < 0 || k >= m)
    throw DomainError("interpolation_check: need 0 <= k < m");
  for (double x : ps.g)
    if (x < 0.0) throw DomainError("interpolation_check: g must be nonnegative");

  int d = ps.dim;
  std::size_t nxc = ps.x_cells(), nvc = ps.v_cells();
  double dvol = d == 1 ? ps.dv() : ps.dv() * ps.dv();

  double g_sup = 0.0;
  for (double x : ps.g) g_sup = std::max(g_sup, x);

  std::vector<double> lk(nxc), lm(nxc);
  for (std::size_t i = 0; i < nxc; ++i) {
    lk[i] = dvol * pairwise_sum_indexed(nvc, [&](std::size_t j) {
              return std::pow(ps.v_mag(j), k) * ps.g[i * nvc + j];
            });
    lm[i] = dvol * pairwise_sum_indexed(nvc, [&](std::size_t j) {
              return std::pow(ps.v_mag(j), m) * ps.g[i * nvc + j];
            });
  }

  double p = static_cast<double>(m + d) / (k + d);
  double lhs = std::pow(pairwise_sum_indexed(nxc,
                                             [&](std::size_t i) {
                                               return std::pow(lk[i], p);
                                             }) /
                            static_cast<double>(nxc),
                        1.0 / p);
  double lm_l1 = pairwise_sum(lm) / static_cast<double>(nxc);

  InterpolationCheck out;
  out.constant = interpolation_constant(d, m, k);
  out.lhs = lhs;
  out.rhs = out.constant *
            std::pow(g_sup, static_cast<double>(m - k) / (m + d)) *
            std::pow(lm_l1, static_cast<double>(k + d) / (m + d));
  out.margin = lhs > 0.0 ? out.rhs / lhs
                         : std::numeric_limits<double>::infinity();
  out.pass = out.lhs <= out.rhs * (1.0 + 1e-9);
  return out;
}

/* histogram an ensemble onto a phase-space grid (nearest cell in x and v;
 * velocities outside the box are dropped); mainly a bridge so ensemble data
 * can feed interpolation_check */
inline PhaseSpaceGrid bin_ensemble(const ParticleEnsemble& e, int nx, int nv,
                                   double vmax) {
  PhaseSpaceGrid ps;
  ps.dim = e.dim;
  ps.nx = nx;
  ps.nv = nv;
  ps.vmax = vmax;
  ps.g.assign(ps.x_cells() * ps.v_cells(), 0.0);
  double hx = 1.0 / nx;
  double cell = (e.dim == 1 ? hx * ps.dv() : hx * hx * ps.dv() * ps.dv());
  for (std::size_t p = 0; p < e.n; ++p) {
    std::size_t xi = 0, vi = 0;
    bool in_box = true;
    for (int c = 0; c < e.dim; ++c) {
      int ix = static_cast<int>((e.x[p * e.dim + c] + 0.5) / hx);
      ix = std::min(ix, nx - 1);
      xi = xi * nx + ix;
      double vv = e.v[p * e.dim + c];
      if (vv < -vmax || vv >= vmax) {
        in_box = false;
        break;
      }
      vi = vi * nv + static_cast<int>((vv + vmax) / ps.dv());
    }
    if (in_box) ps.g[xi * ps.v_cells() + vi] += e.w[p] / cell;
  }
  return ps;
}

struct DiagnosticsRecord {
  double time = 0.0;
  double kinetic = 0.0;
  double field_energy = 0.0;
  double ue_term = 0.0;
  double total_energy = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
  double m_m0 = 0.0;
  double rho_sup = 0.0;  // sup |rho - 1|, distance from the neutral state
  double rho_lp = 0.0;   // L^{(d+2)/d} norm of the deposited density
};

inline DiagnosticsRecord measure(double t, const ParticleEnsemble& e,
                                 const SimState& st, double m0) {
  DiagnosticsRecord r;
  r.time = t;
  EnergyBreakdown en = energy(e, st.fields);
  r.kinetic = en.kinetic;
  r.field_energy = en.field;
  r.ue_term = en.ue_term;
  r.total_energy = en.total();
  r.m2 = moment(e, 2.0);
  r.m4 = moment(e, 4.0);
  r.m_m0 = moment(e, m0);
  double dev = 0.0;
  for (double x : st.rho.v) dev = std::max(dev, std::fabs(x - 1.0));
  r.rho_sup = dev;
  r.rho_lp = density_lp(st.rho, (st.rho.grid.dim + 2.0) / st.rho.grid.dim);
  return r;
}

using OutputHook =
    std::function<void(double, const ParticleEnsemble&, const SimState&)>;

/* march the ensemble to t_final, recording diagnostics every
 * output_interval (and always at t = 0 and t_final); dt = 0 means
 * measure-only. The CFL-style guard dt <= h / (2 v_cut) rejects the run
 * before any field solve. */
inline std::vector<DiagnosticsRecord> run(const SimConfig& cfg,
                                          ParticleEnsemble& e,
                                          const OutputHook& hook = {}) {
  cfg.validate();
  if (e.dim != cfg.grid.dim) throw GridMismatch("run: ensemble dim vs grid");

  long long n_steps = 0;
  if (cfg.dt > 0.0) {
    n_steps = std::llround(cfg.t_final / cfg.dt);
    if (std::fabs(n_steps * cfg.dt - cfg.t_final) > 1e-9)
      throw ConfigError("run: t_final must be a whole number of steps");
    double v_cut = e.max_speed();
    if (v_cut > 0.0 && cfg.dt > 0.5 * cfg.grid.spacing() / v_cut)
      throw ConfigError("run: dt " + std::to_string(cfg.dt) +
                        " violates dt <= h/(2 v_cut) = " +
                        std::to_string(0.5 * cfg.grid.spacing() / v_cut));
  } else if (cfg.t_final > 0.0) {
    throw ConfigError("run: t_final > 0 needs dt > 0");
  }

  long long output_every =
      cfg.dt > 0.0 ? std::max(1ll, std::llround(cfg.output_interval / cfg.dt))
                   : 1;

  std::vector<DiagnosticsRecord> records;
  SimState st;
  refresh_fields(e, cfg, st);
  records.push_back(measure(0.0, e, st, cfg.initial.m0));
  if (hook) hook(0.0, e, st);

  std::vector<double> scratch;
  for (long long s = 1; s <= n_steps; ++s) {
    detail::kick(e, st, 0.5 * cfg.dt, scratch);
    detail::drift(e, cfg.dt);
    refresh_fields(e, cfg, st);
    detail::kick(e, st, 0.5 * cfg.dt, scratch);
    if (s % output_every == 0 || s == n_steps) {
      double t = s * cfg.dt;
      records.push_back(measure(t, e, st, cfg.initial.m0));
      if (hook) hook(t, e, st);
    }
  }
  return records;
}

}  // namespace vpme

#endif
