/* particles.hpp: equal-weight particle ensembles and the kinetic loop.
 *
 * Time stepping is kick-drift-kick leapfrog against the self-consistent
 * field. The field is a function of positions only, so the scheme is exactly
 * time reversible (up to solver tolerance) and second order in dt.
 *
 * Deposition and interpolation share the cloud-in-cell stencil; using the
 * same weights both ways makes the pair adjoint, which is what the discrete
 * energy bookkeeping leans on.
 *
 * Solution process per step:
 *   1. deposit particles to the density grid (optionally mollified)
 *   2. solve the split field equations for U and E = -grad U
 *      (optionally mollify E, so the force kernel is smoothed twice)
 *   3. half kick, full drift with periodic wrap
 *   4. refresh density and fields at the new positions
 *   5. half kick
 * run() chains steps so the trailing refresh doubles as the next leading
 * field state, costing one nonlinear solve per step with Newton warm starts.
 */

#ifndef VPME_PARTICLES_HPP
#define VPME_PARTICLES_HPP

#include <functional>
#include <optional>

#include "vpme/field_solver.hpp"

namespace vpme {

struct InitialData {
  enum class Kind { UniformMaxwellian, PerturbedMaxwellian, TwoStream, Custom };

  Kind kind = Kind::UniformMaxwellian;
  double temperature = 1.0;
  double amplitude = 0.0;  // density perturbation, |amplitude| < 1
  int mode = 1;            // perturbation wavenumber along the first axis
  double drift = 0.0;      // two-stream beam speed
  double k0 = 6.0;         // velocity decay exponent of f0, recorded only
  double m0 = 4.0;         // moment order tracked in diagnostics
  // custom kinds fill one particle per call (positions then velocities)
  std::function<void(Rng&, int dim, double* x, double* v)> sampler;
};

struct ParticleEnsemble {
  int dim = 1;
  std::size_t n = 0;
  std::vector<double> x;  // n * dim, interleaved
  std::vector<double> v;  // n * dim, interleaved
  std::vector<double> w;  // n, equal weights summing to 1
  uint64_t rng_seed = 0;

  double max_speed() const {
    double m = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double s = 0.0;
      for (int c = 0; c < dim; ++c) s += v[p * dim + c] * v[p * dim + c];
      m = std::max(m, s);
    }
    return std::sqrt(m);
  }
};

namespace detail {

/* invert the perturbed CDF F(x) = x + 1/2 + a sin(2 pi k x)/(2 pi k) by
 * safeguarded Newton; F' = 1 + a cos >= 1 - |a| > 0 */
inline double sample_perturbed_coord(double u, double a, int k) {
  double lo = -0.5, hi = 0.5;
  double x = u - 0.5;
  for (int it = 0; it < 60; ++it) {
    double F = x + 0.5 + a * std::sin(kTwoPi * k * x) / (kTwoPi * k);
    double r = F - u;
    // convergence test comes before the bracket update: once x is the root
    // it must not become a bracket end, or the safeguard would bisect away
    // from it
    if (std::fabs(r) < 1e-15) break;
    if (r > 0.0)
      hi = x;
    else
      lo = x;
    double dF = 1.0 + a * std::cos(kTwoPi * k * x);
    double next = x - r / dF;
    x = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
  }
  return x;
}

}  // namespace detail

inline ParticleEnsemble sample_initial(const InitialData& data, std::size_t n,
                                       int dim, uint64_t seed) {
  if (dim != 1 && dim != 2) throw ConfigError("sample_initial: dim must be 1 or 2");
  if (n == 0) throw ConfigError("sample_initial: need at least one particle");
  if (data.kind == InitialData::Kind::PerturbedMaxwellian &&
      std::fabs(data.amplitude) >= 1.0)
    throw ConfigError("sample_initial: |amplitude| must be below 1");
  if (data.temperature < 0.0)
    throw ConfigError("sample_initial: temperature must be nonnegative");

  ParticleEnsemble e;
  e.dim = dim;
  e.n = n;
  e.rng_seed = seed;
  e.x.resize(n * dim);
  e.v.resize(n * dim);
  e.w.assign(n, 1.0 / static_cast<double>(n));

  Rng rng(seed);
  double sigma = std::sqrt(data.temperature);
  for (std::size_t p = 0; p < n; ++p) {
    double* x = &e.x[p * dim];
    double* v = &e.v[p * dim];
    switch (data.kind) {
      case InitialData::Kind::UniformMaxwellian:
        for (int c = 0; c < dim; ++c) {
          x[c] = rng.uniform(-0.5, 0.5);
          v[c] = sigma * rng.normal();
        }
        break;
      case InitialData::Kind::PerturbedMaxwellian:
        x[0] = detail::sample_perturbed_coord(rng.uniform(), data.amplitude,
                                              data.mode);
        for (int c = 1; c < dim; ++c) x[c] = rng.uniform(-0.5, 0.5);
        for (int c = 0; c < dim; ++c) v[c] = sigma * rng.normal();
        break;
      case InitialData::Kind::TwoStream: {
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (int c = 0; c < dim; ++c) {
          x[c] = rng.uniform(-0.5, 0.5);
          v[c] = sigma * rng.normal();
        }
        v[0] += sign * data.drift;
        break;
      }
      case InitialData::Kind::Custom:
        if (!data.sampler) throw ConfigError("custom kind without a sampler");
        data.sampler(rng, dim, x, v);
        for (int c = 0; c < dim; ++c) x[c] = wrap_coord(x[c]);
        break;
    }
  }
  return e;
}

/* cloud-in-cell stencil along one axis: base node and weight of the node
 * above; coordinates are node-centred, so a particle sitting on a node
 * deposits everything there */
inline void cic_axis(double coord, int n, int& i0, double& frac) {
  double s = (coord + 0.5) * n;
  double fl = std::floor(s);
  i0 = static_cast<int>(fl);
  frac = s - fl;
  if (i0 >= n) {  // coord == 0.5 - eps rounding up
    i0 = 0;
    frac = 0.0;
  }
}

inline ScalarField deposit(const ParticleEnsemble& e, const TorusGrid& g) {
  if (e.dim != g.dim) throw GridMismatch("deposit: dimension mismatch");
  double total_w = pairwise_sum(e.w);
  if (std::fabs(total_w - 1.0) > 1e-9)
    throw NonUnitMass("deposit: weights sum to " + std::to_string(total_w));

  ScalarField rho(g);
  double inv_vol = 1.0 / g.cell_volume();
  if (g.dim == 1) {
    for (std::size_t p = 0; p < e.n; ++p) {
      int i0;
      double fx;
      cic_axis(e.x[p], g.n, i0, fx);
      int i1 = i0 + 1 == g.n ? 0 : i0 + 1;
      double wp = e.w[p] * inv_vol;
      rho.v[i0] += wp * (1.0 - fx);
      rho.v[i1] += wp * fx;
    }
  } else {
    for (std::size_t p = 0; p < e.n; ++p) {
      int i0, j0;
      double fx, fy;
      cic_axis(e.x[2 * p], g.n, i0, fx);
      cic_axis(e.x[2 * p + 1], g.n, j0, fy);
      int i1 = i0 + 1 == g.n ? 0 : i0 + 1;
      int j1 = j0 + 1 == g.n ? 0 : j0 + 1;
      double wp = e.w[p] * inv_vol;
      rho.v[g.idx(i0, j0)] += wp * (1.0 - fx) * (1.0 - fy);
      rho.v[g.idx(i1, j0)] += wp * fx * (1.0 - fy);
      rho.v[g.idx(i0, j1)] += wp * (1.0 - fx) * fy;
      rho.v[g.idx(i1, j1)] += wp * fx * fy;
    }
  }
  return rho;
}

/* gather the field at particle positions with the same stencil; output is
 * interleaved like the velocity array */
inline void interpolate_field(const VectorField& field,
                              const ParticleEnsemble& e,
                              std::vector<double>& out) {
  const TorusGrid& g = field.grid;
  if (e.dim != g.dim) throw GridMismatch("interpolate_field: dimension mismatch");
  out.resize(e.n * e.dim);
  if (g.dim == 1) {
    for (std::size_t p = 0; p < e.n; ++p) {
      int i0;
      double fx;
      cic_axis(e.x[p], g.n, i0, fx);
      int i1 = i0 + 1 == g.n ? 0 : i0 + 1;
      out[p] = (1.0 - fx) * field.comp[0][i0] + fx * field.comp[0][i1];
    }
  } else {
    for (std::size_t p = 0; p < e.n; ++p) {
      int i0, j0;
      double fx, fy;
      cic_axis(e.x[2 * p], g.n, i0, fx);
      cic_axis(e.x[2 * p + 1], g.n, j0, fy);
      int i1 = i0 + 1 == g.n ? 0 : i0 + 1;
      int j1 = j0 + 1 == g.n ? 0 : j0 + 1;
      double w00 = (1.0 - fx) * (1.0 - fy), w10 = fx * (1.0 - fy);
      double w01 = (1.0 - fx) * fy, w11 = fx * fy;
      for (int c = 0; c < 2; ++c) {
        const std::vector<double>& F = field.comp[c];
        out[2 * p + c] = w00 * F[g.idx(i0, j0)] + w10 * F[g.idx(i1, j0)] +
                         w01 * F[g.idx(i0, j1)] + w11 * F[g.idx(i1, j1)];
      }
    }
  }
}

struct SimConfig {
  TorusGrid grid{1, 128};
  std::size_t n_particles = 10000;
  double dt = 1e-3;
  double t_final = 1.0;
  double mollifier_r = 0.0;  // 0 disables regularisation
  std::string deposition = "linear";
  uint64_t seed = 1;
  double output_interval = 0.1;
  InitialData initial;
  NewtonOptions newton;

  void validate() const {
    grid.validate();
    if (deposition != "linear")
      throw UnknownKind("config: deposition scheme '" + deposition +
                        "' (only 'linear' exists)");
    if (dt < 0.0) throw ConfigError("config: dt must be nonnegative");
    if (t_final < 0.0) throw ConfigError("config: t_final must be nonnegative");
    if (n_particles == 0) throw ConfigError("config: n_particles must be positive");
    if (mollifier_r != 0.0) {
      if (!(mollifier_r > 0.0) || mollifier_r > 0.25)
        throw ConfigError("config: mollifier_r must lie in (0, 1/4] or be 0");
      if (mollifier_r < 2.0 * grid.spacing())
        throw UnresolvableWidth("config: mollifier_r below 2h");
    }
    if (output_interval <= 0.0)
      throw ConfigError("config: output_interval must be positive");
  }
};

/* field state carried between steps */
struct SimState {
  ScalarField rho;       // raw deposited density
  ScalarField rho_eff;   // density the solver sees (mollified if enabled)
  FieldSolution fields;
  VectorField e_eff;     // force field the particles see
  std::optional<Mollifier> moll;
  bool valid = false;
};

inline void refresh_fields(const ParticleEnsemble& e, const SimConfig& cfg,
                           SimState& st) {
  if (cfg.mollifier_r > 0.0 && !st.moll)
    st.moll.emplace(make_mollifier(cfg.grid, cfg.mollifier_r));

  st.rho = deposit(e, cfg.grid);
  st.rho_eff = st.moll ? convolve(*st.moll, st.rho) : st.rho;

  NewtonOptions opt = cfg.newton;
  if (st.valid) opt.warm_start = &st.fields.u_hat;
  st.fields = solve_fields(st.rho_eff, opt);

  VectorField e_total = st.fields.e_bar;
  for (int c = 0; c < cfg.grid.dim; ++c)
    for (std::size_t i = 0; i < e_total.comp[c].size(); ++i)
      e_total.comp[c][i] += st.fields.e_hat.comp[c][i];
  st.e_eff = st.moll ? convolve(*st.moll, e_total) : e_total;
  st.valid = true;
}

namespace detail {

inline void kick(ParticleEnsemble& e, const SimState& st, double half_dt,
                 std::vector<double>& scratch) {
  interpolate_field(st.e_eff, e, scratch);
  for (std::size_t i = 0; i < e.v.size(); ++i) e.v[i] += half_dt * scratch[i];
}

inline void drift(ParticleEnsemble& e, double dt) {
  for (std::size_t i = 0; i < e.x.size(); ++i)
    e.x[i] = wrap_coord(e.x[i] + dt * e.v[i]);
}

}  // namespace detail

/* one leapfrog step; st.valid == false forces the leading field solve, and
 * the state left behind is valid for the next call */
inline void step(ParticleEnsemble& e, const SimConfig& cfg, SimState& st) {
  if (!st.valid) refresh_fields(e, cfg, st);
  std::vector<double> scratch;
  detail::kick(e, st, 0.5 * cfg.dt, scratch);
  detail::drift(e, cfg.dt);
  refresh_fields(e, cfg, st);
  detail::kick(e, st, 0.5 * cfg.dt, scratch);
}

}  // namespace vpme

#endif
