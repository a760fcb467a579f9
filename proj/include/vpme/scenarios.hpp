#ifndef VPME_SCENARIOS_HPP
#define VPME_SCENARIOS_HPP

/* Scenario orchestration: each CLI subcommand maps to one function here
 * that runs the computation, writes artifacts under an output directory,
 * and finishes with report.json plus an atomically written manifest.
 *
 * Contract shared by all scenarios:
 *   - every artifact is derived from the seeded computation, so two runs
 *     with the same config and seed produce byte-identical CSV bodies;
 *     wall-clock timestamps appear only in the manifest;
 *   - the manifest is written last, so every file it names exists;
 *   - the return value is the process exit code: 0 when every in-scenario
 *     check passes, 1 when one fails. Configuration and solver errors
 *     escape as exceptions for the caller to map to exits 2 and 3.
 *
 * The orchestrator itself is single-threaded; VPME_THREADS only reaches
 * the assignment solver inside the transport module.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vpme/config.hpp"
#include "vpme/diagnostics.hpp"
#include "vpme/io.hpp"
#include "vpme/mollifier.hpp"
#include "vpme/transport.hpp"

namespace vpme {
namespace scenarios {

namespace detail {

inline std::string iso_utc(std::chrono::system_clock::time_point tp) {
  std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

inline int recorded_threads() {
  const char* s = std::getenv("VPME_THREADS");
  int t = s ? std::atoi(s) : 1;
  return t >= 1 ? t : 1;
}

/* strictly positive unit-mass density: 1 plus a few trig modes whose
 * amplitudes sum below 1, renormalised to exact unit mass */
inline ScalarField random_unit_density(const TorusGrid& g, Rng& rng) {
  ScalarField f(g, 1.0);
  constexpr int kModes = 3;
  for (int m = 0; m < kModes; ++m) {
    double a = rng.uniform(0.05, 0.9 / kModes);
    double ph = rng.uniform(0.0, kTwoPi);
    int kx = 1 + static_cast<int>(rng.index(4));
    if (g.dim == 1) {
      for (int i = 0; i < g.n; ++i)
        f.v[g.idx(i)] += a * std::cos(kTwoPi * kx * g.coord(i) + ph);
    } else {
      int ky = static_cast<int>(rng.index(4));
      double ph2 = rng.uniform(0.0, kTwoPi);
      for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
          f.v[g.idx(i, j)] += a * std::cos(kTwoPi * kx * g.coord(i) + ph) *
                              std::cos(kTwoPi * ky * g.coord(j) + ph2);
    }
  }
  f *= 1.0 / f.integral();
  return f;
}

inline ParticleEnsemble random_ensemble(int dim, std::size_t n, Rng& rng) {
  ParticleEnsemble e;
  e.dim = dim;
  e.n = n;
  e.x.resize(n * dim);
  e.v.resize(n * dim);
  e.w.assign(n, 1.0 / static_cast<double>(n));
  for (double& x : e.x) x = rng.uniform(-0.5, 0.5);
  for (double& v : e.v) v = 0.7 * rng.normal();
  return e;
}

/* factorial-search transport cost, the oracle behind the exactness check */
inline double brute_force_w2_sq(const ParticleEnsemble& a,
                                const ParticleEnsemble& b) {
  std::vector<std::size_t> perm(a.n);
  for (std::size_t i = 0; i < a.n; ++i) perm[i] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.n; ++i)
      c += a.w[i] * vpme::detail::pair_cost_sq(a, i, b, perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace detail

class RunContext {
 public:
  RunContext(const RunConfig& rc, std::string scenario, std::string out_dir,
             bool quiet)
      : cfg_(rc),
        scenario_(std::move(scenario)),
        dir_(std::move(out_dir)),
        quiet_(quiet),
        started_(std::chrono::system_clock::now()) {
    std::filesystem::create_directories(dir_);
  }

  const RunConfig& cfg() const { return cfg_; }

  void emit(const std::string& name, const std::string& body) {
    io::write_text(dir_ + "/" + name, body);
    outputs_.push_back(name);
  }

  /* record one named verdict; the scenario passes iff all of them do */
  bool check(const std::string& name, bool ok,
             nlohmann::json details = nlohmann::json::object()) {
    details["pass"] = ok;
    checks_[name] = std::move(details);
    pass_ = pass_ && ok;
    if (!quiet_) std::printf("  [%s] %s\n", ok ? " ok " : "FAIL", name.c_str());
    return ok;
  }

  bool passing() const { return pass_; }

  int finish() {
    nlohmann::json report;
    report["scenario"] = scenario_;
    report["pass"] = pass_;
    report["checks"] = checks_;
    emit("report.json", report.dump(2) + "\n");

    nlohmann::json verdicts = nlohmann::json::object();
    for (auto& [key, val] : checks_.items()) verdicts[key] = val["pass"];
    nlohmann::json man;
    man["version"] = kVersion;
    man["scenario"] = scenario_;
    man["seed"] = cfg_.sim.seed;
    man["threads"] = detail::recorded_threads();
    man["config"] = serialise_config(cfg_);
    man["started"] = detail::iso_utc(started_);
    man["finished"] = detail::iso_utc(std::chrono::system_clock::now());
    man["outputs"] = outputs_;
    man["pass"] = pass_;
    man["verdicts"] = verdicts;
    io::write_text_atomic(dir_ + "/manifest.json", man.dump(2) + "\n");

    if (!quiet_)
      std::printf("%s: %s\n", scenario_.c_str(), pass_ ? "pass" : "FAIL");
    return pass_ ? 0 : 1;
  }

 private:
  RunConfig cfg_;
  std::string scenario_;
  std::string dir_;
  bool quiet_;
  std::chrono::system_clock::time_point started_;
  std::vector<std::string> outputs_;
  nlohmann::json checks_ = nlohmann::json::object();
  bool pass_ = true;
};

/* Deposit the configured initial data, solve the two-field Poisson system
 * once, snapshot everything, and assert the Maxwell-Boltzmann mass
 * identity int e^U = 1. */
inline int solve_poisson(const RunConfig& rc, const std::string& out_dir,
                         bool quiet) {
  rc.sim.validate();
  RunContext run(rc, "solve-poisson", out_dir, quiet);
  const SimConfig& sc = rc.sim;

  ParticleEnsemble e =
      sample_initial(sc.initial, sc.n_particles, sc.grid.dim, sc.seed);
  SimState st;
  refresh_fields(e, sc, st);

  run.emit("rho.txt", io::format_field(st.rho));
  if (st.moll) run.emit("rho_eff.txt", io::format_field(st.rho_eff));
  run.emit("u_bar.txt", io::format_field(st.fields.u_bar));
  run.emit("u_hat.txt", io::format_field(st.fields.u_hat));

  RegularityReport reg = regularity_report(st.fields, st.rho_eff);
  double mass_err = std::fabs(reg.exp_mass - 1.0);
  run.check("newton_converged", st.fields.residual_sup <= sc.newton.tol,
            {{"iterations", st.fields.newton_iters},
             {"residual_sup", st.fields.residual_sup},
             {"tol", sc.newton.tol}});
  run.check("mass_identity", mass_err < 1e-8,
            {{"exp_mass", reg.exp_mass}, {"error", mass_err}, {"bound", 1e-8}});
  run.check("density_bounded", std::isfinite(reg.density_sup),
            {{"density_sup", reg.density_sup},
             {"uhat_c1_bound", reg.uhat_c1_bound}});
  return run.finish();
}

/* March the configured ensemble to t_final and write the diagnostic time
 * series. The CFL-style guard inside the stepper rejects a bad dt before
 * the first field solve, which surfaces as exit 2. */
inline int simulate(const RunConfig& rc, const std::string& out_dir,
                    bool quiet) {
  rc.sim.validate();
  RunContext run(rc, "simulate", out_dir, quiet);
  const SimConfig& sc = rc.sim;

  ParticleEnsemble e =
      sample_initial(sc.initial, sc.n_particles, sc.grid.dim, sc.seed);
  std::vector<DiagnosticsRecord> recs = vpme::run(sc, e);

  io::CsvTable tab({"t", "kinetic", "field_energy", "ue_term", "total_energy",
                    "m2", "m4", "m_m0", "rho_sup", "rho_lp"});
  bool finite = true;
  for (const DiagnosticsRecord& r : recs) {
    tab.row({r.time, r.kinetic, r.field_energy, r.ue_term, r.total_energy,
             r.m2, r.m4, r.m_m0, r.rho_sup, r.rho_lp});
    for (double x : {r.kinetic, r.field_energy, r.ue_term, r.total_energy,
                     r.m2, r.m4, r.m_m0, r.rho_sup, r.rho_lp})
      finite = finite && std::isfinite(x);
  }
  run.emit("timeseries.csv", tab.str());
  run.emit("particles_final.txt", io::format_particles(e));

  double e0 = recs.front().total_energy;
  double drift = std::fabs(recs.back().total_energy - e0) /
                 std::max(std::fabs(e0), 1e-300);
  run.check("records_finite", finite,
            {{"records", recs.size()}, {"energy_drift", drift}});
  return run.finish();
}

/* Twin-trajectory contraction plus the two stability inequalities the
 * coupling argument rests on. The CSV layout is the scenario's external
 * contract: t,D,W2_est,I1,I2,I3,I4. */
inline int stability(const RunConfig& rc, const std::string& out_dir,
                     bool quiet) {
  rc.sim.validate();
  RunContext run(rc, "stability", out_dir, quiet);

  CoupledRunResult co =
      coupled_run(rc.sim, {rc.perturb_dx, rc.perturb_dv}, rc.subsample);

  io::CsvTable tab({"t", "D", "W2_est", "I1", "I2", "I3", "I4"});
  double d_max = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (const CoupledRecord& r : co.records) {
    tab.row({r.time, r.d_value, r.w2_est, r.i1, r.i2, r.i3, r.i4});
    d_max = std::max(d_max, r.d_value);
    worst_margin = std::min(
        worst_margin, r.d_value - (r.w2_est * r.w2_est - r.band));
  }
  run.emit("stability.csv", tab.str());

  nlohmann::json summary{{"d_initial", co.records.front().d_value},
                         {"d_final", co.records.back().d_value},
                         {"d_max", d_max},
                         {"subsample", co.subsample},
                         {"worst_margin", worst_margin}};
  run.check("coupling_dominates_w2", worst_margin >= -1e-12, summary);

  bool perturbed = rc.perturb_dx != 0.0 || rc.perturb_dv != 0.0;
  if (perturbed)
    run.check("gronwall_slope_finite", std::isfinite(co.gronwall_slope),
              {{"slope", co.gronwall_slope}});
  else
    run.check("twin_identical", d_max < 1e-20, {{"d_max", d_max}});

  /* inequality sweeps on random densities; Loeper needs the 1d exact
   * transport cost, the hat-field bound runs in the configured dimension */
  Rng rng(rc.sim.seed);
  const TorusGrid& g = rc.sim.grid;
  double r = rc.sim.mollifier_r > 0.0 ? rc.sim.mollifier_r : 1.0 / 16.0;
  r = std::max(r, 2.0 * g.spacing());
  Mollifier moll = make_mollifier(g, r);

  if (g.dim == 1) {
    io::CsvTable lt({"trial", "lhs", "rhs", "w2", "margin"});
    bool all = true;
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < rc.trials; ++t) {
      ScalarField h1 = convolve(moll, detail::random_unit_density(g, rng));
      ScalarField h2 = convolve(moll, detail::random_unit_density(g, rng));
      LoeperReport lr = loeper_inequality_check(h1, h2);
      lt.row({static_cast<double>(t), lr.lhs, lr.rhs, lr.w2, lr.margin});
      all = all && lr.pass;
      if (lr.rhs > 0.0) worst = std::min(worst, lr.margin / lr.rhs);
    }
    run.emit("loeper.csv", lt.str());
    run.check("loeper_inequality", all,
              {{"trials", rc.trials}, {"worst_relative_margin", worst}});
  }

  {
    io::CsvTable ut({"trial", "lhs", "rhs", "a_const", "margin"});
    bool all = true;
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < rc.trials; ++t) {
      ScalarField h1 = detail::random_unit_density(g, rng);
      ScalarField h2 = detail::random_unit_density(g, rng);
      UhatStabilityReport ur = uhat_stability_check(h1, h2);
      ut.row({static_cast<double>(t), ur.lhs, ur.rhs, ur.a_const,
              ur.rhs - ur.lhs});
      all = all && ur.pass;
      if (ur.rhs > 0.0) worst = std::min(worst, (ur.rhs - ur.lhs) / ur.rhs);
    }
    run.emit("uhat.csv", ut.str());
    run.check("uhat_inequality", all,
              {{"trials", rc.trials}, {"worst_relative_margin", worst}});
  }
  return run.finish();
}

/* The full property battery at desk scale: every analytic claim the
 * library encodes, exercised on fixed fixtures with seeded randomness.
 * verify.csv carries one summary row per property. */
inline int verify(const RunConfig& rc, const std::string& out_dir,
                  bool quiet) {
  RunContext run(rc, "verify", out_dir, quiet);
  Rng rng(rc.sim.seed);
  int scale = std::max(1, rc.trials);

  struct PropertyRow {
    std::string name;
    bool pass;
    double observed;
    double bound;
  };
  std::vector<PropertyRow> rows;
  auto prop = [&](const std::string& name, double observed, double bound,
                  bool pass) {
    rows.push_back({name, pass, observed, bound});
    run.check(name, pass, {{"observed", observed}, {"bound", bound}});
  };

  {  // manufactured solution of the nonlinear half, with iteration budget
    TorusGrid g{1, 128};
    ScalarField star(g), ubar(g);
    for (int i = 0; i < g.n; ++i) {
      double x = g.coord(i);
      double s = 0.01 * std::cos(kTwoPi * x);
      double lap = -0.01 * kTwoPi * kTwoPi * std::cos(kTwoPi * x);
      star.v[g.idx(i)] = s;
      ubar.v[g.idx(i)] = std::log1p(lap) - s;
    }
    int iters = 0;
    double res = 0.0;
    ScalarField uhat = solve_nonlinear_poisson(ubar, {}, &iters, &res);
    prop("poisson_manufactured", (uhat - star).sup_abs(), 1e-8,
         (uhat - star).sup_abs() < 1e-8);
    prop("poisson_newton_budget", iters, 10, iters <= 10);
  }

  {  // mass identity over random densities, both dimensions
    auto sweep = [&](const TorusGrid& g, int count) {
      double worst = 0.0;
      for (int t = 0; t < count; ++t) {
        ScalarField h = detail::random_unit_density(g, rng);
        FieldSolution sol = solve_fields(h);
        worst = std::max(worst,
                         std::fabs(regularity_report(sol, h).exp_mass - 1.0));
      }
      return worst;
    };
    double w1 = sweep(TorusGrid{1, 128}, std::max(10, scale / 5));
    prop("mass_identity_1d", w1, 1e-8, w1 < 1e-8);
    double w2d = sweep(TorusGrid{2, 64}, std::max(5, scale / 10));
    prop("mass_identity_2d", w2d, 1e-8, w2d < 1e-8);
  }

  {  // Loeper inequality on mollified pairs, exact circular transport
    TorusGrid g{1, 128};
    Mollifier moll = make_mollifier(g, 1.0 / 16.0);
    bool all = true;
    double worst = std::numeric_limits<double>::infinity();
    int count = std::max(5, scale / 5);
    for (int t = 0; t < count; ++t) {
      ScalarField h1 = convolve(moll, detail::random_unit_density(g, rng));
      ScalarField h2 = convolve(moll, detail::random_unit_density(g, rng));
      LoeperReport lr = loeper_inequality_check(h1, h2);
      all = all && lr.pass;
      if (lr.rhs > 0.0) worst = std::min(worst, lr.margin / lr.rhs);
    }
    prop("loeper_inequality", worst, -1e-9, all);
  }

  {  // hat-field stability with the explicit A^3/4 constant
    auto sweep = [&](const TorusGrid& g, int count, double& worst) {
      bool all = true;
      for (int t = 0; t < count; ++t) {
        ScalarField h1 = detail::random_unit_density(g, rng);
        ScalarField h2 = detail::random_unit_density(g, rng);
        UhatStabilityReport ur = uhat_stability_check(h1, h2);
        all = all && ur.pass;
        if (ur.rhs > 0.0)
          worst = std::min(worst, (ur.rhs - ur.lhs) / ur.rhs);
      }
      return all;
    };
    double w1 = std::numeric_limits<double>::infinity();
    bool a1 = sweep(TorusGrid{1, 128}, std::max(5, scale / 5), w1);
    prop("uhat_stability_1d", w1, -1e-9, a1);
    double w2d = std::numeric_limits<double>::infinity();
    bool a2 = sweep(TorusGrid{2, 64}, std::max(3, scale / 10), w2d);
    prop("uhat_stability_2d", w2d, -1e-9, a2);
  }

  {  // exact assignment against the factorial oracle
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      int dim = t % 2 ? 2 : 1;
      ParticleEnsemble a = detail::random_ensemble(dim, 6, rng);
      ParticleEnsemble b = detail::random_ensemble(dim, 6, rng);
      double w2 = w2_ensembles_exact(a, b);
      worst = std::max(worst,
                       std::fabs(w2 * w2 - detail::brute_force_w2_sq(a, b)));
    }
    prop("w2_matches_brute_force", worst, 1e-12, worst < 1e-12);
  }

  {  // metric axioms on random triples
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      int dim = t % 2 ? 2 : 1;
      ParticleEnsemble a = detail::random_ensemble(dim, 16, rng);
      ParticleEnsemble b = detail::random_ensemble(dim, 16, rng);
      ParticleEnsemble c = detail::random_ensemble(dim, 16, rng);
      double ab = w2_ensembles_exact(a, b);
      double bc = w2_ensembles_exact(b, c);
      double ac = w2_ensembles_exact(a, c);
      worst = std::max(worst, std::fabs(ab - w2_ensembles_exact(b, a)));
      worst = std::max(worst, w2_ensembles_exact(a, a));
      worst = std::max(worst, ac - (ab + bc));
    }
    prop("w2_metric_axioms", worst, 1e-9, worst < 1e-9);
  }

  {  // moment interpolation with the derived constant
    const int mk[3][2] = {{2, 0}, {4, 1}, {4, 2}};
    double worst = 0.0;
    for (int t = 0; t < 60; ++t) {
      PhaseSpaceGrid ps;
      ps.dim = t % 2 ? 2 : 1;
      ps.nx = ps.dim == 1 ? 16 : 8;
      ps.nv = ps.dim == 1 ? 32 : 16;
      ps.vmax = 3.0;
      ps.g.assign(ps.x_cells() * ps.v_cells(), 0.0);
      double temp = rng.uniform(0.3, 2.0);
      for (std::size_t i = 0; i < ps.x_cells(); ++i)
        for (std::size_t j = 0; j < ps.v_cells(); ++j) {
          double vm = ps.v_mag(j);
          ps.g[i * ps.v_cells() + j] =
              rng.uniform() * std::exp(-vm * vm / (2.0 * temp));
        }
      InterpolationCheck c =
          interpolation_check(ps, mk[t % 3][0], mk[t % 3][1]);
      if (c.rhs > 0.0) worst = std::max(worst, c.lhs / c.rhs);
    }
    prop("moment_interpolation", worst, 1.0 + 1e-9, worst <= 1.0 + 1e-9);
  }

  {  // regularised kernel bound stays uniform as the width shrinks
    TorusGrid g{2, 128};
    double base = regularised_kernel_bound(g, 1.0 / 8.0);
    double worst = 0.0;
    for (double r : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0})
      worst = std::max(worst, regularised_kernel_bound(g, r));
    prop("kernel_bound_uniform", worst / base, 2.0, worst <= 2.0 * base);
  }

  {  // a coupled run with zero perturbation stays bitwise on the diagonal
    SimConfig zc;
    zc.grid = TorusGrid{1, 32};
    zc.n_particles = 300;
    zc.dt = 1e-3;
    zc.t_final = 0.05;
    zc.output_interval = 0.01;
    zc.seed = rng.raw();
    zc.initial.kind = InitialData::Kind::PerturbedMaxwellian;
    zc.initial.temperature = 0.5;
    zc.initial.amplitude = 0.1;
    zc.initial.mode = 1;
    CoupledRunResult z = coupled_run(zc, {0.0, 0.0}, 256);
    double d_max = 0.0;
    for (const CoupledRecord& r : z.records) d_max = std::max(d_max, r.d_value);
    prop("zero_perturbation_twin", d_max, 1e-20, d_max < 1e-20);
  }

  {  // regularised energy drift over a short marched window
    SimConfig ec;
    ec.grid = TorusGrid{1, 64};
    ec.n_particles = 2000;
    ec.dt = 1e-3;
    ec.t_final = 0.2;
    ec.output_interval = 0.05;
    ec.mollifier_r = 1.0 / 16.0;
    ec.seed = rng.raw();
    ec.initial.kind = InitialData::Kind::PerturbedMaxwellian;
    ec.initial.temperature = 0.5;
    ec.initial.amplitude = 0.1;
    ec.initial.mode = 1;
    ParticleEnsemble e =
        sample_initial(ec.initial, ec.n_particles, ec.grid.dim, ec.seed);
    std::vector<DiagnosticsRecord> recs = vpme::run(ec, e);
    double e0 = recs.front().total_energy;
    double drift = 0.0;
    for (const DiagnosticsRecord& r : recs)
      drift = std::max(drift, std::fabs(r.total_energy - e0));
    drift /= std::max(std::fabs(e0), 1e-300);
    prop("energy_drift", drift, 1e-3, drift < 1e-3);
  }

  {  // uniform Maxwellian stays near the neutral state
    SimConfig uc;
    uc.grid = TorusGrid{1, 32};
    uc.n_particles = 20000;
    uc.dt = 1e-3;
    uc.t_final = 0.2;
    uc.output_interval = 0.05;
    uc.mollifier_r = 1.0 / 16.0;
    uc.seed = rng.raw();
    uc.initial.kind = InitialData::Kind::UniformMaxwellian;
    uc.initial.temperature = 1.0;
    ParticleEnsemble e =
        sample_initial(uc.initial, uc.n_particles, uc.grid.dim, uc.seed);
    std::vector<DiagnosticsRecord> recs = vpme::run(uc, e);
    double base = recs.front().rho_sup;
    double worst = 0.0;
    for (const DiagnosticsRecord& r : recs) worst = std::max(worst, r.rho_sup);
    prop("stationary_density", worst / base, 3.0, worst <= 3.0 * base);
  }

  std::string csv = "property,pass,observed,bound\n";
  for (const PropertyRow& r : rows)
    csv += r.name + "," + (r.pass ? "1" : "0") + "," + io::g17(r.observed) +
           "," + io::g17(r.bound) + "\n";
  run.emit("verify.csv", csv);
  return run.finish();
}

}  // namespace scenarios
}  // namespace vpme

#endif
