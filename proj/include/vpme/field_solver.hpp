/* field_solver.hpp: the split electrostatic solve.
 *
 * Given a unit-mass density rho, the potential splits as U = Ubar + Uhat:
 *
 *     lap Ubar = 1 - rho          (linear, zero-mean convention)
 *     lap Uhat = e^{Ubar + Uhat} - 1
 *
 * The nonlinear part is the Euler-Lagrange equation of the strictly convex
 * functional
 *
 *     J[h] = int  1/2 |grad h|^2 + e^{Ubar + h} - h
 *
 * so a damped Newton iteration with a line search on J is globally
 * convergent and the iterates decrease J monotonically. The linearised
 * operator -lap + e^{Ubar + Uhat} is symmetric positive definite; inner
 * solves use conjugate gradients preconditioned by the inverse Laplacian
 * (shifted by the mean Newton weight, which is what makes it invertible on
 * constants).
 *
 * Integrating the Uhat equation over the torus gives int e^U = 1 at
 * convergence; that identity is the cheapest global correctness check the
 * solver has and tests lean on it heavily.
 */

#ifndef VPME_FIELD_SOLVER_HPP
#define VPME_FIELD_SOLVER_HPP

#include <algorithm>

#include "vpme/mollifier.hpp"

namespace vpme {

struct NewtonOptions {
  double tol = 1e-10;              // sup-norm of the residual
  int max_iters = 50;
  double cg_rel_tol = 1e-12;
  int cg_max_iters = 2000;
  const ScalarField* warm_start = nullptr;  // initial Uhat guess
};

struct FieldSolution {
  ScalarField u_bar, u_hat;
  VectorField e_bar, e_hat;  // E = -grad U, split the same way
  int newton_iters = 0;
  double residual_sup = 0.0;

  ScalarField potential() const {
    ScalarField u = u_bar;
    u += u_hat;
    return u;
  }
};

inline ScalarField solve_linear_poisson(const ScalarField& rho) {
  double mass = rho.integral();
  if (std::fabs(mass - 1.0) > 1e-10)
    throw NonUnitMass("solve_linear_poisson: density mass " +
                      std::to_string(mass) + " != 1");
  ScalarField rhs(rho.grid);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs.v[i] = 1.0 - rho.v[i];
  // the mass check above guarantees the zero-mode is at tolerance
  return inverse_laplacian(rhs, 2e-10);
}

namespace detail {

/* objective J[h], the line-search merit function */
inline double newton_objective(const ScalarField& u_bar, const ScalarField& h) {
  VectorField gh = gradient(h);
  double grad_part = 0.5 * gh.l2_squared();
  double point_part = pairwise_sum_indexed(h.size(), [&](std::size_t i) {
    return std::exp(u_bar.v[i] + h.v[i]) - h.v[i];
  });
  return grad_part + point_part * u_bar.grid.cell_volume();
}

/* residual F(h) = lap h - e^{Ubar + h} + 1 */
inline ScalarField newton_residual(const ScalarField& u_bar,
                                   const ScalarField& h) {
  ScalarField F = laplacian(h);
  for (std::size_t i = 0; i < F.size(); ++i)
    F.v[i] += 1.0 - std::exp(u_bar.v[i] + h.v[i]);
  return F;
}

/* CG on (-lap + diag(w)) du = b, preconditioned by (-lap + wbar)^{-1}. */
inline ScalarField newton_inner_solve(const ScalarField& w,
                                      const ScalarField& b, double rel_tol,
                                      int max_iters) {
  const TorusGrid& g = w.grid;
  double wbar = w.mean();

  auto apply_A = [&](const ScalarField& x) {
    ScalarField y = laplacian(x);
    for (std::size_t i = 0; i < y.size(); ++i)
      y.v[i] = -y.v[i] + w.v[i] * x.v[i];
    return y;
  };
  auto apply_M = [&](const ScalarField& x) {
    Spectrum s = fft_forward(x);
    for_each_mode(g, [&](std::size_t i, int kx, int ky) {
      double k2 = kTwoPi * kTwoPi * (static_cast<double>(kx) * kx +
                                     static_cast<double>(ky) * ky);
      s.c[i] /= k2 + wbar;
    });
    return fft_inverse(s);
  };
  auto dot = [&](const ScalarField& a, const ScalarField& c) {
    return pairwise_sum_indexed(a.size(),
                                [&](std::size_t i) { return a.v[i] * c.v[i]; });
  };

  ScalarField x(g);
  ScalarField r = b;
  double b_norm = std::sqrt(dot(b, b));
  if (b_norm == 0.0) return x;

  ScalarField z = apply_M(r);
  ScalarField p = z;
  double rz = dot(r, z);
  for (int it = 0; it < max_iters; ++it) {
    ScalarField Ap = apply_A(p);
    double alpha = rz / dot(p, Ap);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.v[i] += alpha * p.v[i];
      r.v[i] -= alpha * Ap.v[i];
    }
    if (std::sqrt(dot(r, r)) <= rel_tol * b_norm) return x;
    z = apply_M(r);
    double rz_new = dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < p.size(); ++i) p.v[i] = z.v[i] + beta * p.v[i];
  }
  throw NoConvergence("newton inner CG stalled", max_iters,
                      std::sqrt(dot(r, r)) / b_norm);
}

}  // namespace detail

inline ScalarField solve_nonlinear_poisson(const ScalarField& u_bar,
                                           const NewtonOptions& opt = {},
                                           int* iters_out = nullptr,
                                           double* residual_out = nullptr) {
  const TorusGrid& g = u_bar.grid;
  ScalarField h = opt.warm_start ? *opt.warm_start : ScalarField(g);
  if (opt.warm_start) require_same_grid(g, opt.warm_start->grid, "warm start");

  double J = detail::newton_objective(u_bar, h);
  if (!std::isfinite(J))
    throw DomainError("solve_nonlinear_poisson: objective not finite, "
                      "source or warm start contains bad values");
  for (int it = 0; it < opt.max_iters; ++it) {
    ScalarField F = detail::newton_residual(u_bar, h);
    double res = F.sup_abs();
    if (!std::isfinite(res))
      throw NoConvergence("newton residual not finite", it, res);
    if (res <= opt.tol) {
      if (iters_out) *iters_out = it;
      if (residual_out) *residual_out = res;
      return h;
    }

    ScalarField w(g);
    for (std::size_t i = 0; i < w.size(); ++i)
      w.v[i] = std::exp(u_bar.v[i] + h.v[i]);
    ScalarField du =
        detail::newton_inner_solve(w, F, opt.cg_rel_tol, opt.cg_max_iters);

    // backtracking on J; the full step wins once the iterate is close
    double alpha = 1.0;
    ScalarField trial = h;
    for (int bt = 0;; ++bt) {
      trial = h;
      for (std::size_t i = 0; i < trial.size(); ++i)
        trial.v[i] += alpha * du.v[i];
      double J_trial = detail::newton_objective(u_bar, trial);
      if (J_trial <= J + 1e-14 * std::fabs(J)) {
        J = J_trial;
        break;
      }
      alpha *= 0.5;
      if (bt > 60)
        throw NoConvergence("newton line search exhausted", it, res);
    }
    h = trial;
  }
  ScalarField F = detail::newton_residual(u_bar, h);
  throw NoConvergence("newton iteration limit", opt.max_iters, F.sup_abs());
}

inline FieldSolution solve_fields(const ScalarField& rho,
                                  const NewtonOptions& opt = {}) {
  FieldSolution sol;
  sol.u_bar = solve_linear_poisson(rho);
  sol.u_hat = solve_nonlinear_poisson(sol.u_bar, opt, &sol.newton_iters,
                                      &sol.residual_sup);
  sol.e_bar = gradient(sol.u_bar);
  sol.e_hat = gradient(sol.u_hat);
  for (int c = 0; c < rho.grid.dim; ++c) {
    for (double& x : sol.e_bar.comp[c]) x = -x;
    for (double& x : sol.e_hat.comp[c]) x = -x;
  }
  return sol;
}

struct RegularityReport {
  double ubar_sup = 0.0;
  double ubar_grad_sup = 0.0;
  double uhat_sup = 0.0;
  double uhat_grad_sup = 0.0;
  double uhat_c1_bound = 0.0;  // sup + gradient sup, the working C^1 proxy
  double density_sup = 0.0;
  double density_lp = 0.0;     // p = (d+2)/d
  double exp_mass = 0.0;       // int e^U, should be 1 at convergence
};

inline RegularityReport regularity_report(const FieldSolution& sol,
                                          const ScalarField& rho) {
  require_same_grid(sol.u_bar.grid, rho.grid, "regularity_report");
  RegularityReport r;
  r.ubar_sup = sol.u_bar.sup_abs();
  r.ubar_grad_sup = sol.e_bar.sup_magnitude();
  r.uhat_sup = sol.u_hat.sup_abs();
  r.uhat_grad_sup = sol.e_hat.sup_magnitude();
  r.uhat_c1_bound = r.uhat_sup + r.uhat_grad_sup;
  r.density_sup = rho.sup_abs();
  double p = (rho.grid.dim + 2.0) / rho.grid.dim;
  double q = pairwise_sum_indexed(rho.size(), [&](std::size_t i) {
    return std::pow(std::fabs(rho.v[i]), p);
  });
  r.density_lp = std::pow(q * rho.grid.cell_volume(), 1.0 / p);
  ScalarField u = sol.potential();
  r.exp_mass = pairwise_sum_indexed(u.size(), [&](std::size_t i) {
                 return std::exp(u.v[i]);
               }) *
               u.grid.cell_volume();
  return r;
}

}  // namespace vpme

#endif
