/* kernel.hpp: periodic Green function and Coulomb kernel.
 *
 * G solves -lap G = delta_0 - 1 with zero mean, where delta_0 is the discrete
 * unit impulse: value 1/h^d at the x = 0 node, zero elsewhere, grid integral
 * exactly 1. Subtracting the uniform background removes the k = 0 obstruction
 * and is what makes a periodic solution exist at all. K = -grad G is the
 * force kernel; it blows up like |x|^{-(d-1)} towards the origin, which on a
 * grid means the origin cell value is meaningless and callers that bound K
 * must skip it (it comes out exactly zero here by antisymmetry, not because
 * the kernel is small there).
 */

#ifndef VPME_KERNEL_HPP
#define VPME_KERNEL_HPP

#include "vpme/operators.hpp"

namespace vpme {

inline ScalarField unit_impulse(const TorusGrid& g) {
  ScalarField d(g);
  d.v[g.origin_index()] = 1.0 / g.cell_volume();
  return d;
}

inline ScalarField greens_function(const TorusGrid& g) {
  ScalarField rhs = unit_impulse(g);
  // -lap G = delta - 1  =>  lap G = 1 - delta, mean free by construction
  for (double& x : rhs.v) x = -x;
  for (double& x : rhs.v) x += 1.0;
  return inverse_laplacian(rhs, 1e-9);
}

struct CoulombKernelView {
  VectorField field;        // K = -grad G on the full grid
  std::size_t origin;       // flat index of the singular cell, excluded from bounds
};

inline CoulombKernelView coulomb_kernel(const TorusGrid& g) {
  ScalarField G = greens_function(g);
  VectorField K = gradient(G);
  for (int c = 0; c < g.dim; ++c)
    for (double& x : K.comp[c]) x = -x;
  return CoulombKernelView{std::move(K), g.origin_index()};
}

}  // namespace vpme

#endif
