/* grid.hpp: the periodic domain and fields living on it.
 *
 * Domain is the unit torus [-1/2, 1/2)^d, d = 1 or 2, discretised by n cells
 * per dimension (n a power of two, so spacing h = 1/n is exact in binary).
 * Node j carries coordinate x_j = -1/2 + j h and fields are stored row-major
 * (x index slowest in 2d). All distances are torus distances.
 */

#ifndef VPME_GRID_HPP
#define VPME_GRID_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vpme/common.hpp"

namespace vpme {

/* distance on the unit circle: inf_k |a - b + k| */
inline double torus_distance1(double a, double b) {
  double d = std::fabs(a - b);
  d = d - std::floor(d);  // into [0,1)
  return d <= 0.5 ? d : 1.0 - d;
}

/* d-dimensional torus metric; caps at sqrt(d)/2 */
inline double torus_distance(int dim, const double* x, const double* y) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) {
    double d = torus_distance1(x[c], y[c]);
    s += d * d;
  }
  return std::sqrt(s);
}

inline double torus_distance(const std::array<double, 2>& x,
                             const std::array<double, 2>& y, int dim) {
  return torus_distance(dim, x.data(), y.data());
}

/* wrap a coordinate back into [-1/2, 1/2) */
inline double wrap_coord(double x) {
  double y = x + 0.5;
  y -= std::floor(y);
  // floor can land on 1.0 when x is a tiny negative number
  if (y >= 1.0) y -= 1.0;
  return y - 0.5;
}

struct TorusGrid {
  int dim = 1;  // 1 or 2
  int n = 0;    // cells per dimension

  TorusGrid() = default;
  TorusGrid(int dim_, int n_) : dim(dim_), n(n_) { validate(); }

  void validate() const {
    if (dim != 1 && dim != 2)
      throw ConfigError("grid: dim must be 1 or 2, got " + std::to_string(dim));
    if (n < 8 || (n & (n - 1)) != 0)
      throw ConfigError("grid: n must be a power of two >= 8, got " +
                        std::to_string(n));
  }

  double spacing() const { return 1.0 / n; }
  std::size_t cells() const {
    return dim == 1 ? static_cast<std::size_t>(n)
                    : static_cast<std::size_t>(n) * n;
  }
  double cell_volume() const { return dim == 1 ? spacing() : spacing() * spacing(); }

  /* node coordinate along one axis */
  double coord(int j) const { return -0.5 + j * spacing(); }

  /* row-major flat index */
  std::size_t idx(int i, int j = 0) const {
    return dim == 1 ? static_cast<std::size_t>(i)
                    : static_cast<std::size_t>(i) * n + j;
  }

  /* index of the node at x = 0 (n/2 along each axis) */
  std::size_t origin_index() const { return dim == 1 ? idx(n / 2) : idx(n / 2, n / 2); }

  bool operator==(const TorusGrid& o) const { return dim == o.dim && n == o.n; }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }
};

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b,
                              const char* where) {
  if (a != b)
    throw GridMismatch(std::string(where) + ": grids differ (" +
                       std::to_string(a.dim) + "d n=" + std::to_string(a.n) +
                       " vs " + std::to_string(b.dim) +
                       "d n=" + std::to_string(b.n) + ")");
}

struct ScalarField {
  TorusGrid grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const TorusGrid& g, double fill = 0.0)
      : grid(g), v(g.cells(), fill) {}

  double& at(int i, int j = 0) { return v[grid.idx(i, j)]; }
  double at(int i, int j = 0) const { return v[grid.idx(i, j)]; }

  std::size_t size() const { return v.size(); }

  double mean() const { return pairwise_sum(v) / static_cast<double>(v.size()); }

  /* grid integral (mean times volume 1, but spelled out for clarity) */
  double integral() const { return pairwise_sum(v) * grid.cell_volume(); }

  double sup_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
  }

  double min_value() const {
    double m = v.empty() ? 0.0 : v[0];
    for (double x : v) m = std::min(m, x);
    return m;
  }

  /* pointwise helpers used all over the solvers */
  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid, o.grid, "ScalarField+=");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid, o.grid, "ScalarField-=");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
    return *this;
  }
  ScalarField& operator*=(double a) {
    for (double& x : v) x *= a;
    return *this;
  }
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(double s, ScalarField a) { return a *= s; }

/* L2 norm of a difference shows up in every stability estimate */
inline double l2_norm(const ScalarField& f) {
  double q = pairwise_sum_indexed(f.size(), [&](std::size_t i) {
    return f.v[i] * f.v[i];
  });
  return std::sqrt(q * f.grid.cell_volume());
}

struct VectorField {
  TorusGrid grid;
  std::array<std::vector<double>, 2> comp;  // comp[c] in ScalarField layout

  VectorField() = default;
  explicit VectorField(const TorusGrid& g) : grid(g) {
    for (int c = 0; c < g.dim; ++c) comp[c].assign(g.cells(), 0.0);
  }

  /* Euclidean magnitude at a flat index */
  double magnitude(std::size_t i) const {
    double s = 0.0;
    for (int c = 0; c < grid.dim; ++c) s += comp[c][i] * comp[c][i];
    return std::sqrt(s);
  }

  double sup_magnitude() const {
    double m = 0.0;
    for (std::size_t i = 0; i < grid.cells(); ++i)
      m = std::max(m, magnitude(i));
    return m;
  }

  /* integral of |F|^2, the field-energy building block */
  double l2_squared() const {
    double q = pairwise_sum_indexed(grid.cells(), [&](std::size_t i) {
      double s = 0.0;
      for (int c = 0; c < grid.dim; ++c) s += comp[c][i] * comp[c][i];
      return s;
    });
    return q * grid.cell_volume();
  }
};

inline VectorField operator-(VectorField a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "VectorField-");
  for (int c = 0; c < a.grid.dim; ++c)
    for (std::size_t i = 0; i < a.comp[c].size(); ++i) a.comp[c][i] -= b.comp[c][i];
  return a;
}

}  // namespace vpme

#endif
