#pragma once

// Cell-centered uniform finite-difference grids in one and two dimensions,
// with the discrete operators the energy-stable steppers are built from:
// 3/5-point Laplacian, one-sided difference energy density, weighted inner
// products, and the discrete free energy.
//
// Cells are centered at x_j = (j + 1/2) dx, j = 0..nx-1 (row-major
// (ix, iy) -> iy*nx + ix in 2D).  Boundaries are periodic or homogeneous
// Neumann realized by ghost reflection, which makes every difference across a
// Neumann boundary vanish.  All reductions run in a fixed sequential order so
// identical inputs give bitwise-identical results.

#include <stdexcept>
#include <string>
#include <vector>

#include "dvdflow/model.hpp"

namespace dvdflow {

class GridError : public std::runtime_error {
 public:
  explicit GridError(const std::string& what) : std::runtime_error(what) {}
};

enum class BoundaryKind { Periodic, NeumannReflect };

struct UniformGrid {
  int dim = 1;
  int nx = 0;
  int ny = 1;
  double lx = 0.0;
  double ly = 0.0;
  BoundaryKind bc = BoundaryKind::Periodic;

  double dx() const { return lx / nx; }
  double dy() const { return dim == 2 ? ly / ny : 1.0; }
  /// Quadrature weight of one cell: dx in 1D, dx*dy in 2D.
  double cell_weight() const { return dim == 2 ? dx() * dy() : dx(); }
  int cell_count() const { return dim == 2 ? nx * ny : nx; }
  double measure() const { return dim == 2 ? lx * ly : lx; }
  double x(int ix) const { return (ix + 0.5) * dx(); }
  double y(int iy) const { return (iy + 0.5) * dy(); }
  int index(int ix, int iy = 0) const { return iy * nx + ix; }

  bool operator==(const UniformGrid&) const = default;
};

UniformGrid make_grid_1d(int nx, double lx,
                         BoundaryKind bc = BoundaryKind::Periodic);
UniformGrid make_grid_2d(int nx, int ny, double lx, double ly,
                         BoundaryKind bc = BoundaryKind::Periodic);

/// A scalar field on a grid.  Value semantics; the grid travels with the
/// values and operations insist that operands share one grid.
struct Field {
  UniformGrid grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(const UniformGrid& g, double fill = 0.0)
      : grid(g), values(static_cast<std::size_t>(g.cell_count()), fill) {}

  int size() const { return static_cast<int>(values.size()); }
  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  const double& operator[](int i) const {
    return values[static_cast<std::size_t>(i)];
  }
};

/// out = discrete Laplacian of f (ghost cells by wrap or reflection).
void laplacian(const Field& f, Field& out);
Field laplacian(const Field& f);

/// Weighted inner product sum_j w f_j g_j with w the cell weight.
double inner_product(const Field& a, const Field& b);

/// Total mass sum_j w f_j.
double mass(const Field& f);

/// Pointwise gradient-energy density: per axis the average of the squared
/// forward and backward differences, (1/2)((D+ f)^2 + (D- f)^2), summed over
/// axes.  Chosen so that sum_j w ged_j = -sum_j w f_j (Delta f)_j exactly.
Field gradient_energy_density(const Field& f);

/// Discrete free energy sum_j w { gamma/2 * ged_j + e1(f_j) }.
double discrete_energy(const Field& f, const FreeEnergy& fe);

/// Residual of the discrete summation-by-parts identity
///   sum_j w g_j (Delta f)_j
///     + (1/2) sum_j w [ (D+ g)_j (D+ f)_j + (D- g)_j (D- f)_j ] = 0,
/// which holds exactly for both boundary kinds.  Callers compare the return
/// value against 1e-12 * max(1, |sum_j w g_j (Delta f)_j|).
double sbp_check(const Field& g, const Field& f);

/// sqrt(sum_j w f_j^2): the grid-weighted L2 norm.
double weighted_l2_norm(const Field& f);

/// max_j |f_j|.
double max_norm(const Field& f);

}  // namespace dvdflow
