#include "dvdflow/stencil.hpp"

#include <algorithm>
#include <vector>

namespace dvdflow {

namespace {

inline int neighbor(int i, int delta, int n, BoundaryKind bc) {
  int j = i + delta;
  if (bc == BoundaryKind::Periodic) {
    if (j < 0) j += n;
    if (j >= n) j -= n;
  } else {
    j = std::clamp(j, 0, n - 1);
  }
  return j;
}

}  // namespace

SparseMatrixD laplacian_matrix(const UniformGrid& g) {
  const int n = g.cell_count();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * (g.dim == 2 ? 5 : 3));
  const double inv_dx2 = 1.0 / (g.dx() * g.dx());
  if (g.dim == 1) {
    for (int i = 0; i < g.nx; ++i) {
      trip.emplace_back(i, neighbor(i, -1, g.nx, g.bc), inv_dx2);
      trip.emplace_back(i, i, -2.0 * inv_dx2);
      trip.emplace_back(i, neighbor(i, +1, g.nx, g.bc), inv_dx2);
    }
  } else {
    const double inv_dy2 = 1.0 / (g.dy() * g.dy());
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        const int c = g.index(ix, iy);
        trip.emplace_back(c, g.index(neighbor(ix, -1, g.nx, g.bc), iy), inv_dx2);
        trip.emplace_back(c, g.index(neighbor(ix, +1, g.nx, g.bc), iy), inv_dx2);
        trip.emplace_back(c, g.index(ix, neighbor(iy, -1, g.ny, g.bc)), inv_dy2);
        trip.emplace_back(c, g.index(ix, neighbor(iy, +1, g.ny, g.bc)), inv_dy2);
        trip.emplace_back(c, c, -2.0 * (inv_dx2 + inv_dy2));
      }
  }
  SparseMatrixD a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());  // duplicates sum: boundary
                                                // reflection folds into the
                                                // diagonal automatically
  return a;
}

SparseMatrixD identity_matrix(int n) {
  SparseMatrixD a(n, n);
  a.setIdentity();
  return a;
}

SparseMatrixD diagonal_matrix(const Field& d) {
  const int n = d.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, d[i]);
  SparseMatrixD a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

SparseMatrixD flow_system_matrix(const UniformGrid& g, DissipationKind kind,
                                 double h, const SparseMatrixD& w) {
  const int n = g.cell_count();
  const SparseMatrixD eye = identity_matrix(n);
  if (kind == DissipationKind::L2) {
    SparseMatrixD out = eye + h * w;
    out.makeCompressed();
    return out;
  }
  const SparseMatrixD lap = laplacian_matrix(g);
  SparseMatrixD out = eye - h * (lap * w).pruned();
  out.makeCompressed();
  return out;
}

SparseMatrixD shifted_operator_matrix(const UniformGrid& g,
                                      const FreeEnergy& fe) {
  const int n = g.cell_count();
  SparseMatrixD out =
      SparseMatrixD(-laplacian_matrix(g)) +
      (fe.beta / (fe.epsilon * fe.epsilon)) * identity_matrix(n);
  out.makeCompressed();
  return out;
}

}  // namespace dvdflow
