#pragma once

// Assembled sparse counterparts of the matrix-free grid operators, used to
// feed the additive Schwarz preconditioner and to realize the constant- or
// frozen-coefficient linear systems of the relaxed steppers.  Entries match
// the matrix-free applies exactly (same formulas, same boundary handling).

#include <Eigen/Sparse>

#include "dvdflow/grid.hpp"
#include "dvdflow/model.hpp"

namespace dvdflow {

using SparseMatrixD = Eigen::SparseMatrix<double>;

/// The 3/5-point Laplacian of the grid as a sparse matrix.
SparseMatrixD laplacian_matrix(const UniformGrid& g);

SparseMatrixD identity_matrix(int n);

/// diag(d).
SparseMatrixD diagonal_matrix(const Field& d);

/// System matrix I - h G W for the flow operator G of the given kind
/// (L2: G = -I, Hminus1: G = Laplacian) and an assembled spatial operator W.
/// Mobility scaling is folded into h by the callers.
SparseMatrixD flow_system_matrix(const UniformGrid& g, DissipationKind kind,
                                 double h, const SparseMatrixD& w);

/// The shifted linear operator L = -Laplacian + (beta/eps^2) I used by the
/// relaxed splittings.
SparseMatrixD shifted_operator_matrix(const UniformGrid& g,
                                      const FreeEnergy& fe);

}  // namespace dvdflow
