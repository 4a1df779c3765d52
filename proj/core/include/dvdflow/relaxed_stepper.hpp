#pragma once

// Linear, unconditionally stable relaxations of the one-stage DVD scheme.
// All of them trade the implicit finite quotient for an auxiliary variable
// (or a convex splitting) evaluated at the extrapolated midpoint state
// phi_bar = (3/2) phi_n - (1/2) phi_{n-1}, so each step costs one or two
// solves with a constant-coefficient operator instead of a Newton iteration.
//
// The potential is split as e1(phi) = shifted_density(phi) plus the quadratic
// absorbed into L = -Lap + beta/eps^2; a scalar auxiliary
// r = (int shifted_density + C0)^(1/m) or a field auxiliary
// Q = (shifted_density + C0)^(1/m) closes the system.  Each scheme dissipates
// its modified energy gamma/2 <phi, L phi> + r^m (or + <Q^m>) exactly, step
// by step, for every step size.  The splitting reproduces the original
// energy up to a constant only for gamma = 1 (all shipped presets); the
// formulas below follow the gamma = 1 splitting verbatim either way.

#include <span>
#include <vector>

#include "dvdflow/dvd_stepper.hpp"  // StepReport
#include "dvdflow/grid.hpp"
#include "dvdflow/model.hpp"
#include "dvdflow/solver.hpp"
#include "dvdflow/stencil.hpp"

namespace dvdflow {

/// Linear-solver seam of the relaxed steppers.  `constant_matrix` promises
/// that `k` has the same values as in every earlier constant call of this
/// solver instance, licensing cached factorizations or preconditioners.
class LinearSolver {
 public:
  virtual ~LinearSolver() = default;
  virtual void solve(const SparseMatrixD& k, bool constant_matrix,
                     std::span<const double> rhs, std::vector<double>& x) = 0;
  /// Iteration count of the most recent solve (0 for direct solvers).
  virtual int last_iterations() const = 0;
};

/// GMRES with an additive Schwarz preconditioner assembled from the system
/// matrix itself; the preconditioner is cached across constant-matrix calls.
class SchwarzGmresSolver final : public LinearSolver {
 public:
  explicit SchwarzGmresSolver(const KrylovConfig& cfg = {}, int block = 128,
                              int overlap = 16);
  void solve(const SparseMatrixD& k, bool constant_matrix,
             std::span<const double> rhs, std::vector<double>& x) override;
  int last_iterations() const override { return last_iterations_; }
  int total_iterations() const { return total_iterations_; }

 private:
  KrylovConfig cfg_;
  int block_;
  int overlap_;
  bool have_cache_ = false;
  LinearOperator cached_precond_;
  LinearOperator cached_op_;
  int last_iterations_ = 0;
  int total_iterations_ = 0;
};

/// Rolling state of a relaxed integration.  phi_prev feeds the two-level
/// extrapolation; r and q are the scalar/field auxiliaries (only the one the
/// scheme uses is maintained).
struct RelaxedState {
  Field phi;
  Field phi_prev;
  bool has_prev = false;
  double r = 0.0;
  Field q;
};

/// phi_bar = (3/2) phi - (1/2) phi_prev; plain phi before the first step.
Field extrapolate(const RelaxedState& state);

/// Shifted potential functional int shifted_density(phi).
double shifted_functional(const Field& phi, const FreeEnergy& fe);

/// Initial scalar auxiliary (int shifted_density + C0)^(1/m).  Throws
/// SolverError when the radicand is nonpositive for even m.
double init_scalar_aux(const Field& phi, int m, const FreeEnergy& fe);

/// Initial field auxiliary (shifted_density + C0)^(1/m), pointwise.
Field init_field_aux(const Field& phi, int m, const FreeEnergy& fe);

/// Modified energies gamma/2 <phi, L phi> + r^m and + int q^m.
double modified_energy(const Field& phi, double r, int m,
                       const FreeEnergy& fe);
double modified_energy(const Field& phi, const Field& q, int m,
                       const FreeEnergy& fe);

/// Scalar-auxiliary scheme at m = 1: one constant-coefficient solve
/// (I - (h gamma/2) G L) phi_1 = phi_0 + h G [(gamma/2) L phi_0 + w],
/// w = shifted_derivative(phi_bar); then r_1 = r_0 + <w, phi_1 - phi_0>.
StepReport rdvd1_step(RelaxedState& state, const FreeEnergy& fe,
                      DissipationKind kind, double h, LinearSolver& solver);

/// Scalar-auxiliary scheme at m = 2 (the classical scalar-auxiliary
/// Crank-Nicolson variant): two solves with the same constant operator close
/// the rank-one coupling exactly.
StepReport savcn_step(RelaxedState& state, const FreeEnergy& fe,
                      DissipationKind kind, double h, LinearSolver& solver);

/// Field-auxiliary scheme: m = 1 coincides with rdvd1_step's phi-update;
/// m = 2 solves one variable-coefficient system per step.  Only m = 1, 2 are
/// shipped.
StepReport ieq_step(RelaxedState& state, const FreeEnergy& fe,
                    DissipationKind kind, double h, int m,
                    LinearSolver& solver);

/// Stabilizer of the convex splitting: Lhat = a0 I + a1 (-Lap) + a2 Lap^2.
/// The default a0 = 2/eps^2 dominates e1'' on [-1, 1].
struct StabilizerCoefficients {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
};

/// Convex-splitting (stabilized) scheme:
/// (I - h G (-gamma Lap + Lhat)) phi_1 = phi_0 - h G (Lhat phi_0 - e1'(phi_0)).
/// Dissipates the *original* discrete energy when Lhat dominates e1''.
StepReport stabilized_step(RelaxedState& state, const FreeEnergy& fe,
                           DissipationKind kind, double h,
                           const StabilizerCoefficients& lhat,
                           LinearSolver& solver);

}  // namespace dvdflow
