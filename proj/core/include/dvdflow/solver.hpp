#pragma once

// Matrix-free Newton-Krylov building blocks: restarted, right-preconditioned
// GMRES whose success path re-verifies the true residual; an inexact Newton
// loop with a backtracking (Armijo) line search that never accepts an
// increase of ||F||; and an overlapping-block additive Schwarz preconditioner
// factored blockwise from an assembled sparse approximation of the system.
//
// Everything runs sequentially in a fixed order, so solves are deterministic.

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dvdflow {

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// A linear map y = A x on contiguous vectors of fixed dimension.
struct LinearOperator {
  int dim = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
};

double l2_norm(std::span<const double> v);

struct KrylovConfig {
  double xi_rel = 1e-12;  ///< relative residual target (vs ||rhs||)
  double xi_abs = 1e-12;  ///< absolute residual floor
  int restart = 30;       ///< Arnoldi cycle length
  int max_iters = 2000;   ///< total inner iterations across restarts
};

struct GmresResult {
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;  ///< true residual ||rhs - op x|| at return
};

/// Solves op x = rhs with restarted GMRES, right-preconditioned by precond
/// when given.  x carries the initial guess in and the final iterate out.
/// Success means the *unpreconditioned* residual satisfies
/// ||rhs - op x|| <= max(xi_rel ||rhs||, xi_abs); the estimate from the
/// Arnoldi recurrence is never trusted on its own.
GmresResult gmres(const LinearOperator& op, std::span<const double> rhs,
                  std::vector<double>& x, const KrylovConfig& cfg,
                  const LinearOperator* precond = nullptr);

struct NewtonConfig {
  double eps_rel = 1e-12;  ///< stop when ||F|| <= max(eps_rel ||F(x0)||, eps_abs)
  double eps_abs = 1e-12;
  int max_iters = 50;
  double armijo_c1 = 1e-4;  ///< accept when ||F_new|| <= (1 - c1 lambda) ||F||
  double shrink = 0.5;      ///< step shrink factor per backtracking round
  int max_halvings = 20;
  /// Stagnation acceptance.  Stiff residuals (a squared Laplacian inside F)
  /// have a double-precision evaluation floor well above eps_rel * ||F0||;
  /// once the iteration makes no further floating-point progress, the
  /// iterate is accepted as converged provided
  ///   ||F|| <= max(stall_rel * max(||F0||, stall_scale), stall_abs).
  double stall_rel = 1e-9;
  /// Reference residual scale for stagnation acceptance.  A caller that
  /// supplies a good initial guess (so ||F0|| is already small) should set
  /// this to the residual norm of a cold start on the same system; zero
  /// means "use ||F0||".
  double stall_scale = 0.0;
  /// Absolute part of the stagnation window: the evaluation floor does not
  /// shrink proportionally with ||F0|| when the step (and with it the
  /// residual scale) gets small, so a small-residual stall is still a stall.
  double stall_abs = 1e-10;
};

struct NewtonProblem {
  int dim = 0;
  /// f = F(x)
  std::function<void(std::span<const double>, std::span<double>)> residual;
  /// out = F'(x) dir (directional derivative at x)
  std::function<void(std::span<const double>, std::span<const double>,
                     std::span<double>)>
      jacobian_apply;
  /// Optional factory for the linear-solve preconditioner; called once per
  /// newton() call with the initial iterate and reused frozen across the
  /// Newton iterations.
  std::function<LinearOperator(std::span<const double>)> preconditioner;
};

struct NewtonResult {
  bool converged = false;
  bool stalled = false;  ///< converged via stagnation acceptance
  int iterations = 0;
  int gmres_iterations = 0;  ///< summed over all linear solves
  double initial_residual_norm = 0.0;
  double final_residual_norm = 0.0;
  std::string failure;  ///< empty on success, else a diagnostic
};

/// Inexact Newton: each step solves F'(x) s = -F(x) with gmres to the given
/// Krylov tolerances, then backtracks until ||F|| decreases.  Returns with
/// converged = false (never throws) when the iteration stalls, carrying a
/// diagnostic; x then holds the best iterate reached.
NewtonResult newton(const NewtonProblem& prob, std::vector<double>& x,
                    const NewtonConfig& ncfg, const KrylovConfig& kcfg);

/// Overlapping-block additive Schwarz: the index space is cut into contiguous
/// blocks of the given size, each extended by `overlap` on both sides
/// (overlap 0 is block Jacobi); each extended block of the assembled matrix
/// is factored densely once, and apply() sums the blockwise solves.
class AdditiveSchwarz {
 public:
  AdditiveSchwarz(const Eigen::SparseMatrix<double>& a, int block,
                  int overlap);

  int dim() const;
  void apply(std::span<const double> x, std::span<double> y) const;

  /// The preconditioner as a LinearOperator; shares ownership of the
  /// factorizations, so it stays valid after this object goes away.
  LinearOperator as_operator() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Direct sum of operators acting on consecutive segments of one vector.
LinearOperator block_diagonal(std::vector<LinearOperator> parts);

/// y = A x for an assembled sparse matrix, packaged as a LinearOperator that
/// shares ownership of the matrix.
LinearOperator sparse_operator(Eigen::SparseMatrix<double> a);

}  // namespace dvdflow
