#include "dvdflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace dvdflow {

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (const double x : v) acc += x * x;
  return std::sqrt(acc);
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void check_operator(const LinearOperator& op, std::size_t n,
                    const char* name) {
  if (op.dim != static_cast<int>(n) || !op.apply)
    throw SolverError(std::string(name) + " has wrong dimension or no apply");
}

}  // namespace

GmresResult gmres(const LinearOperator& op, std::span<const double> rhs,
                  std::vector<double>& x, const KrylovConfig& cfg,
                  const LinearOperator* precond) {
  const std::size_t n = rhs.size();
  check_operator(op, n, "gmres operator");
  if (precond) check_operator(*precond, n, "gmres preconditioner");
  if (x.size() != n) throw SolverError("gmres initial guess has wrong size");
  if (cfg.restart < 1 || cfg.max_iters < 1)
    throw SolverError("gmres config must allow at least one iteration");

  const double tol = std::max(cfg.xi_rel * l2_norm(rhs), cfg.xi_abs);
  const int m = cfg.restart;

  GmresResult result;
  std::vector<double> r(n), w(n), z(n);

  const auto true_residual = [&]() {
    op.apply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    return l2_norm(r);
  };

  double rnorm = true_residual();
  std::vector<std::vector<double>> basis;
  Eigen::MatrixXd hess(m + 1, m);
  Eigen::VectorXd g(m + 1), cs(m), sn(m);

  while (true) {
    result.residual_norm = rnorm;
    if (rnorm <= tol) {
      result.converged = true;
      return result;
    }
    if (result.iterations >= cfg.max_iters) return result;

    // Arnoldi cycle on the current true residual.
    basis.assign(1, r);
    for (double& v : basis[0]) v /= rnorm;
    hess.setZero();
    g.setZero();
    g(0) = rnorm;

    int j = 0;
    bool breakdown = false;
    for (; j < m && result.iterations < cfg.max_iters; ++j) {
      if (precond)
        precond->apply(basis[j], z);
      else
        std::copy(basis[j].begin(), basis[j].end(), z.begin());
      op.apply(z, w);

      for (int i = 0; i <= j; ++i) {
        const double h = dot(basis[i], w);
        hess(i, j) = h;
        for (std::size_t c = 0; c < n; ++c) w[c] -= h * basis[i][c];
      }
      const double hnext = l2_norm(w);
      hess(j + 1, j) = hnext;
      ++result.iterations;

      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * hess(i, j) + sn(i) * hess(i + 1, j);
        hess(i + 1, j) = -sn(i) * hess(i, j) + cs(i) * hess(i + 1, j);
        hess(i, j) = t;
      }
      const double denom = std::hypot(hess(j, j), hess(j + 1, j));
      if (denom == 0.0) {
        breakdown = true;
        ++j;
        break;
      }
      cs(j) = hess(j, j) / denom;
      sn(j) = hess(j + 1, j) / denom;
      hess(j, j) = denom;
      hess(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);

      if (hnext == 0.0) {  // invariant subspace reached: solution is exact
        ++j;
        breakdown = true;
        break;
      }
      if (std::abs(g(j + 1)) <= tol) {
        ++j;
        break;
      }
      std::vector<double> next = w;
      for (double& v : next) v /= hnext;
      basis.push_back(std::move(next));
    }

    if (j > 0) {
      // Solve the triangular least-squares system and take the step
      // x += M (V y) (right preconditioning touches the update only).
      Eigen::VectorXd y(j);
      for (int i = j - 1; i >= 0; --i) {
        double s = g(i);
        for (int c = i + 1; c < j; ++c) s -= hess(i, c) * y(c);
        y(i) = s / hess(i, i);
      }
      std::fill(z.begin(), z.end(), 0.0);
      for (int c = 0; c < j; ++c)
        for (std::size_t i = 0; i < n; ++i) z[i] += y(c) * basis[c][i];
      if (precond) {
        precond->apply(z, w);
        for (std::size_t i = 0; i < n; ++i) x[i] += w[i];
      } else {
        for (std::size_t i = 0; i < n; ++i) x[i] += z[i];
      }
    }

    const double prev = rnorm;
    rnorm = true_residual();
    result.residual_norm = rnorm;
    if (rnorm <= tol) {
      result.converged = true;
      return result;
    }
    // A breakdown means the Krylov space is exhausted; restarting cannot
    // improve on it.  A cycle that failed to even halve the true residual
    // has stalled (typically a stale preconditioner): stop burning matvecs
    // and let the caller decide how to recover.
    if (breakdown || rnorm >= 0.5 * prev) return result;
  }
}

NewtonResult newton(const NewtonProblem& prob, std::vector<double>& x,
                    const NewtonConfig& ncfg, const KrylovConfig& kcfg) {
  const std::size_t n = x.size();
  if (prob.dim != static_cast<int>(n) || !prob.residual ||
      !prob.jacobian_apply)
    throw SolverError("newton problem is incomplete or has wrong dimension");

  NewtonResult result;
  std::vector<double> f(n), rhs(n), s(n), xtrial(n), ftrial(n);

  prob.residual(x, f);
  double fnorm = l2_norm(f);
  result.initial_residual_norm = fnorm;
  const double target = std::max(ncfg.eps_rel * fnorm, ncfg.eps_abs);

  LinearOperator m;
  if (prob.preconditioner) m = prob.preconditioner(x);  // frozen at x0

  // ||F|| at the double-precision floor of the residual evaluation shows up
  // as a zero correction, a line search with nothing left to gain, or an
  // accepted step that no longer shrinks the residual; each ends the
  // iteration, successfully when the residual already fell far enough
  // relative to the cold-start scale.
  const double stall_target = std::max(
      ncfg.stall_rel * std::max(result.initial_residual_norm, ncfg.stall_scale),
      ncfg.stall_abs);
  const auto stagnated = [&]() {
    if (fnorm > stall_target) return false;
    result.converged = true;
    result.stalled = true;
    result.final_residual_norm = fnorm;
    return true;
  };

  while (fnorm > target) {
    if (result.iterations >= ncfg.max_iters) {
      if (stagnated()) return result;
      result.failure = "newton reached max_iters=" +
                       std::to_string(ncfg.max_iters) + " with ||F||=" +
                       sci(fnorm);
      result.final_residual_norm = fnorm;
      return result;
    }

    LinearOperator jac;
    jac.dim = static_cast<int>(n);
    jac.apply = [&prob, &x](std::span<const double> dir,
                            std::span<double> out) {
      prob.jacobian_apply(x, dir, out);
    };
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -f[i];
    std::fill(s.begin(), s.end(), 0.0);
    GmresResult lin =
        gmres(jac, rhs, s, kcfg, prob.preconditioner ? &m : nullptr);
    result.gmres_iterations += lin.iterations;
    if (!lin.converged && prob.preconditioner) {
      // The frozen preconditioner goes stale once the iterate has moved far
      // from where it was built; refresh it at the current iterate and give
      // the linear solve one more chance.
      m = prob.preconditioner(x);
      std::fill(s.begin(), s.end(), 0.0);
      lin = gmres(jac, rhs, s, kcfg, &m);
      result.gmres_iterations += lin.iterations;
    }
    if (std::getenv("DVDFLOW_NEWTON_TRACE"))
      std::fprintf(stderr,
                   "newton it=%d ||F||=%.3e gmres conv=%d iters=%d res=%.3e "
                   "||s||=%.3e\n",
                   result.iterations, fnorm, (int)lin.converged,
                   lin.iterations, lin.residual_norm, l2_norm(s));

    if (l2_norm(s) == 0.0) {
      if (stagnated()) return result;
      result.failure = "linear solve returned a zero correction at ||F||=" +
                       sci(fnorm);
      result.final_residual_norm = fnorm;
      return result;
    }

    double lambda = 1.0;
    bool accepted = false;
    double fprev = fnorm;
    for (int t = 0; t <= ncfg.max_halvings; ++t) {
      for (std::size_t i = 0; i < n; ++i) xtrial[i] = x[i] + lambda * s[i];
      prob.residual(xtrial, ftrial);
      const double fnew = l2_norm(ftrial);
      if (fnew <= (1.0 - ncfg.armijo_c1 * lambda) * fnorm) {
        x.swap(xtrial);
        f.swap(ftrial);
        fnorm = fnew;
        accepted = true;
        break;
      }
      lambda *= ncfg.shrink;
    }
    if (!accepted) {
      if (stagnated()) return result;
      result.failure = "line search found no decrease after " +
                       std::to_string(ncfg.max_halvings) +
                       " halvings at ||F||=" + sci(fnorm);
      result.final_residual_norm = fnorm;
      return result;
    }
    ++result.iterations;
    // An accepted step that barely moves the residual while already inside
    // the stall window is floating-point noise; stop before burning more
    // linear solves on it.
    if (fnorm > 0.9 * fprev && stagnated()) return result;
  }

  result.converged = true;
  result.final_residual_norm = fnorm;
  return result;
}

struct AdditiveSchwarz::Impl {
  int n = 0;
  struct Block {
    int begin = 0;
    int end = 0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  };
  std::vector<Block> blocks;

  void apply(std::span<const double> x, std::span<double> y) const {
    if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n)
      throw SolverError("schwarz apply size mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    for (const auto& b : blocks) {
      const int len = b.end - b.begin;
      Eigen::VectorXd r(len);
      for (int i = 0; i < len; ++i)
        r(i) = x[static_cast<std::size_t>(b.begin + i)];
      const Eigen::VectorXd u = b.lu.solve(r);
      for (int i = 0; i < len; ++i)
        y[static_cast<std::size_t>(b.begin + i)] += u(i);
    }
  }
};

AdditiveSchwarz::AdditiveSchwarz(const Eigen::SparseMatrix<double>& a,
                                 int block, int overlap)
    : impl_(std::make_shared<Impl>()) {
  if (a.rows() != a.cols()) throw SolverError("schwarz matrix must be square");
  if (block < 1 || overlap < 0)
    throw SolverError("schwarz block size must be >= 1 and overlap >= 0");
  const int n = static_cast<int>(a.rows());
  impl_->n = n;

  for (int start = 0; start < n; start += block) {
    const int lo = std::max(0, start - overlap);
    const int hi = std::min(n, start + block + overlap);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(hi - lo, hi - lo);
    for (int col = lo; col < hi; ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, col); it; ++it)
        if (it.row() >= lo && it.row() < hi)
          dense(it.row() - lo, col - lo) = it.value();

    Impl::Block b;
    b.begin = lo;
    b.end = hi;
    b.lu.compute(dense);
    // Probe the factorization: a singular block shows up as a non-finite
    // solve, which must be reported rather than silently propagated.
    const Eigen::VectorXd probe =
        b.lu.solve(Eigen::VectorXd::Ones(hi - lo));
    if (!probe.allFinite())
      throw SolverError("schwarz block [" + std::to_string(lo) + "," +
                        std::to_string(hi) + ") is singular");
    impl_->blocks.push_back(std::move(b));
  }
}

int AdditiveSchwarz::dim() const { return impl_->n; }

void AdditiveSchwarz::apply(std::span<const double> x,
                            std::span<double> y) const {
  impl_->apply(x, y);
}

LinearOperator AdditiveSchwarz::as_operator() const {
  LinearOperator op;
  op.dim = impl_->n;
  op.apply = [impl = impl_](std::span<const double> x, std::span<double> y) {
    impl->apply(x, y);
  };
  return op;
}

LinearOperator block_diagonal(std::vector<LinearOperator> parts) {
  auto shared = std::make_shared<std::vector<LinearOperator>>(std::move(parts));
  int total = 0;
  for (const auto& p : *shared) {
    if (!p.apply) throw SolverError("block_diagonal part has no apply");
    total += p.dim;
  }
  LinearOperator op;
  op.dim = total;
  op.apply = [shared, total](std::span<const double> x, std::span<double> y) {
    if (static_cast<int>(x.size()) != total ||
        static_cast<int>(y.size()) != total)
      throw SolverError("block_diagonal apply size mismatch");
    std::size_t off = 0;
    for (const auto& p : *shared) {
      const std::size_t len = static_cast<std::size_t>(p.dim);
      p.apply(x.subspan(off, len), y.subspan(off, len));
      off += len;
    }
  };
  return op;
}

LinearOperator sparse_operator(Eigen::SparseMatrix<double> a) {
  if (a.rows() != a.cols())
    throw SolverError("sparse_operator expects a square matrix");
  auto shared = std::make_shared<Eigen::SparseMatrix<double>>(std::move(a));
  LinearOperator op;
  op.dim = static_cast<int>(shared->rows());
  op.apply = [shared](std::span<const double> x, std::span<double> y) {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(),
                                               static_cast<Eigen::Index>(x.size()));
    Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    yv = (*shared) * xv;
  };
  return op;
}

}  // namespace dvdflow
