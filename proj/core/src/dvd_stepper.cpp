#include "dvdflow/dvd_stepper.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "dvdflow/stencil.hpp"

namespace dvdflow {

namespace {

// Double-precision view of a tableau with the pair bookkeeping the steppers
// need: which pair columns carry any weight, and the per-stage diagonal
// weight sigma_i = sum over pairs containing stage i of a_{i,pair} used by
// the frozen preconditioner.
struct TableauView {
  int nu = 0;
  int nhat = 0;
  std::vector<double> rows;       // nu x nhat, row-major
  std::vector<double> nodes;      // per stage, in (0, 1]
  std::vector<PairIndex> pairs;   // linear order
  std::vector<int> used;          // indices k-1 of pair columns with weight
  std::vector<double> sigma;      // per stage

  double coeff(int stage, int col) const { return rows[stage * nhat + col]; }
};

TableauView make_view(const DvdTableau& tab) {
  validate_tableau(tab);
  TableauView v;
  v.nu = tab.nu;
  v.nhat = pair_count(tab.nu);
  v.rows.resize(static_cast<std::size_t>(v.nu) * v.nhat);
  for (int i = 0; i < v.nu; ++i)
    for (int c = 0; c < v.nhat; ++c)
      v.rows[static_cast<std::size_t>(i) * v.nhat + c] =
          boost::rational_cast<double>(tab.rows[i][c]);
  v.nodes.resize(static_cast<std::size_t>(v.nu));
  for (int i = 0; i < v.nu; ++i)
    v.nodes[static_cast<std::size_t>(i)] =
        boost::rational_cast<double>(tab.nodes[static_cast<std::size_t>(i)]);
  v.pairs = pair_list(tab.nu);
  for (int c = 0; c < v.nhat; ++c) {
    bool any = false;
    for (int i = 0; i < v.nu; ++i) any = any || v.coeff(i, c) != 0.0;
    if (any) v.used.push_back(c);
  }
  v.sigma.assign(static_cast<std::size_t>(v.nu), 0.0);
  for (const PairIndex& p : v.pairs) {
    for (int i = 1; i <= v.nu; ++i)
      if (p.i == i || p.j == i) v.sigma[i - 1] += v.coeff(i - 1, p.k - 1);
  }
  return v;
}

// y <- G z for the flow operator of the given kind.
void apply_flow(DissipationKind kind, const Field& z, Field& out) {
  if (kind == DissipationKind::L2) {
    if (!(out.grid == z.grid)) out = Field(z.grid);
    for (int i = 0; i < z.size(); ++i) out[i] = -z[i];
  } else {
    laplacian(z, out);
  }
}

const Field& stage_or_phi0(const StageState& s, int index) {
  return index == 0 ? s.phi0 : s.stages[static_cast<std::size_t>(index - 1)];
}

void check_state(const StageState& s, const TableauView& v) {
  if (static_cast<int>(s.stages.size()) != v.nu)
    throw SolverError("stage count does not match the tableau");
  for (const Field& f : s.stages)
    if (!(f.grid == s.phi0.grid))
      throw SolverError("stages live on different grids");
  if (!(s.h > 0.0)) throw SolverError("step size must be positive");
}

}  // namespace

Field discrete_mu(const Field& fi, const Field& fj, const FreeEnergy& fe) {
  if (!(fi.grid == fj.grid))
    throw GridError("pair fields live on different grids");
  Field sum(fi.grid);
  for (int c = 0; c < sum.size(); ++c) sum[c] = fi[c] + fj[c];
  Field mu = laplacian(sum);
  for (int c = 0; c < mu.size(); ++c)
    mu[c] = -0.5 * fe.gamma * mu[c] + fe.e1_quotient(fi[c], fj[c]);
  return mu;
}

double dvd_identity_residual(const Field& fi, const Field& fj,
                             const FreeEnergy& fe) {
  const Field mu = discrete_mu(fi, fj, fe);
  Field diff(fi.grid);
  for (int c = 0; c < diff.size(); ++c) diff[c] = fi[c] - fj[c];
  return discrete_energy(fi, fe) - discrete_energy(fj, fe) -
         inner_product(diff, mu);
}

void residual(const StageState& state, const DvdTableau& tab,
              DissipationKind kind, const FreeEnergy& fe,
              std::span<double> out) {
  const TableauView view = make_view(tab);
  check_state(state, view);
  const UniformGrid& grid = state.phi0.grid;
  const int n = grid.cell_count();
  if (static_cast<int>(out.size()) != view.nu * n)
    throw SolverError("residual output has wrong size");

  // One Laplacian per distinct field, then one quotient field per used pair.
  std::vector<Field> lap(static_cast<std::size_t>(view.nu) + 1);
  lap[0] = laplacian(state.phi0);
  for (int i = 1; i <= view.nu; ++i) lap[i] = laplacian(state.stages[i - 1]);

  std::vector<Field> y(view.used.size());
  for (std::size_t u = 0; u < view.used.size(); ++u) {
    const PairIndex& p = view.pairs[view.used[u]];
    const Field& fi = stage_or_phi0(state, p.i);
    const Field& fj = stage_or_phi0(state, p.j);
    Field& yk = y[u];
    yk = Field(grid);
    for (int c = 0; c < n; ++c)
      yk[c] = -0.5 * fe.gamma * (lap[p.i][c] + lap[p.j][c]) +
              fe.e1_quotient(fi[c], fj[c]);
  }

  Field z(grid), gz(grid);
  for (int i = 0; i < view.nu; ++i) {
    std::fill(z.values.begin(), z.values.end(), 0.0);
    for (std::size_t u = 0; u < view.used.size(); ++u) {
      const double a = view.coeff(i, view.used[u]);
      if (a == 0.0) continue;
      const Field& yk = y[u];
      for (int c = 0; c < n; ++c) z[c] += a * yk[c];
    }
    apply_flow(kind, z, gz);
    const Field& si = state.stages[static_cast<std::size_t>(i)];
    double* dst = out.data() + static_cast<std::size_t>(i) * n;
    for (int c = 0; c < n; ++c)
      dst[c] = si[c] - state.phi0[c] - state.h * gz[c];
  }
}

void jacobian_apply(const StageState& state, const DvdTableau& tab,
                    DissipationKind kind, const FreeEnergy& fe,
                    std::span<const double> dir, std::span<double> out) {
  const TableauView view = make_view(tab);
  check_state(state, view);
  const UniformGrid& grid = state.phi0.grid;
  const int n = grid.cell_count();
  if (static_cast<int>(dir.size()) != view.nu * n ||
      static_cast<int>(out.size()) != view.nu * n)
    throw SolverError("jacobian_apply size mismatch");

  // Direction fields and their Laplacians; the input state is fixed, so the
  // direction of stage 0 is identically zero.
  std::vector<Field> d(static_cast<std::size_t>(view.nu) + 1);
  std::vector<Field> lap_d(static_cast<std::size_t>(view.nu) + 1);
  d[0] = Field(grid);
  lap_d[0] = Field(grid);
  for (int i = 1; i <= view.nu; ++i) {
    d[i] = Field(grid);
    const double* src = dir.data() + static_cast<std::size_t>(i - 1) * n;
    std::copy(src, src + n, d[i].values.begin());
    lap_d[i] = laplacian(d[i]);
  }

  std::vector<Field> dy(view.used.size());
  for (std::size_t u = 0; u < view.used.size(); ++u) {
    const PairIndex& p = view.pairs[view.used[u]];
    const Field& fi = stage_or_phi0(state, p.i);
    const Field& fj = stage_or_phi0(state, p.j);
    Field& dyk = dy[u];
    dyk = Field(grid);
    for (int c = 0; c < n; ++c) {
      double v = -0.5 * fe.gamma * (lap_d[p.i][c] + lap_d[p.j][c]);
      v += fe.e1_quotient_da(fi[c], fj[c]) * d[p.i][c];
      v += fe.e1_quotient_da(fj[c], fi[c]) * d[p.j][c];
      dyk[c] = v;
    }
  }

  Field z(grid), gz(grid);
  for (int i = 0; i < view.nu; ++i) {
    std::fill(z.values.begin(), z.values.end(), 0.0);
    for (std::size_t u = 0; u < view.used.size(); ++u) {
      const double a = view.coeff(i, view.used[u]);
      if (a == 0.0) continue;
      const Field& dyk = dy[u];
      for (int c = 0; c < n; ++c) z[c] += a * dyk[c];
    }
    apply_flow(kind, z, gz);
    const double* src = dir.data() + static_cast<std::size_t>(i) * n;
    double* dst = out.data() + static_cast<std::size_t>(i) * n;
    for (int c = 0; c < n; ++c) dst[c] = src[c] - state.h * gz[c];
  }
}

Field dvd_step(const Field& phi0, const DvdTableau& tab, DissipationKind kind,
               const FreeEnergy& fe, double h, const DvdStepConfig& cfg,
               StepReport* report) {
  const TableauView view = make_view(tab);
  const UniformGrid& grid = phi0.grid;
  const int n = grid.cell_count();
  const int total = view.nu * n;

  StageState state;
  state.phi0 = phi0;
  state.stages.assign(static_cast<std::size_t>(view.nu), phi0);
  state.h = h;
  check_state(state, view);

  const auto unpack = [&](std::span<const double> x) {
    for (int i = 0; i < view.nu; ++i) {
      const double* src = x.data() + static_cast<std::size_t>(i) * n;
      std::copy(src, src + n,
                state.stages[static_cast<std::size_t>(i)].values.begin());
    }
  };

  NewtonProblem prob;
  prob.dim = total;
  prob.residual = [&](std::span<const double> x, std::span<double> f) {
    unpack(x);
    residual(state, tab, kind, fe, f);
  };
  prob.jacobian_apply = [&](std::span<const double> x,
                            std::span<const double> dir,
                            std::span<double> out) {
    unpack(x);
    jacobian_apply(state, tab, kind, fe, dir, out);
  };
  // The exact stage-coupled Jacobian frozen at the given iterate, assembled
  // cell-major so that overlapping Schwarz blocks (and the LU elimination of
  // the recovery path) see the coupling between stages at neighbouring cells.
  const auto assemble_frozen = [&](std::span<const double> x0) {
    unpack(x0);
    const int nu = view.nu;
    const SparseMatrixD lap = laplacian_matrix(grid);
    std::vector<Eigen::Triplet<double>> trips;
    Field dq(grid);
    for (int i = 0; i < nu; ++i) {
      for (int m = 1; m <= nu; ++m) {
        // d y_k / d stage_m summed with row i's weights:
        //   B_im = sum_k a_{ik} ( [p_k == m] (-gamma/2 Lap + diag dq_pq)
        //                       + [q_k == m] (-gamma/2 Lap + diag dq_qp) ).
        SparseMatrixD b(n, n);
        bool any = false;
        for (const int u : view.used) {
          const PairIndex& p = view.pairs[static_cast<std::size_t>(u)];
          const double a = view.coeff(i, u);
          if (a == 0.0) continue;
          for (int side = 0; side < 2; ++side) {
            const int self = side == 0 ? p.i : p.j;
            const int other = side == 0 ? p.j : p.i;
            if (self != m) continue;
            const Field& fs = stage_or_phi0(state, self);
            const Field& fo = stage_or_phi0(state, other);
            for (int c = 0; c < n; ++c)
              dq[c] = fe.e1_quotient_da(fs[c], fo[c]);
            const SparseMatrixD term =
                SparseMatrixD(-0.5 * fe.gamma * lap) + diagonal_matrix(dq);
            if (any)
              b = SparseMatrixD(b + a * term);
            else
              b = a * term;
            any = true;
          }
        }
        // Block (i, m) of the Jacobian: delta_im I - h G B_im.
        SparseMatrixD jb;
        if (any) {
          if (kind == DissipationKind::Hminus1)
            jb = SparseMatrixD(-state.h * (lap * b));
          else
            jb = state.h * b;
          if (i + 1 == m) jb = SparseMatrixD(identity_matrix(n) + jb);
        } else if (i + 1 == m) {
          jb = identity_matrix(n);
        } else {
          continue;
        }
        for (int col = 0; col < jb.outerSize(); ++col)
          for (SparseMatrixD::InnerIterator it(jb, col); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()) * nu + i,
                               col * nu + (m - 1), it.value());
      }
    }
    SparseMatrixD big(total, total);
    big.setFromTriplets(trips.begin(), trips.end());
    return big;
  };

  // Wraps a cell-major solve into the stage-major unknown ordering.
  const auto permuted = [&](std::function<void(std::span<const double>,
                                               std::span<double>)>
                                solve_cell_major) {
    const int nu = view.nu;
    LinearOperator op;
    op.dim = total;
    op.apply = [solve_cell_major = std::move(solve_cell_major), nu,
                n](std::span<const double> in, std::span<double> out) {
      std::vector<double> tin(in.size()), tout(in.size());
      for (int i = 0; i < nu; ++i)
        for (int c = 0; c < n; ++c)
          tin[static_cast<std::size_t>(c) * nu + i] =
              in[static_cast<std::size_t>(i) * n + c];
      solve_cell_major(tin, tout);
      for (int i = 0; i < nu; ++i)
        for (int c = 0; c < n; ++c)
          out[static_cast<std::size_t>(i) * n + c] =
              tout[static_cast<std::size_t>(c) * nu + i];
    };
    return op;
  };

  // Recovery attempts swap the overlapping-Schwarz application of the frozen
  // Jacobian for its exact sparse LU: near a fold the troublesome mode is
  // global, which local block solves cannot represent.
  bool exact_precond = false;
  prob.preconditioner = [&](std::span<const double> x0) {
    SparseMatrixD big = assemble_frozen(x0);
    if (exact_precond) {
      auto lu = std::make_shared<Eigen::SparseLU<SparseMatrixD>>();
      big.makeCompressed();
      lu->compute(big);
      if (lu->info() == Eigen::Success)
        return permuted([lu](std::span<const double> in,
                             std::span<double> out) {
          Eigen::Map<const Eigen::VectorXd> vin(in.data(),
                                                static_cast<long>(in.size()));
          Eigen::VectorXd vout = lu->solve(vin);
          std::copy(vout.data(), vout.data() + vout.size(), out.begin());
        });
      // A singular frozen matrix falls through to the Schwarz application.
    }
    const LinearOperator schwarz =
        AdditiveSchwarz(big, cfg.precond_block * view.nu,
                        cfg.precond_overlap * view.nu)
            .as_operator();
    return permuted([schwarz](std::span<const double> in,
                              std::span<double> out) {
      schwarz.apply(in, out);
    });
  };

  // All stage guesses set to the current base field.
  const auto reset_guess = [&](std::vector<double>& xv) {
    for (int i = 0; i < view.nu; ++i)
      std::copy(state.phi0.values.begin(), state.phi0.values.end(),
                xv.begin() + static_cast<std::size_t>(i) * n);
  };

  std::vector<double> x(static_cast<std::size_t>(total));
  long long newton_total = 0;
  long long gmres_total = 0;

  const auto solve_once = [&](double step_h, double stall_scale,
                              int max_iters) {
    state.h = step_h;
    NewtonConfig ncfg = cfg.newton;
    ncfg.stall_scale = stall_scale;
    if (max_iters > 0) ncfg.max_iters = std::min(ncfg.max_iters, max_iters);
    NewtonResult r = newton(prob, x, ncfg, cfg.krylov);
    newton_total += r.iterations;
    gmres_total += r.gmres_iterations;
    return r;
  };
  // Recovery attempts get a tight iteration cap: a Newton run seeded inside
  // a root's basin converges in a handful of iterations, so anything longer
  // is a miss and the next seed should be tried instead.
  constexpr int kRecoveryIters = 16;

  reset_guess(x);
  NewtonResult nres = solve_once(h, 0.0, 0);
  const double cold_scale = nres.initial_residual_norm;
  std::string last_failure = nres.failure;

  if (!nres.converged) exact_precond = true;

  if (!nres.converged) {
    // Starting the stage iteration from phi_0 can sit past a fold of the
    // Newton path once h exceeds the potential's convexity scale.  Recover
    // by integrating the same scheme over k substeps of h/k to predict the
    // stage values near the solution trajectory, then solving the original
    // full-step system from that predictor; the accepted solution is always
    // a root of the requested step's stage system.
    std::vector<Field> traj;
    for (int k = 2; k <= 32 && !nres.converged; k *= 2) {
      traj.assign(1, phi0);
      traj.reserve(static_cast<std::size_t>(k) + 1);
      bool traj_ok = true;
      for (int j = 0; j < k && traj_ok; ++j) {
        state.phi0 = traj.back();
        reset_guess(x);
        const NewtonResult sub = solve_once(h / k, 0.0, kRecoveryIters);
        traj_ok = sub.converged;
        if (traj_ok) {
          unpack(x);
          traj.push_back(state.stages.back());
        }
      }
      state.phi0 = phi0;
      if (!traj_ok) continue;  // substeps too hard at this size; go finer
      // Three seeds from the substep trajectory, in order of fidelity:
      // stage values interpolated at the stage nodes; all stages collapsed
      // onto the endpoint (how stiff stage solutions behave for large
      // steps); stages placed along the ray from phi_0 to the endpoint.
      for (int seed = 0; seed < 3 && !nres.converged; ++seed) {
        const Field& end = traj.back();
        for (int i = 0; i < view.nu; ++i) {
          const double node = view.nodes[static_cast<std::size_t>(i)];
          double* dst = x.data() + static_cast<std::size_t>(i) * n;
          if (seed == 0) {
            const double theta = node * k;
            const int j0 = std::min(static_cast<int>(theta), k - 1);
            const double w = theta - j0;
            const Field& lo = traj[static_cast<std::size_t>(j0)];
            const Field& hi = traj[static_cast<std::size_t>(j0) + 1];
            for (int c = 0; c < n; ++c)
              dst[c] = (1.0 - w) * lo[c] + w * hi[c];
          } else if (seed == 1) {
            for (int c = 0; c < n; ++c) dst[c] = end[c];
          } else {
            for (int c = 0; c < n; ++c)
              dst[c] = phi0[c] + node * (end[c] - phi0[c]);
          }
        }
        nres = solve_once(h, cold_scale, kRecoveryIters);
        if (!nres.converged) last_failure = nres.failure;
      }
    }
  }

  if (!nres.converged) {
    // The trajectory-following root can vanish entirely in a window of step
    // sizes (a fold annihilates it) while a smoother root still exists: the
    // branch reachable from larger steps, where the stage states sit past
    // the stiff transient.  Solve at a multiple of h, then continue that
    // root branch back down to the requested step, warm-starting each halving.
    for (int factor = 2; factor <= 16 && !nres.converged; factor *= 2) {
      reset_guess(x);
      NewtonResult up = solve_once(factor * h, 0.0, kRecoveryIters);
      if (!up.converged) continue;  // no foothold at this size; try larger
      bool ok = true;
      for (int m = factor / 2; m >= 1 && ok; m /= 2) {
        up = solve_once(m * h, cold_scale, kRecoveryIters);
        ok = up.converged;
        if (!ok) last_failure = up.failure;
      }
      if (ok) nres = up;
    }
  }

  if (!nres.converged)
    throw SolverError("dvd step failed at h=" + std::to_string(h) + ": " +
                      last_failure);
  unpack(x);

  if (kind == DissipationKind::Hminus1) {
    // An exact root has mean(stage) = mean(phi_0) for every stage (the flow
    // term telescopes to zero mass); a root accepted at the floating-point
    // floor carries mean noise instead, which would accumulate as spurious
    // mass drift.  Project it out.
    const double m0 = mass(phi0);
    for (Field& s : state.stages) {
      const double shift = (m0 - mass(s)) / grid.measure();
      for (int c = 0; c < n; ++c) s[c] += shift;
    }
  }

  const Field& result = state.stages.back();
  if (report) {
    report->energy_before = discrete_energy(phi0, fe);
    report->energy_after = discrete_energy(result, fe);
    report->modified_energy_before = report->energy_before;
    report->modified_energy_after = report->energy_after;
    report->mass_before = mass(phi0);
    report->mass_after = mass(result);
    report->newton_iterations = static_cast<int>(newton_total);
    report->gmres_iterations = static_cast<int>(gmres_total);
    report->linear_solves = static_cast<int>(newton_total);
    double worst = 0.0;
    for (const int u : view.used) {
      const PairIndex& p = view.pairs[static_cast<std::size_t>(u)];
      const double r = dvd_identity_residual(stage_or_phi0(state, p.i),
                                             stage_or_phi0(state, p.j), fe);
      worst = std::max(worst, std::abs(r));
    }
    report->dvd_identity_residual = worst;
  }
  return result;
}

}  // namespace dvdflow
