#include "dvdflow/relaxed_stepper.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dvdflow {

namespace {

void apply_flow(DissipationKind kind, const Field& z, Field& out) {
  if (kind == DissipationKind::L2) {
    if (!(out.grid == z.grid)) out = Field(z.grid);
    for (int i = 0; i < z.size(); ++i) out[i] = -z[i];
  } else {
    laplacian(z, out);
  }
}

// L phi = -Lap phi + (beta/eps^2) phi, matrix-free.
Field apply_shifted_l(const Field& phi, const FreeEnergy& fe) {
  Field out = laplacian(phi);
  const double shift = fe.beta / (fe.epsilon * fe.epsilon);
  for (int i = 0; i < out.size(); ++i) out[i] = -out[i] + shift * phi[i];
  return out;
}

double quadratic_part(const Field& phi, const FreeEnergy& fe) {
  return 0.5 * fe.gamma * inner_product(phi, apply_shifted_l(phi, fe));
}

void fill_report(StepReport& rep, const Field& phi0, const Field& phi1,
                 const FreeEnergy& fe, double modified_before,
                 double modified_after, int gmres_iters, int solves) {
  rep.energy_before = discrete_energy(phi0, fe);
  rep.energy_after = discrete_energy(phi1, fe);
  rep.modified_energy_before = modified_before;
  rep.modified_energy_after = modified_after;
  rep.mass_before = mass(phi0);
  rep.mass_after = mass(phi1);
  rep.newton_iterations = 0;
  rep.gmres_iterations = gmres_iters;
  rep.linear_solves = solves;
  rep.dvd_identity_residual = 0.0;  // not applicable to relaxed steps
}

void advance_state(RelaxedState& state, Field phi1) {
  state.phi_prev = std::move(state.phi);
  state.phi = std::move(phi1);
  state.has_prev = true;
}

void check_step(const RelaxedState& state, double h) {
  if (state.phi.size() == 0) throw SolverError("relaxed state has no field");
  if (!(h > 0.0)) throw SolverError("step size must be positive");
}

}  // namespace

SchwarzGmresSolver::SchwarzGmresSolver(const KrylovConfig& cfg, int block,
                                       int overlap)
    : cfg_(cfg), block_(block), overlap_(overlap) {}

void SchwarzGmresSolver::solve(const SparseMatrixD& k, bool constant_matrix,
                               std::span<const double> rhs,
                               std::vector<double>& x) {
  if (!constant_matrix || !have_cache_) {
    cached_op_ = sparse_operator(k);
    cached_precond_ = AdditiveSchwarz(k, block_, overlap_).as_operator();
    have_cache_ = constant_matrix;
  }
  x.assign(rhs.size(), 0.0);
  const GmresResult res = gmres(cached_op_, rhs, x, cfg_, &cached_precond_);
  last_iterations_ = res.iterations;
  total_iterations_ += res.iterations;
  if (!res.converged)
    throw SolverError("relaxed linear solve stalled at residual " +
                      std::to_string(res.residual_norm));
}

Field extrapolate(const RelaxedState& state) {
  if (!state.has_prev) return state.phi;
  Field bar(state.phi.grid);
  for (int i = 0; i < bar.size(); ++i)
    bar[i] = 1.5 * state.phi[i] - 0.5 * state.phi_prev[i];
  return bar;
}

double shifted_functional(const Field& phi, const FreeEnergy& fe) {
  const double w = phi.grid.cell_weight();
  double acc = 0.0;
  for (int i = 0; i < phi.size(); ++i) acc += fe.shifted_density(phi[i]);
  return w * acc;
}

double init_scalar_aux(const Field& phi, int m, const FreeEnergy& fe) {
  const double radicand = shifted_functional(phi, fe) + fe.c0;
  if (m == 1) return radicand;
  if (m == 2) {
    if (!(radicand > 0.0))
      throw SolverError("scalar auxiliary radicand is nonpositive");
    return std::sqrt(radicand);
  }
  throw SolverError("scalar auxiliary supports m = 1 or 2");
}

Field init_field_aux(const Field& phi, int m, const FreeEnergy& fe) {
  Field q(phi.grid);
  for (int i = 0; i < phi.size(); ++i) {
    const double radicand = fe.shifted_density(phi[i]) + fe.c0;
    if (m == 1) {
      q[i] = radicand;
    } else if (m == 2) {
      if (!(radicand > 0.0))
        throw SolverError("field auxiliary radicand is nonpositive");
      q[i] = std::sqrt(radicand);
    } else {
      throw SolverError("field auxiliary supports m = 1 or 2");
    }
  }
  return q;
}

double modified_energy(const Field& phi, double r, int m,
                       const FreeEnergy& fe) {
  const double aux = m == 1 ? r : r * r;
  return quadratic_part(phi, fe) + aux;
}

double modified_energy(const Field& phi, const Field& q, int m,
                       const FreeEnergy& fe) {
  const double w = phi.grid.cell_weight();
  double acc = 0.0;
  for (int i = 0; i < q.size(); ++i)
    acc += m == 1 ? q[i] : q[i] * q[i];
  return quadratic_part(phi, fe) + w * acc;
}

StepReport rdvd1_step(RelaxedState& state, const FreeEnergy& fe,
                      DissipationKind kind, double h, LinearSolver& solver) {
  check_step(state, h);
  const Field phi0 = state.phi;
  const UniformGrid& grid = phi0.grid;

  const Field bar = extrapolate(state);
  Field w(grid);
  for (int i = 0; i < w.size(); ++i) w[i] = fe.shifted_derivative(bar[i]);

  const SparseMatrixD k = flow_system_matrix(
      grid, kind, 0.5 * h * fe.gamma, shifted_operator_matrix(grid, fe));

  Field u = apply_shifted_l(phi0, fe);
  for (int i = 0; i < u.size(); ++i) u[i] = 0.5 * fe.gamma * u[i] + w[i];
  Field gu(grid);
  apply_flow(kind, u, gu);
  std::vector<double> rhs(phi0.values);
  for (int i = 0; i < static_cast<int>(rhs.size()); ++i)
    rhs[static_cast<std::size_t>(i)] += h * gu[i];

  std::vector<double> x;
  solver.solve(k, true, rhs, x);
  Field phi1(grid);
  phi1.values = std::move(x);

  Field diff(grid);
  for (int i = 0; i < diff.size(); ++i) diff[i] = phi1[i] - phi0[i];
  const double r0 = state.r;
  const double r1 = r0 + inner_product(w, diff);

  StepReport rep;
  fill_report(rep, phi0, phi1, fe, modified_energy(phi0, r0, 1, fe),
              modified_energy(phi1, r1, 1, fe), solver.last_iterations(), 1);
  state.r = r1;
  advance_state(state, std::move(phi1));
  return rep;
}

StepReport savcn_step(RelaxedState& state, const FreeEnergy& fe,
                      DissipationKind kind, double h, LinearSolver& solver) {
  check_step(state, h);
  const Field phi0 = state.phi;
  const UniformGrid& grid = phi0.grid;

  const Field bar = extrapolate(state);
  const double radicand = shifted_functional(bar, fe) + fe.c0;
  if (!(radicand > 0.0))
    throw SolverError("scalar auxiliary radicand is nonpositive");
  const double rho = std::sqrt(radicand);
  Field b(grid);
  for (int i = 0; i < b.size(); ++i)
    b[i] = fe.shifted_derivative(bar[i]) / (2.0 * rho);

  const SparseMatrixD k = flow_system_matrix(
      grid, kind, 0.5 * h * fe.gamma, shifted_operator_matrix(grid, fe));

  const double r0 = state.r;
  const double b_phi0 = inner_product(b, phi0);

  // K phi_1 = rhs0 + <b, phi_1> h G b: two solves close the rank-one term.
  Field u = apply_shifted_l(phi0, fe);
  for (int i = 0; i < u.size(); ++i)
    u[i] = 0.5 * fe.gamma * u[i] + (2.0 * r0 - b_phi0) * b[i];
  Field gu(grid);
  apply_flow(kind, u, gu);
  std::vector<double> rhs0(phi0.values);
  for (int i = 0; i < static_cast<int>(rhs0.size()); ++i)
    rhs0[static_cast<std::size_t>(i)] += h * gu[i];

  std::vector<double> zv;
  solver.solve(k, true, rhs0, zv);
  const int first_iters = solver.last_iterations();

  Field gb(grid);
  apply_flow(kind, b, gb);
  std::vector<double> rhs1(static_cast<std::size_t>(gb.size()));
  for (int i = 0; i < gb.size(); ++i)
    rhs1[static_cast<std::size_t>(i)] = h * gb[i];
  std::vector<double> uv;
  solver.solve(k, true, rhs1, uv);

  Field z(grid), usol(grid);
  z.values = std::move(zv);
  usol.values = std::move(uv);
  const double denom = 1.0 - inner_product(b, usol);
  if (std::abs(denom) < 1e-14)
    throw SolverError("rank-one closure is singular");
  const double theta = inner_product(b, z) / denom;

  Field phi1(grid);
  for (int i = 0; i < phi1.size(); ++i) phi1[i] = z[i] + theta * usol[i];

  Field diff(grid);
  for (int i = 0; i < diff.size(); ++i) diff[i] = phi1[i] - phi0[i];
  const double r1 = r0 + inner_product(b, diff);

  StepReport rep;
  fill_report(rep, phi0, phi1, fe, modified_energy(phi0, r0, 2, fe),
              modified_energy(phi1, r1, 2, fe),
              first_iters + solver.last_iterations(), 2);
  state.r = r1;
  advance_state(state, std::move(phi1));
  return rep;
}

StepReport ieq_step(RelaxedState& state, const FreeEnergy& fe,
                    DissipationKind kind, double h, int m,
                    LinearSolver& solver) {
  check_step(state, h);
  if (m != 1 && m != 2)
    throw SolverError("field auxiliary supports m = 1 or 2");
  const Field phi0 = state.phi;
  const UniformGrid& grid = phi0.grid;
  if (!(state.q.grid == grid) || state.q.size() != phi0.size())
    throw SolverError("field auxiliary is not initialized");

  const Field bar = extrapolate(state);
  Field w(grid);
  for (int i = 0; i < w.size(); ++i) w[i] = fe.shifted_derivative(bar[i]);

  Field phi1(grid);
  Field q1(grid);
  int iters = 0;

  if (m == 1) {
    // Identical phi-update to the scalar scheme at m = 1; the auxiliary is
    // carried pointwise instead of integrated.
    const SparseMatrixD k = flow_system_matrix(
        grid, kind, 0.5 * h * fe.gamma, shifted_operator_matrix(grid, fe));
    Field u = apply_shifted_l(phi0, fe);
    for (int i = 0; i < u.size(); ++i) u[i] = 0.5 * fe.gamma * u[i] + w[i];
    Field gu(grid);
    apply_flow(kind, u, gu);
    std::vector<double> rhs(phi0.values);
    for (int i = 0; i < static_cast<int>(rhs.size()); ++i)
      rhs[static_cast<std::size_t>(i)] += h * gu[i];
    std::vector<double> x;
    solver.solve(k, true, rhs, x);
    phi1.values = std::move(x);
    iters = solver.last_iterations();
    for (int i = 0; i < q1.size(); ++i)
      q1[i] = state.q[i] + w[i] * (phi1[i] - phi0[i]);
  } else {
    // m = 2: the linearized auxiliary contributes diag(beta^2) to the
    // operator, so the system has variable coefficients and is reassembled.
    Field beta(grid);
    for (int i = 0; i < beta.size(); ++i) {
      const double radicand = fe.shifted_density(bar[i]) + fe.c0;
      if (!(radicand > 0.0))
        throw SolverError("field auxiliary radicand is nonpositive");
      beta[i] = w[i] / (2.0 * std::sqrt(radicand));
    }
    Field beta2(grid);
    for (int i = 0; i < beta2.size(); ++i) beta2[i] = beta[i] * beta[i];
    const SparseMatrixD wmat =
        SparseMatrixD(0.5 * fe.gamma * shifted_operator_matrix(grid, fe)) +
        diagonal_matrix(beta2);
    const SparseMatrixD k = flow_system_matrix(grid, kind, h, wmat);

    Field u = apply_shifted_l(phi0, fe);
    for (int i = 0; i < u.size(); ++i)
      u[i] = 0.5 * fe.gamma * u[i] + 2.0 * state.q[i] * beta[i] -
             beta2[i] * phi0[i];
    Field gu(grid);
    apply_flow(kind, u, gu);
    std::vector<double> rhs(phi0.values);
    for (int i = 0; i < static_cast<int>(rhs.size()); ++i)
      rhs[static_cast<std::size_t>(i)] += h * gu[i];
    std::vector<double> x;
    solver.solve(k, false, rhs, x);
    phi1.values = std::move(x);
    iters = solver.last_iterations();
    for (int i = 0; i < q1.size(); ++i)
      q1[i] = state.q[i] + beta[i] * (phi1[i] - phi0[i]);
  }

  StepReport rep;
  fill_report(rep, phi0, phi1, fe, modified_energy(phi0, state.q, m, fe),
              modified_energy(phi1, q1, m, fe), iters, 1);
  state.q = std::move(q1);
  advance_state(state, std::move(phi1));
  return rep;
}

StepReport stabilized_step(RelaxedState& state, const FreeEnergy& fe,
                           DissipationKind kind, double h,
                           const StabilizerCoefficients& lhat,
                           LinearSolver& solver) {
  check_step(state, h);
  const Field phi0 = state.phi;
  const UniformGrid& grid = phi0.grid;
  const int n = grid.cell_count();

  const SparseMatrixD lap = laplacian_matrix(grid);
  SparseMatrixD wmat = SparseMatrixD(lhat.a0 * identity_matrix(n)) -
                       (fe.gamma + lhat.a1) * lap;
  if (lhat.a2 != 0.0) wmat = SparseMatrixD(wmat + lhat.a2 * (lap * lap).pruned());
  const SparseMatrixD k = flow_system_matrix(grid, kind, h, wmat);

  // Explicit part Lhat phi_0 - e1'(phi_0) with the *unshifted* derivative:
  // the splitting is e1 = (convex) - (1/2)<phi, Lhat phi> rearranged, not the
  // beta shift.
  const Field lap0 = laplacian(phi0);
  Field u(grid);
  if (lhat.a2 != 0.0) {
    const Field lap2 = laplacian(lap0);
    for (int i = 0; i < n; ++i)
      u[i] = lhat.a0 * phi0[i] - lhat.a1 * lap0[i] + lhat.a2 * lap2[i] -
             fe.e1_derivative(phi0[i]);
  } else {
    for (int i = 0; i < n; ++i)
      u[i] = lhat.a0 * phi0[i] - lhat.a1 * lap0[i] - fe.e1_derivative(phi0[i]);
  }
  Field gu(grid);
  apply_flow(kind, u, gu);
  std::vector<double> rhs(phi0.values);
  for (int i = 0; i < n; ++i) rhs[static_cast<std::size_t>(i)] -= h * gu[i];

  std::vector<double> x;
  solver.solve(k, true, rhs, x);
  Field phi1(grid);
  phi1.values = std::move(x);

  StepReport rep;
  fill_report(rep, phi0, phi1, fe, discrete_energy(phi0, fe),
              discrete_energy(phi1, fe), solver.last_iterations(), 1);
  advance_state(state, std::move(phi1));
  return rep;
}

}  // namespace dvdflow
