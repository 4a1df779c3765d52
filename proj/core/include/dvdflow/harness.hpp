#pragma once

// Experiment harness: flat key=value configs, initial conditions, time loops
// with CSV/snapshot output, and a self-refining convergence study.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvdflow/dvd_stepper.hpp"
#include "dvdflow/field_io.hpp"
#include "dvdflow/grid.hpp"
#include "dvdflow/model.hpp"
#include "dvdflow/relaxed_stepper.hpp"
#include "dvdflow/solver.hpp"
#include "dvdflow/tableau.hpp"

namespace dvdflow {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Which family a scheme name selects.  Multi-stage schemes are nonlinear and
// run through Newton; the others are linear one-solve (or two-solve) steps.
enum class SchemeFamily { MultiStage, ScalarAux, ScalarAuxSqrt, FieldAux, Stabilized };

struct SchemeSpec {
  SchemeFamily family = SchemeFamily::MultiStage;
  std::string name;          // as given in the config
  std::string tableau_name;  // builtin catalog name (MultiStage only)
  std::string tableau_file;  // overrides tableau_name when nonempty
};

struct ExperimentConfig {
  DissipationKind model = DissipationKind::L2;
  SchemeSpec scheme;
  UniformGrid grid;
  FreeEnergy fe;        // domain_measure is filled in from the grid
  int aux_power = 1;    // fe.m: exponent of the auxiliary variable
  double mobility = 1.0;
  double h = 0.0;
  double t_end = 0.0;
  std::string init_kind = "sine";
  double init_amplitude = 0.1;
  double init_radius = 0.5;
  double init_value = 0.0;
  unsigned long long seed = 0;
  std::string out_dir = ".";
  std::string prefix = "run";
  bool write_csv = true;
  std::vector<double> snapshot_times;
  NewtonConfig newton;
  KrylovConfig krylov{.xi_rel = 1e-14, .xi_abs = 1e-14};
  int precond_block = 128;
  int precond_overlap = 16;
  StabilizerCoefficients lhat;  // a0 defaults to 2/eps^2 when left unset
};

// Parses `key = value` lines ('#' comments, blank lines allowed), applies
// defaults that depend on other keys (c0, lhat.a0), and validates.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Single `key = value` override on top of a parsed config (CLI flags).
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

SchemeSpec parse_scheme(const std::string& name);

Field initial_condition(const ExperimentConfig& cfg);

// Effective circle radius sqrt(A/pi) from the phase fraction
// A = sum_j w * clamp((phi_j + 1)/2, 0, 1).  2-d fields only.
double radius_estimate(const Field& f);

struct RunSummary {
  int steps = 0;
  double final_time = 0.0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double initial_modified_energy = 0.0;
  double final_modified_energy = 0.0;
  // Largest single-step increase (negative when monotone throughout).
  double max_energy_increase = 0.0;
  double max_modified_energy_increase = 0.0;
  double mass_drift = 0.0;  // max |mass_n - mass_0|
  long long total_newton_iterations = 0;
  long long total_gmres_iterations = 0;
  std::string csv_path;  // empty when CSV output is disabled
};

// Runs the configured experiment.  Writes one CSV row per step
// (step,time,energy,modified_energy,mass,newton_iters,gmres_iters,radius;
// radius is empty for 1-d runs) and a snapshot at each requested time.
// Optional per-step hook, called after each step with the current state.
using StepHook =
    std::function<void(int step, double time, const Field& phi, const StepReport&)>;
RunSummary run_experiment(const ExperimentConfig& cfg,
                          const StepHook& hook = nullptr);

// Integrates to t_end with step h and no file output; returns the final
// field.  Used by the convergence study and by tests.
Field integrate_final(const ExperimentConfig& cfg, double h);

struct ConvergenceRow {
  double h = 0.0;
  double error = 0.0;  // weighted L2 distance to the reference at t_end
  double rate = 0.0;   // 0 for the first row
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;  // sorted by decreasing h
  double observed_order = 0.0;       // mean of the successive rates
};

// Self-refinement study: reference solution is the same scheme at
// min(hs)/32.  Every h (and the reference step) must divide t_end.
ConvergenceResult convergence_study(const ExperimentConfig& cfg,
                                    const std::vector<double>& hs);

}  // namespace dvdflow
