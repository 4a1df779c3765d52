// Command-line front end: run experiments, measure convergence orders,
// certify tableaux, and check the shrinking-circle benchmark.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dvdflow/harness.hpp"

namespace {

using namespace dvdflow;

std::vector<double> parse_h_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = token.find_last_not_of(" \t");
    token = token.substr(b, e - b + 1);
    try {
      std::size_t pos = 0;
      const double v = std::stod(token, &pos);
      if (pos != token.size()) throw std::invalid_argument(token);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--h: cannot parse step size '" + token + "'");
    }
  }
  if (out.empty()) throw ConfigError("--h: no step sizes given");
  return out;
}

void apply_cli_overrides(ExperimentConfig& cfg, const std::string& seed,
                         const std::string& out_dir,
                         const std::vector<std::string>& sets) {
  if (!seed.empty()) apply_override(cfg, "seed", seed);
  if (!out_dir.empty()) apply_override(cfg, "output.dir", out_dir);
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
}

void print_summary(const RunSummary& s) {
  std::cout << "steps: " << s.steps << "\n"
            << "final time: " << format_double(s.final_time) << "\n"
            << "energy: " << format_double(s.initial_energy) << " -> "
            << format_double(s.final_energy) << "\n"
            << "modified energy: " << format_double(s.initial_modified_energy)
            << " -> " << format_double(s.final_modified_energy) << "\n"
            << "max energy increase: " << format_double(s.max_energy_increase)
            << "\n"
            << "max modified energy increase: "
            << format_double(s.max_modified_energy_increase) << "\n"
            << "mass drift: " << format_double(s.mass_drift) << "\n"
            << "newton iterations: " << s.total_newton_iterations << "\n"
            << "gmres iterations: " << s.total_gmres_iterations << "\n";
  if (!s.csv_path.empty()) std::cout << "csv: " << s.csv_path << "\n";
}

int cmd_run(const ExperimentConfig& cfg) {
  print_summary(run_experiment(cfg));
  return 0;
}

int cmd_convergence(const ExperimentConfig& cfg, const std::string& h_list) {
  const ConvergenceResult res = convergence_study(cfg, parse_h_list(h_list));
  std::cout << "h,error,rate\n";
  for (const ConvergenceRow& row : res.rows) {
    std::cout << format_double(row.h) << ',' << format_double(row.error)
              << ',';
    if (row.rate != 0.0) std::cout << format_double(row.rate);
    std::cout << '\n';
  }
  std::cout << "observed order: " << format_double(res.observed_order) << "\n";
  return 0;
}

int cmd_tableau_check(const std::string& arg) {
  DvdTableau tab;
  bool builtin = false;
  const auto names = builtin_tableau_names();
  if (std::find(names.begin(), names.end(), arg) != names.end()) {
    tab = builtin_tableau(arg);
    builtin = true;
  } else {
    std::ifstream in(arg);
    if (!in) throw IoError("cannot open tableau file " + arg);
    tab = read_tableau(in);
  }
  validate_tableau(tab);

  std::cout << "tableau: " << arg << "\n"
            << "stages: " << tab.nu << "\n"
            << "order: " << tab.order << "\n"
            << "nodes:";
  for (const Rational& c : tab.nodes)
    std::cout << ' ' << c.numerator() << '/' << c.denominator();
  std::cout << "\nrow sums match nodes: yes\n";

  const RationalMatrix a = expand_matrix(tab);
  std::optional<StabilityCertificate> cert;
  if (builtin) {
    cert = build_certificate(a, builtin_partition_vector(arg));
  } else {
    cert = find_partition_vector(a, tab.nu);
  }
  if (!cert) {
    std::cout << "certificate: none found (scheme not certified)\n";
    return 3;
  }
  std::cout << "partition vector:";
  for (const Rational& v : cert->v)
    std::cout << ' ' << v.numerator() << '/' << v.denominator();
  std::cout << "\nmin eigenvalue of B: " << format_double(cert->min_eigenvalue)
            << "\n";
  const bool exact = is_psd_exact(cert->b);
  std::cout << "B positive semidefinite (exact): " << (exact ? "yes" : "no")
            << "\n";
  return exact ? 0 : 3;
}

int cmd_radius_bench(const ExperimentConfig& cfg) {
  if (cfg.grid.dim != 2 || cfg.init_kind != "circle")
    throw ConfigError("radius-bench needs grid.dim = 2 and init.kind = circle");
  const double r0 = cfg.init_radius;
  if (r0 * r0 - 2.0 * cfg.mobility * cfg.t_end <= 0.0)
    throw ConfigError("circle vanishes before t_end");

  struct Sample {
    double t, numeric, theory;
  };
  std::vector<Sample> window;  // middle half [T/4, 3T/4]
  const double t_lo = 0.25 * cfg.t_end;
  const double t_hi = 0.75 * cfg.t_end;
  const StepHook hook = [&](int, double t, const Field& phi,
                            const StepReport&) {
    if (t < t_lo || t > t_hi) return;
    window.push_back(
        {t, radius_estimate(phi), std::sqrt(r0 * r0 - 2.0 * cfg.mobility * t)});
  };
  const RunSummary summary = run_experiment(cfg, hook);

  if (window.empty()) throw ConfigError("no steps fall in the middle half");
  double max_dev = 0.0;
  for (const Sample& s : window)
    max_dev = std::max(max_dev, std::abs(s.numeric - s.theory) / s.theory);

  std::cout << "t,radius,theory,rel_dev\n";
  const std::size_t stride = std::max<std::size_t>(1, window.size() / 10);
  auto print_sample = [](const Sample& s) {
    std::cout << format_double(s.t) << ',' << format_double(s.numeric) << ','
              << format_double(s.theory) << ','
              << format_double(std::abs(s.numeric - s.theory) / s.theory)
              << '\n';
  };
  for (std::size_t i = 0; i < window.size(); i += stride) print_sample(window[i]);
  if ((window.size() - 1) % stride != 0) print_sample(window.back());
  std::cout << "middle-half samples: " << window.size() << "\n"
            << "max relative deviation: " << format_double(max_dev) << "\n"
            << "max energy increase: "
            << format_double(summary.max_energy_increase) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-stable time integrators for gradient-flow equations"};
  app.require_subcommand(1);

  std::string config_path, seed, out_dir, h_list, tableau_arg;
  std::vector<std::string> sets;

  CLI::App* run = app.add_subcommand("run", "Integrate one configuration");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seed", seed, "override the RNG seed");
  run->add_option("--out-dir", out_dir, "override the output directory");
  run->add_option("--set", sets, "override 'key=value'");

  CLI::App* conv = app.add_subcommand(
      "convergence", "Self-refinement convergence study over step sizes");
  // long-only help so the short -h slot can hold the step-size list
  conv->set_help_flag("--help", "print help");
  conv->add_option("config", config_path, "config file")->required();
  conv->add_option("--h", h_list, "comma-separated step sizes")->required();
  conv->add_option("--seed", seed, "override the RNG seed");
  conv->add_option("--set", sets, "override 'key=value'");

  CLI::App* check = app.add_subcommand(
      "tableau-check", "Validate a tableau and report its stability certificate");
  check->add_option("tableau", tableau_arg, "builtin name or catalog file")
      ->required();

  CLI::App* bench = app.add_subcommand(
      "radius-bench", "Shrinking-circle benchmark against the sharp-interface law");
  bench->add_option("config", config_path, "config file")->required();
  bench->add_option("--seed", seed, "override the RNG seed");
  bench->add_option("--out-dir", out_dir, "override the output directory");
  bench->add_option("--set", sets, "override 'key=value'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) return cmd_tableau_check(tableau_arg);
    ExperimentConfig cfg = load_config(config_path);
    apply_cli_overrides(cfg, seed, out_dir, sets);
    if (run->parsed()) return cmd_run(cfg);
    if (conv->parsed()) return cmd_convergence(cfg, h_list);
    return cmd_radius_bench(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TableauError& e) {
    std::cerr << "tableau error: " << e.what() << "\n";
    return 2;
  } catch (const GridError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
