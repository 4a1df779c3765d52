#include "dvdflow/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace dvdflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double_value(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ConfigError("key '" + key + "': cannot parse number '" + s + "'");
  return v;
}

long long to_int_value(const std::string& key, const std::string& s) {
  long long v = 0;
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(s.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ConfigError("key '" + key + "': cannot parse integer '" + s + "'");
  return v;
}

unsigned long long to_u64_value(const std::string& key, const std::string& s) {
  unsigned long long v = 0;
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(s.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ConfigError("key '" + key + "': cannot parse integer '" + s + "'");
  return v;
}

bool to_bool_value(const std::string& key, const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError("key '" + key + "': cannot parse boolean '" + s + "'");
}

std::vector<double> to_double_list(const std::string& key,
                                   const std::string& s) {
  std::vector<double> out;
  std::string token;
  std::stringstream ss(s);
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    out.push_back(to_double_value(key, token));
  }
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model",          "scheme",          "tableau.file",
      "grid.dim",       "grid.nx",         "grid.ny",
      "grid.lx",        "grid.ly",         "grid.bc",
      "fe.gamma",       "fe.epsilon",      "fe.beta",
      "fe.c0",          "fe.m",            "model.mobility",
      "time.h",         "time.t_end",      "init.kind",
      "init.amplitude", "init.radius",     "init.value",
      "seed",           "output.dir",      "output.prefix",
      "output.csv",     "output.snapshot_times",
      "newton.eps_rel", "newton.eps_abs",  "newton.max_iters",
      "krylov.xi_rel",  "krylov.xi_abs",   "krylov.restart",
      "krylov.max_iters", "precond.block", "precond.overlap",
      "lhat.a0",        "lhat.a1",         "lhat.a2",
  };
  return keys;
}

// Number of steps of size h needed to reach t_end exactly.
int divisible_steps(double t_end, double h) {
  if (!(h > 0.0)) throw ConfigError("time.h must be positive");
  if (!(t_end > 0.0)) throw ConfigError("time.t_end must be positive");
  const double ratio = t_end / h;
  const long long n = std::llround(ratio);
  if (n < 1 ||
      std::abs(static_cast<double>(n) * h - t_end) >
          1e-8 * std::max(1.0, std::abs(t_end)))
    throw ConfigError("time.h must divide time.t_end");
  if (n > std::numeric_limits<int>::max())
    throw ConfigError("step count overflows");
  return static_cast<int>(n);
}

// One time stepper behind a uniform step()/current() pair.
struct Engine {
  std::function<StepReport()> step;
  std::function<const Field&()> current;
};

struct MultiStageState {
  Field phi;
  DvdTableau tab;
  DvdStepConfig cfg;
  DissipationKind kind;
  FreeEnergy fe;
  double heff;
};

struct RelaxedEngineState {
  RelaxedState st;
  SchwarzGmresSolver solver;
  SchemeFamily family;
  int m;
  StabilizerCoefficients lhat;
  DissipationKind kind;
  FreeEnergy fe;
  double heff;
};

Engine make_engine(const ExperimentConfig& cfg, double heff) {
  Engine engine;
  if (cfg.scheme.family == SchemeFamily::MultiStage) {
    DvdTableau tab;
    if (!cfg.scheme.tableau_file.empty()) {
      std::ifstream in(cfg.scheme.tableau_file);
      if (!in) throw IoError("cannot open tableau file " + cfg.scheme.tableau_file);
      tab = read_tableau(in);
    } else {
      tab = builtin_tableau(cfg.scheme.tableau_name);
    }
    auto st = std::make_shared<MultiStageState>(MultiStageState{
        initial_condition(cfg), std::move(tab),
        DvdStepConfig{cfg.newton, cfg.krylov, cfg.precond_block,
                      cfg.precond_overlap},
        cfg.model, cfg.fe, heff});
    engine.step = [st] {
      StepReport rep;
      st->phi = dvd_step(st->phi, st->tab, st->kind, st->fe, st->heff, st->cfg,
                         &rep);
      return rep;
    };
    engine.current = [st]() -> const Field& { return st->phi; };
    return engine;
  }

  auto st = std::make_shared<RelaxedEngineState>(RelaxedEngineState{
      RelaxedState{initial_condition(cfg), Field{}, false, 0.0, Field{}},
      SchwarzGmresSolver(cfg.krylov, cfg.precond_block, cfg.precond_overlap),
      cfg.scheme.family, cfg.aux_power, cfg.lhat, cfg.model, cfg.fe, heff});
  switch (st->family) {
    case SchemeFamily::ScalarAux:
      st->st.r = init_scalar_aux(st->st.phi, 1, st->fe);
      break;
    case SchemeFamily::ScalarAuxSqrt:
      st->st.r = init_scalar_aux(st->st.phi, 2, st->fe);
      break;
    case SchemeFamily::FieldAux:
      st->st.q = init_field_aux(st->st.phi, st->m, st->fe);
      break;
    default:
      break;
  }
  engine.step = [st] {
    switch (st->family) {
      case SchemeFamily::ScalarAux:
        return rdvd1_step(st->st, st->fe, st->kind, st->heff, st->solver);
      case SchemeFamily::ScalarAuxSqrt:
        return savcn_step(st->st, st->fe, st->kind, st->heff, st->solver);
      case SchemeFamily::FieldAux:
        return ieq_step(st->st, st->fe, st->kind, st->heff, st->m, st->solver);
      default:
        return stabilized_step(st->st, st->fe, st->kind, st->heff, st->lhat,
                               st->solver);
    }
  };
  engine.current = [st]() -> const Field& { return st->st.phi; };
  return engine;
}

}  // namespace

SchemeSpec parse_scheme(const std::string& name) {
  SchemeSpec spec;
  spec.name = name;
  if (name == "Sch-1" || name == "Sch-2" || name == "Sch-3" ||
      name == "Sch-4") {
    spec.family = SchemeFamily::MultiStage;
    spec.tableau_name = name;
  } else if (name == "custom") {
    spec.family = SchemeFamily::MultiStage;
  } else if (name == "R-DVD-1") {
    spec.family = SchemeFamily::ScalarAux;
  } else if (name == "SAV/CN") {
    spec.family = SchemeFamily::ScalarAuxSqrt;
  } else if (name == "IEQ") {
    spec.family = SchemeFamily::FieldAux;
  } else if (name == "Stabilized") {
    spec.family = SchemeFamily::Stabilized;
  } else {
    throw ConfigError("unknown scheme '" + name +
                      "' (expected Sch-1..Sch-4, R-DVD-1, SAV/CN, IEQ, "
                      "Stabilized, or custom)");
  }
  return spec;
}

ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> raw;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    if (!raw.emplace(key, value).second)
      throw ConfigError("duplicate key '" + key + "'");
  }

  for (const auto& [key, value] : raw)
    if (!known_keys().count(key)) throw ConfigError("unknown key '" + key + "'");

  auto has = [&raw](const std::string& k) { return raw.count(k) != 0; };
  auto get = [&raw](const std::string& k) -> const std::string& {
    auto it = raw.find(k);
    if (it == raw.end()) throw ConfigError("missing required key '" + k + "'");
    return it->second;
  };
  auto get_double = [&](const std::string& k, double dflt) {
    return has(k) ? to_double_value(k, raw.at(k)) : dflt;
  };
  auto get_int = [&](const std::string& k, long long dflt) {
    return has(k) ? to_int_value(k, raw.at(k)) : dflt;
  };

  ExperimentConfig cfg;

  const std::string& model = get("model");
  if (model == "AC") {
    cfg.model = DissipationKind::L2;
  } else if (model == "CH") {
    cfg.model = DissipationKind::Hminus1;
  } else {
    throw ConfigError("model must be AC or CH, got '" + model + "'");
  }

  cfg.scheme = parse_scheme(get("scheme"));
  if (has("tableau.file")) {
    if (cfg.scheme.family != SchemeFamily::MultiStage)
      throw ConfigError("tableau.file applies to multi-stage schemes only");
    cfg.scheme.tableau_file = raw.at("tableau.file");
  }
  if (cfg.scheme.family == SchemeFamily::MultiStage &&
      cfg.scheme.tableau_name.empty() && cfg.scheme.tableau_file.empty())
    throw ConfigError("scheme custom requires tableau.file");

  BoundaryKind bc = BoundaryKind::Periodic;
  if (has("grid.bc")) {
    const std::string& s = raw.at("grid.bc");
    if (s == "periodic") {
      bc = BoundaryKind::Periodic;
    } else if (s == "neumann") {
      bc = BoundaryKind::NeumannReflect;
    } else {
      throw ConfigError("grid.bc must be periodic or neumann, got '" + s + "'");
    }
  }
  const long long dim = to_int_value("grid.dim", get("grid.dim"));
  const long long nx = to_int_value("grid.nx", get("grid.nx"));
  const double lx = to_double_value("grid.lx", get("grid.lx"));
  try {
    if (dim == 1) {
      cfg.grid = make_grid_1d(static_cast<int>(nx), lx, bc);
    } else if (dim == 2) {
      const long long ny = to_int_value("grid.ny", get("grid.ny"));
      const double ly = to_double_value("grid.ly", get("grid.ly"));
      cfg.grid = make_grid_2d(static_cast<int>(nx), static_cast<int>(ny), lx,
                              ly, bc);
    } else {
      throw ConfigError("grid.dim must be 1 or 2");
    }
  } catch (const GridError& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }

  cfg.fe.gamma = get_double("fe.gamma", 1.0);
  cfg.fe.epsilon = get_double("fe.epsilon", 0.1);
  cfg.fe.beta = get_double("fe.beta", 0.0);
  if (!(cfg.fe.epsilon > 0.0)) throw ConfigError("fe.epsilon must be positive");
  if (!(cfg.fe.gamma > 0.0)) throw ConfigError("fe.gamma must be positive");
  cfg.fe.domain_measure = cfg.grid.measure();

  cfg.aux_power = static_cast<int>(get_int("fe.m", 1));
  if (cfg.scheme.family == SchemeFamily::ScalarAuxSqrt) cfg.aux_power = 2;
  if (cfg.scheme.family == SchemeFamily::ScalarAux) cfg.aux_power = 1;
  if (cfg.aux_power != 1 && cfg.aux_power != 2)
    throw ConfigError("fe.m must be 1 or 2");

  // C0 keeps square-root radicands positive; only needed when a root is
  // actually taken, hence the m-dependent default.
  cfg.fe.c0 = has("fe.c0") ? to_double_value("fe.c0", raw.at("fe.c0"))
                           : (cfg.aux_power == 2 ? 1.0 : 0.0);

  cfg.mobility = get_double("model.mobility", 1.0);
  if (!(cfg.mobility > 0.0)) throw ConfigError("model.mobility must be positive");

  cfg.h = to_double_value("time.h", get("time.h"));
  cfg.t_end = to_double_value("time.t_end", get("time.t_end"));
  if (!(cfg.h > 0.0)) throw ConfigError("time.h must be positive");
  if (!(cfg.t_end > 0.0)) throw ConfigError("time.t_end must be positive");

  cfg.init_kind = has("init.kind") ? raw.at("init.kind") : "sine";
  if (cfg.init_kind != "sine" && cfg.init_kind != "circle" &&
      cfg.init_kind != "random" && cfg.init_kind != "constant")
    throw ConfigError("init.kind must be sine, circle, random, or constant");
  cfg.init_amplitude = get_double("init.amplitude", 0.1);
  cfg.init_radius = get_double("init.radius", 0.5);
  cfg.init_value = get_double("init.value", 0.0);
  if (cfg.init_kind == "circle" && cfg.grid.dim != 2)
    throw ConfigError("init.kind circle requires grid.dim = 2");

  cfg.seed = has("seed") ? to_u64_value("seed", raw.at("seed")) : 0;

  if (has("output.dir")) cfg.out_dir = raw.at("output.dir");
  if (has("output.prefix")) cfg.prefix = raw.at("output.prefix");
  if (has("output.csv"))
    cfg.write_csv = to_bool_value("output.csv", raw.at("output.csv"));
  if (has("output.snapshot_times"))
    cfg.snapshot_times =
        to_double_list("output.snapshot_times", raw.at("output.snapshot_times"));

  cfg.newton.eps_rel = get_double("newton.eps_rel", cfg.newton.eps_rel);
  cfg.newton.eps_abs = get_double("newton.eps_abs", cfg.newton.eps_abs);
  cfg.newton.max_iters =
      static_cast<int>(get_int("newton.max_iters", cfg.newton.max_iters));
  cfg.krylov.xi_rel = get_double("krylov.xi_rel", cfg.krylov.xi_rel);
  cfg.krylov.xi_abs = get_double("krylov.xi_abs", cfg.krylov.xi_abs);
  cfg.krylov.restart =
      static_cast<int>(get_int("krylov.restart", cfg.krylov.restart));
  cfg.krylov.max_iters =
      static_cast<int>(get_int("krylov.max_iters", cfg.krylov.max_iters));
  cfg.precond_block =
      static_cast<int>(get_int("precond.block", cfg.precond_block));
  cfg.precond_overlap =
      static_cast<int>(get_int("precond.overlap", cfg.precond_overlap));
  if (cfg.precond_block < 1) throw ConfigError("precond.block must be >= 1");
  if (cfg.precond_overlap < 0)
    throw ConfigError("precond.overlap must be >= 0");

  const double eps2 = cfg.fe.epsilon * cfg.fe.epsilon;
  cfg.lhat.a0 = get_double("lhat.a0", 2.0 / eps2);
  cfg.lhat.a1 = get_double("lhat.a1", 0.0);
  cfg.lhat.a2 = get_double("lhat.a2", 0.0);

  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse_config(in);
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "seed") {
    cfg.seed = to_u64_value(key, value);
  } else if (key == "output.dir") {
    cfg.out_dir = value;
  } else if (key == "output.prefix") {
    cfg.prefix = value;
  } else if (key == "output.csv") {
    cfg.write_csv = to_bool_value(key, value);
  } else if (key == "output.snapshot_times") {
    cfg.snapshot_times = to_double_list(key, value);
  } else if (key == "time.h") {
    cfg.h = to_double_value(key, value);
    if (!(cfg.h > 0.0)) throw ConfigError("time.h must be positive");
  } else if (key == "time.t_end") {
    cfg.t_end = to_double_value(key, value);
    if (!(cfg.t_end > 0.0)) throw ConfigError("time.t_end must be positive");
  } else if (key == "init.amplitude") {
    cfg.init_amplitude = to_double_value(key, value);
  } else if (key == "init.radius") {
    cfg.init_radius = to_double_value(key, value);
  } else if (key == "init.value") {
    cfg.init_value = to_double_value(key, value);
  } else if (key == "model.mobility") {
    cfg.mobility = to_double_value(key, value);
    if (!(cfg.mobility > 0.0))
      throw ConfigError("model.mobility must be positive");
  } else {
    throw ConfigError("key '" + key + "' cannot be overridden");
  }
}

Field initial_condition(const ExperimentConfig& cfg) {
  Field f(cfg.grid);
  const UniformGrid& g = cfg.grid;
  if (cfg.init_kind == "sine") {
    const double kx = 2.0 * std::numbers::pi / g.lx;
    if (g.dim == 1) {
      for (int ix = 0; ix < g.nx; ++ix)
        f[ix] = cfg.init_amplitude * std::sin(kx * g.x(ix));
    } else {
      const double ky = 2.0 * std::numbers::pi / g.ly;
      for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
          f[g.index(ix, iy)] = cfg.init_amplitude * std::sin(kx * g.x(ix)) *
                               std::sin(ky * g.y(iy));
    }
  } else if (cfg.init_kind == "circle") {
    // Sharp indicator (+1 inside, -1 outside) centered in the domain; it
    // relaxes to the equilibrium interface profile within a few steps.
    const double cx = 0.5 * g.lx;
    const double cy = 0.5 * g.ly;
    const double r2 = cfg.init_radius * cfg.init_radius;
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        const double dx = g.x(ix) - cx;
        const double dy = g.y(iy) - cy;
        f[g.index(ix, iy)] = dx * dx + dy * dy < r2 ? 1.0 : -1.0;
      }
  } else if (cfg.init_kind == "random") {
    std::mt19937_64 eng(cfg.seed);
    for (int i = 0; i < f.size(); ++i) {
      const double u =
          static_cast<double>(eng() >> 11) * 0x1.0p-53;  // uniform [0,1)
      f[i] = cfg.init_amplitude * (2.0 * u - 1.0);
    }
  } else {  // constant
    for (int i = 0; i < f.size(); ++i) f[i] = cfg.init_value;
  }
  return f;
}

double radius_estimate(const Field& f) {
  if (f.grid.dim != 2)
    throw GridError("radius estimate requires a 2-d field");
  const double w = f.grid.cell_weight();
  double area = 0.0;
  for (int i = 0; i < f.size(); ++i)
    area += std::clamp(0.5 * (f[i] + 1.0), 0.0, 1.0);
  area *= w;
  return std::sqrt(area / std::numbers::pi);
}

RunSummary run_experiment(const ExperimentConfig& cfg, const StepHook& hook) {
  const int n = divisible_steps(cfg.t_end, cfg.h);
  const double heff = cfg.mobility * cfg.h;
  Engine engine = make_engine(cfg, heff);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir);

  std::ofstream csv;
  std::string csv_path;
  if (cfg.write_csv) {
    csv_path = (fs::path(cfg.out_dir) / (cfg.prefix + ".csv")).string();
    csv.open(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path + " for writing");
    csv << "step,time,energy,modified_energy,mass,newton_iters,gmres_iters,"
           "radius\n";
  }

  std::vector<bool> snapshot_done(cfg.snapshot_times.size(), false);
  auto emit_snapshots = [&](double t) {
    for (std::size_t s = 0; s < cfg.snapshot_times.size(); ++s) {
      if (snapshot_done[s]) continue;
      if (std::abs(t - cfg.snapshot_times[s]) <= 0.5 * cfg.h) {
        const std::string path =
            (fs::path(cfg.out_dir) /
             (cfg.prefix + "_snapshot_" + std::to_string(s) + ".dat"))
                .string();
        write_snapshot_file(path, engine.current(), t);
        snapshot_done[s] = true;
      }
    }
  };
  emit_snapshots(0.0);

  RunSummary summary;
  summary.steps = n;
  summary.initial_energy = discrete_energy(engine.current(), cfg.fe);
  summary.csv_path = csv_path;
  double mass0 = 0.0;
  double max_de = -std::numeric_limits<double>::infinity();
  double max_dm = -std::numeric_limits<double>::infinity();

  for (int i = 1; i <= n; ++i) {
    const StepReport rep = engine.step();
    const double t = static_cast<double>(i) * cfg.h;
    if (i == 1) {
      mass0 = rep.mass_before;
      summary.initial_modified_energy = rep.modified_energy_before;
    }
    max_de = std::max(max_de, rep.energy_after - rep.energy_before);
    max_dm = std::max(max_dm,
                      rep.modified_energy_after - rep.modified_energy_before);
    summary.mass_drift =
        std::max(summary.mass_drift, std::abs(rep.mass_after - mass0));
    summary.total_newton_iterations += rep.newton_iterations;
    summary.total_gmres_iterations += rep.gmres_iterations;
    summary.final_energy = rep.energy_after;
    summary.final_modified_energy = rep.modified_energy_after;
    summary.final_time = t;

    if (cfg.write_csv) {
      csv << i << ',' << format_double(t) << ','
          << format_double(rep.energy_after) << ','
          << format_double(rep.modified_energy_after) << ','
          << format_double(rep.mass_after) << ',' << rep.newton_iterations
          << ',' << rep.gmres_iterations << ',';
      if (cfg.grid.dim == 2)
        csv << format_double(radius_estimate(engine.current()));
      csv << '\n';
    }
    emit_snapshots(t);
    if (hook) hook(i, t, engine.current(), rep);
  }

  summary.max_energy_increase = max_de;
  summary.max_modified_energy_increase = max_dm;
  if (cfg.write_csv) {
    csv.flush();
    if (!csv) throw IoError("failed writing " + csv_path);
  }
  return summary;
}

Field integrate_final(const ExperimentConfig& cfg, double h) {
  const int n = divisible_steps(cfg.t_end, h);
  Engine engine = make_engine(cfg, cfg.mobility * h);
  for (int i = 0; i < n; ++i) engine.step();
  return engine.current();
}

ConvergenceResult convergence_study(const ExperimentConfig& cfg,
                                    const std::vector<double>& hs) {
  if (hs.empty()) throw ConfigError("convergence study needs step sizes");
  std::vector<double> sorted = hs;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i] > 0.0))
      throw ConfigError("step sizes must be positive");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw ConfigError("step sizes must be distinct");
    divisible_steps(cfg.t_end, sorted[i]);  // throws unless exact
  }

  const double h_ref = sorted.back() / 32.0;
  const Field ref = integrate_final(cfg, h_ref);

  ConvergenceResult result;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Field sol = integrate_final(cfg, sorted[i]);
    Field diff(ref.grid);
    for (int j = 0; j < diff.size(); ++j) diff[j] = sol[j] - ref[j];
    ConvergenceRow row;
    row.h = sorted[i];
    row.error = weighted_l2_norm(diff);
    if (i > 0) {
      const ConvergenceRow& prev = result.rows[i - 1];
      if (prev.error > 0.0 && row.error > 0.0)
        row.rate = std::log(prev.error / row.error) / std::log(prev.h / row.h);
    }
    result.rows.push_back(row);
  }
  if (result.rows.size() > 1) {
    double acc = 0.0;
    for (std::size_t i = 1; i < result.rows.size(); ++i)
      acc += result.rows[i].rate;
    result.observed_order = acc / static_cast<double>(result.rows.size() - 1);
  }
  return result;
}

}  // namespace dvdflow
