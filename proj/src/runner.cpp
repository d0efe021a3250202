#include "cylspectra/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cylspectra/asymptotics.hpp"
#include "cylspectra/errors.hpp"

namespace cylspectra {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandName {
  Experiment experiment;
  const char* name;
};

constexpr CommandName kCommands[] = {
    {Experiment::Solve, "solve"},       {Experiment::Sweep, "sweep"},
    {Experiment::NuLadder, "ladder"},   {Experiment::Spectrum, "spectrum"},
    {Experiment::GapCheck, "gap-check"}, {Experiment::Decay, "decay"},
    {Experiment::Beta2, "beta2"},       {Experiment::Report, "report"},
};

}  // namespace

const char* command_name(Experiment e) {
  for (const auto& c : kCommands) {
    if (c.experiment == e) return c.name;
  }
  return "?";
}

Experiment parse_experiment(const std::string& name) {
  for (const auto& c : kCommands) {
    if (name == c.name) return c.experiment;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CYLSPECTRA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<int>(v);
    throw ConfigError(std::string("CYLSPECTRA_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError("'" + key + "' must be finite");
  return d;
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  const auto i = v.get<long long>();
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
    throw ConfigError("'" + key + "' is out of range");
  }
  return static_cast<int>(i);
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("'" + key + "' must be true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_number_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(get_number(e, key));
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

CoefficientFamily parse_family(const json& v, const fs::path& base) {
  if (!v.is_object()) throw ConfigError("'family' must be an object with a 'kind'");
  reject_unknown(v, {"kind", "c", "table"}, "family");
  if (!v.contains("kind")) throw ConfigError("family needs a 'kind'");
  const std::string kind = get_string(v.at("kind"), "family.kind");
  const bool has_c = v.contains("c");
  const double c = has_c ? get_number(v.at("c"), "family.c") : 0.0;
  if (kind == "Tabulated") {
    if (has_c) throw ConfigError("Tabulated family takes 'table', not 'c'");
    if (!v.contains("table")) throw ConfigError("Tabulated family needs 'table'");
    const fs::path table = resolve(base, get_string(v.at("table"), "family.table"));
    try {
      return CoefficientFamily::tabulated(load_coefficient_table(table.string()));
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  if (v.contains("table")) throw ConfigError("'table' is only valid for the Tabulated family");
  if (kind == "Identity") {
    if (has_c) throw ConfigError("Identity family takes no 'c'");
    return CoefficientFamily::identity();
  }
  if (!has_c) throw ConfigError(kind + " family needs 'c'");
  if (kind == "ConstantOffDiag") return CoefficientFamily::constant_off_diag(c);
  if (kind == "LinearOffDiag") return CoefficientFamily::linear_off_diag(c);
  if (kind == "GradAligned") return CoefficientFamily::grad_aligned(c);
  throw ConfigError("unknown family kind '" + kind + "'");
}

SolveOptions parse_solver(const json& v) {
  if (!v.is_object()) throw ConfigError("'solver' must be an object");
  reject_unknown(v,
                 {"tol_residual", "tol_stagnation", "max_iters", "armijo_c", "armijo_shrink",
                  "init", "positivity_projection", "precondition"},
                 "solver");
  SolveOptions o;
  if (v.contains("tol_residual")) o.tol_residual = get_number(v.at("tol_residual"), "tol_residual");
  if (v.contains("tol_stagnation")) {
    o.tol_stagnation = get_number(v.at("tol_stagnation"), "tol_stagnation");
  }
  if (v.contains("max_iters")) o.max_iters = get_int(v.at("max_iters"), "max_iters");
  if (v.contains("armijo_c")) o.armijo_c = get_number(v.at("armijo_c"), "armijo_c");
  if (v.contains("armijo_shrink")) o.armijo_shrink = get_number(v.at("armijo_shrink"), "armijo_shrink");
  if (v.contains("init")) {
    const std::string init = get_string(v.at("init"), "init");
    if (init == "LiftedW") {
      o.init = InitKind::LiftedW;
    } else if (init == "PerturbedLift") {
      o.init = InitKind::PerturbedLift;
    } else if (init == "Ones") {
      o.init = InitKind::Ones;
    } else {
      throw ConfigError("unknown init '" + init + "'");
    }
  }
  if (v.contains("positivity_projection")) {
    o.positivity_projection = get_bool(v.at("positivity_projection"), "positivity_projection");
  }
  if (v.contains("precondition")) o.precondition = get_bool(v.at("precondition"), "precondition");
  o.validate();
  return o;
}

SolveDomain parse_domain(const std::string& s) {
  if (s == "mixed") return SolveDomain::Mixed;
  if (s == "dirichlet") return SolveDomain::Dirichlet;
  if (s == "half_plus") return SolveDomain::HalfPlus;
  if (s == "half_minus") return SolveDomain::HalfMinus;
  throw ConfigError("unknown domain '" + s + "' (mixed, dirichlet, half_plus, half_minus)");
}

const char* domain_name(SolveDomain d) {
  switch (d) {
    case SolveDomain::Mixed: return "mixed";
    case SolveDomain::Dirichlet: return "dirichlet";
    case SolveDomain::HalfPlus: return "half_plus";
    case SolveDomain::HalfMinus: return "half_minus";
  }
  return "?";
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"experiment", "family", "reflect", "p", "ell", "ells", "resolution", "solver",
                  "output_dir", "seed", "domain", "side", "k", "eps", "truncation", "inputs"},
                 "config");
  ExperimentConfig cfg;
  cfg.source = doc;
  if (doc.contains("experiment")) {
    cfg.experiment = parse_experiment(get_string(doc.at("experiment"), "experiment"));
  }
  if (doc.contains("family")) cfg.family = parse_family(doc.at("family"), base_dir);
  if (doc.contains("reflect")) cfg.reflect = get_bool(doc.at("reflect"), "reflect");
  if (doc.contains("p")) cfg.p = get_number(doc.at("p"), "p");
  if (!(cfg.p >= 2.0)) throw ConfigError("p must be at least 2");
  if (doc.contains("ell") && doc.contains("ells")) throw ConfigError("give either 'ell' or 'ells'");
  if (doc.contains("ell")) cfg.ells = {get_number(doc.at("ell"), "ell")};
  if (doc.contains("ells")) cfg.ells = get_number_list(doc.at("ells"), "ells");
  if (doc.contains("resolution")) {
    const json& r = doc.at("resolution");
    if (!r.is_object()) throw ConfigError("'resolution' must be an object");
    reject_unknown(r, {"nx2", "cells_per_unit"}, "resolution");
    if (r.contains("nx2")) cfg.resolution.nx2 = get_int(r.at("nx2"), "nx2");
    if (r.contains("cells_per_unit")) {
      cfg.resolution.cells_per_unit = get_int(r.at("cells_per_unit"), "cells_per_unit");
    }
  }
  if (doc.contains("solver")) cfg.solver = parse_solver(doc.at("solver"));
  if (doc.contains("output_dir")) {
    cfg.output_dir = resolve(base_dir, get_string(doc.at("output_dir"), "output_dir"));
  } else {
    cfg.output_dir = base_dir / "runs";
  }
  if (doc.contains("seed")) {
    const int seed = get_int(doc.at("seed"), "seed");
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    cfg.seed = static_cast<unsigned>(seed);
  }
  cfg.solver.seed = cfg.seed;
  if (doc.contains("domain")) cfg.domain = parse_domain(get_string(doc.at("domain"), "domain"));
  if (doc.contains("side")) {
    const std::string side = get_string(doc.at("side"), "side");
    if (side == "plus") {
      cfg.side = Side::Plus;
    } else if (side == "minus") {
      cfg.side = Side::Minus;
    } else {
      throw ConfigError("side must be 'plus' or 'minus'");
    }
  }
  if (doc.contains("k")) cfg.k = get_int(doc.at("k"), "k");
  if (doc.contains("eps")) cfg.eps = get_number_list(doc.at("eps"), "eps");
  if (doc.contains("truncation")) cfg.truncation = get_number(doc.at("truncation"), "truncation");
  if (doc.contains("inputs")) {
    const json& in = doc.at("inputs");
    if (!in.is_array()) throw ConfigError("'inputs' must be an array of paths");
    for (const auto& e : in) cfg.inputs.push_back(resolve(base_dir, get_string(e, "inputs")));
  }

  // Cross-field checks, all before any solve.
  const Experiment ex = cfg.experiment;
  if (ex == Experiment::Report) return cfg;
  if (cfg.resolution.nx2 < 8) throw ConfigError("resolution.nx2 must be at least 8");
  if (ex != Experiment::GapCheck) {
    if (cfg.ells.empty()) throw ConfigError(std::string(command_name(ex)) + " needs 'ell' or 'ells'");
    for (std::size_t i = 1; i < cfg.ells.size(); ++i) {
      if (!(cfg.ells[i] > cfg.ells[i - 1])) throw ConfigError("'ells' must be strictly increasing");
    }
    for (double ell : cfg.ells) {
      DomainSpec spec;
      spec.ell = ell;
      spec.nx2 = cfg.resolution.nx2;
      spec.cells_per_unit = cfg.resolution.cells_per_unit;
      spec.shape = Shape::FullCylinder;
      validate(spec);
      spec.shape = Shape::HalfPlus;
      spec.bc = BoundaryKind::HalfCylinder;
      validate(spec);
    }
  }
  if ((ex == Experiment::Solve || ex == Experiment::Spectrum) && cfg.ells.size() != 1) {
    throw ConfigError(std::string(command_name(ex)) + " takes a single 'ell'");
  }
  if (ex == Experiment::NuLadder && cfg.ells.size() < 3) {
    throw ConfigError("ladder needs at least 3 lengths");
  }
  if (ex == Experiment::Spectrum) {
    if (cfg.p != 2.0) throw ConfigError("spectrum is only defined for p = 2");
    if (cfg.k < 1) throw ConfigError("k must be at least 1");
  }
  if (ex == Experiment::GapCheck) {
    if (cfg.eps.empty()) throw ConfigError("gap-check needs at least one eps");
    for (double e : cfg.eps) {
      if (!(e > 0.0)) throw ConfigError("eps values must be positive");
      if (cfg.truncation != 0.0 && cfg.truncation < 10.0 / e) {
        throw ConfigError("truncation must be at least 10/eps for every eps");
      }
    }
  }
  // Builds the field once to surface ellipticity and exponent errors early.
  try {
    (void)build_coefficients(cfg.family, cfg.p, cfg.resolution.nx2);
  } catch (const UnsupportedExponentError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

namespace {

json read_config_doc(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

fs::path config_base(const fs::path& path) {
  return path.has_parent_path() ? path.parent_path() : fs::path(".");
}

}  // namespace

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_config_doc(path), config_base(path));
}

// ---------------------------------------------------------------------------
// Running

json RunManifest::to_json() const {
  json conv = json::array();
  for (const auto& [label, ok] : convergence) conv.push_back({{"label", label}, {"converged", ok}});
  bool all = true;
  for (const auto& c : convergence) all = all && c.second;
  return {{"tool_version", version},
          {"experiment", experiment},
          {"started", started},
          {"finished", finished},
          {"run_dir", run_dir.string()},
          {"outputs", outputs},
          {"convergence", conv},
          {"all_converged", all},
          {"config", config}};
}

namespace {

std::string utc_now(bool compact) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  if (compact) {
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
    char out[80];
    std::snprintf(out, sizeof out, "%s%03lldZ", buf, static_cast<long long>(ms));
    return out;
  }
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[80];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

fs::path fresh_run_dir(const fs::path& root, const std::string& command) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output directory " + root.string() + ": " + ec.message());
  const std::string stem = command + "-" + utc_now(true);
  for (int n = 0; n < 10000; ++n) {
    const fs::path dir = root / (n == 0 ? stem : stem + "-" + std::to_string(n));
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  }
  throw IoError("no fresh run directory available under " + root.string());
}

class RunWriter {
 public:
  RunWriter(RunManifest& manifest) : manifest_(manifest) {}
  void write(const std::string& name, const std::string& content) {
    write_atomic(manifest_.run_dir / name, content);
    manifest_.outputs.push_back(name);
  }
  void converged(const std::string& label, bool ok) { manifest_.convergence.emplace_back(label, ok); }

 private:
  RunManifest& manifest_;
};

std::string num(double v) { return format_number(v); }
std::string flag(bool b) { return b ? "true" : "false"; }

std::string ell_label(double ell) { return "ell=" + num(ell); }

CoefficientField config_coefficients(const ExperimentConfig& cfg) {
  CoefficientField field = build_coefficients(cfg.family, cfg.p, cfg.resolution.nx2);
  return cfg.reflect ? reflect_axis(field) : field;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void run_solve(const ExperimentConfig& cfg, RunWriter& out) {
  const CoefficientField coeffs = config_coefficients(cfg);
  const double ell = cfg.ells.front();
  const CrossSectionResult cross =
      cross_section_ground_state(cfg.resolution.nx2, coeffs, cfg.p, cfg.solver);
  EigenResult r;
  switch (cfg.domain) {
    case SolveDomain::Mixed:
    case SolveDomain::Dirichlet: {
      DomainSpec spec;
      spec.ell = ell;
      spec.nx2 = cfg.resolution.nx2;
      spec.cells_per_unit = cfg.resolution.cells_per_unit;
      spec.bc = cfg.domain == SolveDomain::Mixed ? BoundaryKind::Mixed : BoundaryKind::DirichletAll;
      const CylinderMesh mesh = build_mesh(spec);
      r = minimize_rayleigh(mesh, coeffs, cfg.p, cfg.solver, cross);
      break;
    }
    case SolveDomain::HalfPlus:
    case SolveDomain::HalfMinus:
      r = half_cylinder_eigen(cfg.domain == SolveDomain::HalfPlus ? Side::Plus : Side::Minus, ell,
                              cfg.resolution, coeffs, cfg.p, cfg.solver, cross);
      break;
  }
  // Hand-formatted so numbers keep 17 significant digits.
  std::ostringstream os;
  os << "{\n"
     << "  \"lambda\": " << num(r.lambda) << ",\n"
     << "  \"iterations\": " << r.iterations << ",\n"
     << "  \"residual\": " << num(r.final_residual) << ",\n"
     << "  \"converged\": " << flag(r.converged) << ",\n"
     << "  \"stop\": \"" << to_string(r.stop) << "\",\n"
     << "  \"mu1\": " << num(cross.mu1) << ",\n"
     << "  \"domain\": \"" << domain_name(cfg.domain) << "\",\n"
     << "  \"ell\": " << num(ell) << ",\n"
     << "  \"p\": " << num(cfg.p) << ",\n"
     << "  \"family\": \"" << coeffs.label() << "\"\n"
     << "}\n";
  out.write("solve.json", os.str());
  out.converged(ell_label(ell) + " " + domain_name(cfg.domain), r.converged);
}

void run_sweep(const ExperimentConfig& cfg, int threads, RunWriter& out) {
  const CoefficientField coeffs = config_coefficients(cfg);
  const SweepTable table = sweep_lambda(cfg.ells, coeffs, cfg.p, cfg.resolution, cfg.solver, threads);
  std::ostringstream os;
  os << "ell,p,family,lambda_mixed,lambda_dirichlet,lambda_half_plus,lambda_half_minus,mu1,gap,"
        "alpha_hat,d_plus,d_minus,n_plus,n_minus,iterations,residual,converged\n";
  for (const SweepRow& r : table.rows) {
    os << num(r.ell) << ',' << num(r.p) << ',' << r.family << ',' << num(r.lambda_mixed) << ','
       << num(r.lambda_dirichlet) << ',' << num(r.lambda_half_plus) << ','
       << num(r.lambda_half_minus) << ',' << num(r.mu1) << ',' << num(r.gap) << ','
       << num(r.alpha_hat) << ',' << num(r.d_plus) << ',' << num(r.d_minus) << ','
       << num(r.n_plus) << ',' << num(r.n_minus) << ',' << r.iterations << ',' << num(r.residual)
       << ',' << flag(r.converged) << '\n';
    out.converged(ell_label(r.ell), r.converged);
  }
  out.write("sweep.csv", os.str());
}

void run_ladder(const ExperimentConfig& cfg, int threads, RunWriter& out) {
  const CoefficientField coeffs = config_coefficients(cfg);
  const NuEstimate est =
      nu_infinity_estimate(cfg.side, coeffs, cfg.p, cfg.ells, cfg.resolution, cfg.solver, threads);
  std::ostringstream os;
  os << "ell,lambda_tilde,monotone_ok\n";
  for (std::size_t i = 0; i < est.ladder.size(); ++i) {
    const bool ok = i == 0 || est.ladder[i].lambda_tilde <= est.ladder[i - 1].lambda_tilde + kLadderSlack;
    os << num(est.ladder[i].ell) << ',' << num(est.ladder[i].lambda_tilde) << ',' << flag(ok) << '\n';
    out.converged(ell_label(est.ladder[i].ell) + " " + to_string(cfg.side), est.ladder[i].converged);
  }
  out.write("ladder.csv", os.str());
  std::ostringstream js;
  js << "{\n"
     << "  \"side\": \"" << to_string(est.side) << "\",\n"
     << "  \"last_value\": " << num(est.last_value) << ",\n"
     << "  \"extrapolated\": " << num(est.extrapolated) << ",\n"
     << "  \"monotone_ok\": " << flag(est.monotone_ok) << ",\n"
     << "  \"fit_ok\": " << flag(est.fit_ok) << "\n"
     << "}\n";
  out.write("ladder_summary.json", js.str());
}

void run_spectrum(const ExperimentConfig& cfg, RunWriter& out) {
  const CoefficientField coeffs = config_coefficients(cfg);
  DomainSpec spec;
  spec.ell = cfg.ells.front();
  spec.nx2 = cfg.resolution.nx2;
  spec.cells_per_unit = cfg.resolution.cells_per_unit;
  const CylinderMesh mesh = build_mesh(spec);
  if (static_cast<std::size_t>(cfg.k) > mesh.free_dof_count()) {
    throw ConfigError("k exceeds the number of free DOFs");
  }
  const std::vector<EigenResult> pairs = linear_spectrum(mesh, coeffs, cfg.k, cfg.solver);
  std::ostringstream os;
  os << "k,lambda,residual,converged\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    os << i + 1 << ',' << num(pairs[i].lambda) << ',' << num(pairs[i].final_residual) << ','
       << flag(pairs[i].converged) << '\n';
    out.converged("k=" + std::to_string(i + 1), pairs[i].converged);
  }
  out.write("spectrum.csv", os.str());
}

void run_gap_check(const ExperimentConfig& cfg, RunWriter& out) {
  const CoefficientField coeffs = config_coefficients(cfg);
  const CrossSectionResult cross =
      cross_section_ground_state(cfg.resolution.nx2, coeffs, cfg.p, cfg.solver);
  const GapIntegral i2 = gap_integral_I2(cross, coeffs, cfg.p);
  const SlabBound printed = slab_bound(cross, coeffs, cfg.p, SlabBoundVariant::AsPrinted);
  const SlabBound squared = slab_bound(cross, coeffs, cfg.p, SlabBoundVariant::Squared);
  std::ostringstream os;
  os << "{\n"
     << "  \"family\": \"" << coeffs.label() << "\",\n"
     << "  \"p\": " << num(cfg.p) << ",\n"
     << "  \"mu1\": " << num(cross.mu1) << ",\n"
     << "  \"poincare_cp\": " << num(cross.poincare_cp) << ",\n"
     << "  \"ellipticity_margin\": " << num(coeffs.lambda_margin()) << ",\n"
     << "  \"symmetry_S\": " << flag(satisfies_symmetry_S(coeffs, 1e-12)) << ",\n"
     << "  \"I2\": " << num(i2.value) << ",\n"
     << "  \"a12_dW_zero\": " << flag(i2.a12_dW_zero) << ",\n"
     << "  \"slab_bound_as_printed\": " << num(printed.value) << ",\n"
     << "  \"slab_bound_as_printed_clamps\": " << printed.clamp_count << ",\n"
     << "  \"slab_bound_squared\": " << num(squared.value) << ",\n"
     << "  \"slab_bound_squared_clamps\": " << squared.clamp_count << ",\n"
     << "  \"exp_test\": [";
  for (std::size_t i = 0; i < cfg.eps.size(); ++i) {
    const double eps = cfg.eps[i];
    const double trunc = cfg.truncation > 0.0 ? cfg.truncation : 10.0 / eps;
    const double value = exp_test_upper_bound(eps, cross, coeffs, cfg.p, trunc);
    os << (i ? ",\n" : "\n") << "    {\"eps\": " << num(eps) << ", \"truncation\": " << num(trunc)
       << ", \"value\": " << num(value) << "}";
  }
  os << "\n  ]\n}\n";
  out.write("gap_check.json", os.str());
  out.converged("cross-section", cross.converged);
}

void run_decay(const ExperimentConfig& cfg, int threads, RunWriter& out) {
  const CoefficientField coeffs = config_coefficients(cfg);
  const CrossSectionResult cross =
      cross_section_ground_state(cfg.resolution.nx2, coeffs, cfg.p, cfg.solver);
  struct Item {
    EigenResult result;
    SlabProfile profile;
    DecayFit fit;
    bool fit_ok = false;
    double central = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Item> items(cfg.ells.size());
  parallel_for(static_cast<int>(items.size()), threads, [&](int i) {
    DomainSpec spec;
    spec.ell = cfg.ells[i];
    spec.nx2 = cfg.resolution.nx2;
    spec.cells_per_unit = cfg.resolution.cells_per_unit;
    const CylinderMesh mesh = build_mesh(spec);
    Item& it = items[i];
    it.result = minimize_rayleigh(mesh, coeffs, cfg.p, cfg.solver, cross);
    it.profile = slab_integrals(mesh, it.result.field, cfg.p, dominant_end(mesh, it.result.field, cfg.p));
    const DecayWindow window = default_decay_window(spec.ell);
    try {
      it.fit = fit_decay(it.profile, window);
      it.fit_ok = true;
    } catch (const PreconditionError&) {
      it.fit.window = window;
      it.fit.alpha_hat = std::numeric_limits<double>::quiet_NaN();
      it.fit.r_squared = std::numeric_limits<double>::quiet_NaN();
    }
    if (spec.ell >= 2.0) it.central = central_mass(mesh, it.result.field, cfg.p, 2.0);
  });
  std::ostringstream slabs, fits;
  slabs << "ell,end,slab,grad_energy,p_mass\n";
  fits << "ell,end,window_first,window_last,alpha_hat,r_squared,central_mass,converged\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Item& it = items[i];
    for (const SlabRecord& rec : it.profile.slabs) {
      slabs << num(cfg.ells[i]) << ',' << to_string(it.profile.from) << ',' << rec.index << ','
            << num(rec.grad_energy) << ',' << num(rec.p_mass) << '\n';
    }
    fits << num(cfg.ells[i]) << ',' << to_string(it.profile.from) << ',' << it.fit.window.first
         << ',' << it.fit.window.last << ',' << num(it.fit.alpha_hat) << ','
         << num(it.fit.r_squared) << ',' << num(it.central) << ',' << flag(it.result.converged)
         << '\n';
    out.converged(ell_label(cfg.ells[i]) + " mixed", it.result.converged);
  }
  out.write("decay.csv", slabs.str());
  out.write("decay_fit.csv", fits.str());
}

void run_beta2(const ExperimentConfig& cfg, int threads, RunWriter& out) {
  const CoefficientField coeffs = config_coefficients(cfg);
  const CrossSectionResult cross =
      cross_section_ground_state(cfg.resolution.nx2, coeffs, cfg.p, cfg.solver);
  struct Item {
    double plus = 0.0, minus = 0.0, mixed = 0.0;
    bool converged = false;
  };
  std::vector<Item> items(cfg.ells.size());
  parallel_for(static_cast<int>(items.size()), threads, [&](int i) {
    const double ell = cfg.ells[i];
    const EigenResult plus = half_cylinder_eigen(Side::Plus, ell, cfg.resolution, coeffs, cfg.p, cfg.solver, cross);
    const EigenResult minus = half_cylinder_eigen(Side::Minus, ell, cfg.resolution, coeffs, cfg.p, cfg.solver, cross);
    DomainSpec spec;
    spec.ell = ell;
    spec.nx2 = cfg.resolution.nx2;
    spec.cells_per_unit = cfg.resolution.cells_per_unit;
    const EigenResult mixed = minimize_rayleigh(build_mesh(spec), coeffs, cfg.p, cfg.solver, cross);
    items[i] = {plus.lambda, minus.lambda, mixed.lambda,
                plus.converged && minus.converged && mixed.converged};
  });
  std::ostringstream os;
  os << "ell,lambda_half_plus,lambda_half_minus,beta2_ub,lambda_mixed,difference,converged\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Item& it = items[i];
    const double ub = std::max(it.plus, it.minus);
    os << num(cfg.ells[i]) << ',' << num(it.plus) << ',' << num(it.minus) << ',' << num(ub) << ','
       << num(it.mixed) << ',' << num(ub - it.mixed) << ',' << flag(it.converged) << '\n';
    out.converged(ell_label(cfg.ells[i]), it.converged);
  }
  out.write("beta2.csv", os.str());
}

void run_report(const ExperimentConfig& cfg, RunWriter& out) {
  const ReportText report = build_report(cfg.inputs);
  out.write("report.txt", report.text);
  out.write("report.csv", report.csv);
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  const int threads = resolve_threads(options.threads);
  RunManifest manifest;
  manifest.config = cfg.source;
  manifest.experiment = command_name(cfg.experiment);
  manifest.started = utc_now(false);
  const fs::path root = options.output_dir.empty() ? cfg.output_dir : options.output_dir;
  manifest.run_dir = fresh_run_dir(root, manifest.experiment);

  RunWriter out(manifest);
  switch (cfg.experiment) {
    case Experiment::Solve: run_solve(cfg, out); break;
    case Experiment::Sweep: run_sweep(cfg, threads, out); break;
    case Experiment::NuLadder: run_ladder(cfg, threads, out); break;
    case Experiment::Spectrum: run_spectrum(cfg, out); break;
    case Experiment::GapCheck: run_gap_check(cfg, out); break;
    case Experiment::Decay: run_decay(cfg, threads, out); break;
    case Experiment::Beta2: run_beta2(cfg, threads, out); break;
    case Experiment::Report: run_report(cfg, out); break;
  }
  manifest.finished = utc_now(false);
  write_atomic(manifest.run_dir / "manifest.json", dump_json(manifest.to_json()));
  return manifest;
}

RunManifest run_config(const fs::path& path, Experiment command, const RunOptions& options) {
  json doc = read_config_doc(path);
  const bool named = doc.is_object() && doc.contains("experiment");
  if (named && doc.at("experiment").is_string() &&
      parse_experiment(doc.at("experiment").get<std::string>()) != command) {
    throw ConfigError("config is for '" + doc.at("experiment").get<std::string>() +
                      "' but the command is '" + command_name(command) + "'");
  }
  if (!named && doc.is_object()) doc["experiment"] = command_name(command);
  ExperimentConfig cfg = parse_config(doc, config_base(path));
  if (!named) cfg.source.erase("experiment");
  resolve_threads(options.threads);
  return run_experiment(cfg, options);
}

// ---------------------------------------------------------------------------
// Report

namespace {

using CsvTable = std::vector<std::map<std::string, std::string>>;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool read_csv(const fs::path& path, CsvTable& rows) {
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  if (!std::getline(in, line)) return false;
  const std::vector<std::string> header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) return false;
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return true;
}

double cell_number(const std::map<std::string, std::string>& row, const std::string& key) {
  const auto it = row.find(key);
  if (it == row.end()) return std::numeric_limits<double>::quiet_NaN();
  return std::strtod(it->second.c_str(), nullptr);
}

class ReportBuilder {
 public:
  void line(const std::string& s) { text_ << s << '\n'; }
  void value(const std::string& source, const std::string& quantity, double v) {
    text_ << "  " << quantity << " = " << format_number(v) << '\n';
    csv_ << source << ',' << quantity << ',' << format_number(v) << ",,\n";
  }
  // Passes when v <= threshold.
  void check_le(const std::string& source, const std::string& property, double v, double threshold) {
    const bool pass = v <= threshold;
    text_ << "  [" << (pass ? "PASS" : "FAIL") << "] " << property << ": " << format_number(v)
          << " <= " << format_number(threshold) << " (margin " << format_number(threshold - v)
          << ")\n";
    csv_ << source << ',' << property << ',' << format_number(v) << ','
         << format_number(threshold) << ',' << (pass ? "pass" : "fail") << '\n';
  }
  std::string text() const { return text_.str(); }
  std::string csv() const { return csv_.str(); }

 private:
  std::ostringstream text_;
  std::ostringstream csv_;
};

void report_sweep(ReportBuilder& rb, const std::string& source, const CsvTable& rows) {
  if (rows.empty()) {
    rb.line("  sweep.csv has no rows");
    return;
  }
  const auto& first = rows.front();
  const auto& last = rows.back();
  rb.line("  family " + first.at("family") + ", p = " + first.at("p") + ", ell from " +
          first.at("ell") + " to " + last.at("ell"));
  const double mu1 = cell_number(last, "mu1");
  rb.value(source, "mu1", mu1);

  double max_gap = 0.0;
  for (const auto& r : rows) max_gap = std::max(max_gap, std::abs(cell_number(r, "gap")));
  const double gap_tol = 1e-6 * std::abs(mu1);
  if (max_gap < gap_tol) {
    rb.line("  no gap detected: max |gap| = " + format_number(max_gap) + " < " + format_number(gap_tol));
    rb.value(source, "max_abs_gap", max_gap);
  } else {
    const double gap = cell_number(last, "gap");
    rb.line("  gap = mu1 - lim lambda_mixed; plateau value at the largest ell:");
    rb.value(source, "gap_plateau", gap);
    if (rows.size() >= 2) {
      const double prev = cell_number(rows[rows.size() - 2], "gap");
      rb.value(source, "gap_relative_change_last_step", std::abs(gap - prev) / std::abs(gap));
    }
    double nu_min = std::min(cell_number(last, "lambda_half_plus"), cell_number(last, "lambda_half_minus"));
    if (rows.size() >= 3) {
      double best = std::numeric_limits<double>::infinity();
      for (const char* col : {"lambda_half_plus", "lambda_half_minus"}) {
        std::vector<LadderPoint> ladder;
        for (const auto& r : rows) ladder.push_back({cell_number(r, "ell"), cell_number(r, col), true});
        best = std::min(best, nu_estimate_from_ladder(Side::Plus, ladder).extrapolated);
      }
      nu_min = best;
    }
    rb.value(source, "min_nu_infinity_extrapolated", nu_min);
    rb.value(source, "mu1_minus_min_nu", mu1 - nu_min);
  }
  rb.value(source, "alpha_hat_last", cell_number(last, "alpha_hat"));

  // Sandwich constants (lambda_D - mu1) ell^k over rows with ell >= 4.
  for (int power = 1; power <= 2; ++power) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : rows) {
      const double ell = cell_number(r, "ell");
      if (ell < 4.0) continue;
      const double c = (cell_number(r, "lambda_dirichlet") - cell_number(r, "mu1")) * std::pow(ell, power);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    if (std::isfinite(lo)) {
      const std::string tag = power == 1 ? "sandwich_C_ell" : "sandwich_C_ell2";
      rb.value(source, tag + "_min", lo);
      rb.value(source, tag + "_max", hi);
    }
  }

  double id_d = 0.0, id_n = 0.0, above_mu = -std::numeric_limits<double>::infinity();
  double above_half = -std::numeric_limits<double>::infinity();
  double below_mu_dir = -std::numeric_limits<double>::infinity();
  double ladder_rise = -std::numeric_limits<double>::infinity();
  int unconverged = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double lm = cell_number(r, "lambda_mixed");
    const double mu = cell_number(r, "mu1");
    id_d = std::max(id_d, std::abs(cell_number(r, "d_plus") + cell_number(r, "d_minus") - 1.0));
    id_n = std::max(id_n, std::abs(cell_number(r, "n_plus") + cell_number(r, "n_minus") - lm));
    above_mu = std::max(above_mu, lm - mu);
    above_half = std::max(above_half, lm - std::min(cell_number(r, "lambda_half_plus"),
                                                    cell_number(r, "lambda_half_minus")));
    below_mu_dir = std::max(below_mu_dir, mu - cell_number(r, "lambda_dirichlet"));
    if (i > 0) {
      for (const char* col : {"lambda_half_plus", "lambda_half_minus"}) {
        ladder_rise = std::max(ladder_rise, cell_number(r, col) - cell_number(rows[i - 1], col));
      }
    }
    if (r.at("converged") != "true") ++unconverged;
  }
  const double slack = 1e-8 * std::max(1.0, std::abs(mu1));
  rb.check_le(source, "row_identity_D", id_d, 1e-8);
  rb.check_le(source, "row_identity_N", id_n, 1e-8 * std::max(1.0, std::abs(mu1)));
  rb.check_le(source, "bracketing_mixed_le_mu1", above_mu, slack);
  rb.check_le(source, "bracketing_mixed_le_half", above_half, slack);
  rb.check_le(source, "sandwich_mu1_le_dirichlet", below_mu_dir, slack);
  if (rows.size() >= 2) rb.check_le(source, "half_ladders_nonincreasing", ladder_rise, kLadderSlack);
  rb.check_le(source, "unconverged_rows", unconverged, 0);
}

}  // namespace

ReportText build_report(const std::vector<fs::path>& manifests) {
  ReportBuilder rb;
  rb.line(std::string(kToolVersion) + " report");
  rb.line("sections: " + std::to_string(manifests.size()));
  std::string csv_header = "source,quantity,value,threshold,pass\n";
  for (const fs::path& path : manifests) {
    const std::string source = path.string();
    rb.line("");
    rb.line("== " + source);
    std::ifstream in(path);
    if (!in) {
      rb.line("  absent");
      rb.check_le(source, "present", 1, 0);
      continue;
    }
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception&) {
      rb.line("  unreadable manifest");
      rb.check_le(source, "readable", 1, 0);
      continue;
    }
    const std::string experiment = m.value("experiment", std::string("?"));
    rb.line("  experiment " + experiment + ", all converged: " +
            (m.value("all_converged", false) ? "yes" : "no"));
    const fs::path dir = path.parent_path();
    if (experiment == "sweep") {
      CsvTable rows;
      if (!read_csv(dir / "sweep.csv", rows)) {
        rb.line("  sweep.csv absent");
        rb.check_le(source, "sweep_csv_present", 1, 0);
        continue;
      }
      report_sweep(rb, source, rows);
    } else if (m.contains("outputs")) {
      for (const auto& o : m.at("outputs")) {
        const std::string name = o.get<std::string>();
        rb.line("  output " + name + (fs::exists(dir / name) ? "" : " (absent)"));
      }
    }
  }
  return {rb.text(), csv_header + rb.csv()};
}

}  // namespace cylspectra
