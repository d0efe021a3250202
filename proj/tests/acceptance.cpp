// Desk-scale acceptance run: prints one PASS/FAIL line per criterion with the
// measured quantities indented below it. Exits 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cylspectra/asymptotics.hpp"
#include "cylspectra/runner.hpp"
#include "oracles.hpp"

using namespace cylspectra;

namespace {

const std::vector<double> kElls = {2.0, 4.0, 8.0, 12.0};
const Resolution kDesk{64, 8};

int g_threads = 1;
int g_failed = 0;

struct Criterion {
  int id;
  std::string name;
  bool pass = true;
  std::vector<std::string> notes;

  Criterion(int id_, std::string name_) : id(id_), name(std::move(name_)) {}

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
  void finish() {
    std::printf("criterion %2d %s: %s\n", id, name.c_str(), pass ? "PASS" : "FAIL");
    for (const auto& n : notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
  }
};

std::string fmt(const char* f, double a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

struct Sweep {
  std::string name;
  CoefficientFamily family;
  double p;
  bool reflected = false;
  CoefficientField coeffs;
  SweepTable table;
};

Sweep run_sweep(const std::string& name, const CoefficientFamily& family, double p,
                bool reflected = false) {
  const auto t0 = std::chrono::steady_clock::now();
  CoefficientField coeffs = build_coefficients(family, p, kDesk.nx2);
  if (reflected) coeffs = reflect_axis(coeffs);
  SweepTable table = sweep_lambda(kElls, coeffs, p, kDesk, {}, g_threads);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "[sweep] %-28s p=%g  %.1f s\n", name.c_str(), p, secs);
  return {name, family, p, reflected, std::move(coeffs), std::move(table)};
}

const SweepRow& row_at(const Sweep& s, double ell) {
  for (const auto& r : s.table.rows) {
    if (r.ell == ell) return r;
  }
  throw std::logic_error("no row");
}

CylinderMesh full_mesh(double ell, const Resolution& res, BoundaryKind bc) {
  DomainSpec spec;
  spec.ell = ell;
  spec.nx2 = res.nx2;
  spec.cells_per_unit = res.cells_per_unit;
  spec.bc = bc;
  return build_mesh(spec);
}

NuEstimate ladder_of(const Sweep& s, Side side) {
  std::vector<LadderPoint> ladder;
  for (const auto& r : s.table.rows) {
    ladder.push_back({r.ell, side == Side::Plus ? r.lambda_half_plus : r.lambda_half_minus,
                      side == Side::Plus ? r.half_plus.converged : r.half_minus.converged});
  }
  return nu_estimate_from_ladder(side, ladder);
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// ---------------------------------------------------------------------------

void criterion1(const Sweep& id2, const Sweep& id3) {
  Criterion c{1, "decoupled exactness"};
  for (const Sweep* s : {&id2, &id3}) {
    double worst = 0.0;
    for (const auto& r : s->table.rows) worst = std::max(worst, rel(r.lambda_mixed, r.mu1));
    c.require(worst < 1e-6, fmt("p=%g: max |lambda_mixed - mu1| / mu1 = %.3e (< 1e-6)", s->p, worst));
  }
  c.finish();
}

// Identity p = 2 values against the separated continuum modes.
struct AnalyticValues {
  double dirichlet, half_plus;
  std::vector<double> spectrum;
};

AnalyticValues analytic_values(double ell, const Resolution& res) {
  const CoefficientField id = make_coefficients(CoefficientFamily::identity());
  const CrossSectionResult cross = cross_section_ground_state(res.nx2, id, 2.0);
  AnalyticValues v;
  v.dirichlet = minimize_rayleigh(full_mesh(ell, res, BoundaryKind::DirichletAll), id, 2.0, {}, cross).lambda;
  v.half_plus = half_cylinder_eigen(Side::Plus, ell, res, id, 2.0, {}, cross).lambda;
  for (const auto& e : linear_spectrum(full_mesh(ell, res, BoundaryKind::Mixed), id, 3, {})) {
    v.spectrum.push_back(e.lambda);
  }
  return v;
}

void criterion2(const Sweep& id2) {
  Criterion c{2, "analytic modes"};
  double worst = 0.0;
  for (double ell : kElls) {
    const SweepRow& r = row_at(id2, ell);
    const double d = rel(r.lambda_dirichlet, oracle::continuum(ell, 1));
    const double h = rel(r.lambda_half_plus, oracle::continuum(ell, 1));
    const auto spec = linear_spectrum(full_mesh(ell, kDesk, BoundaryKind::Mixed),
                                      id2.coeffs, 3, {});
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s = std::max(s, rel(spec[k].lambda, oracle::continuum(ell, k)));
    c.note(fmt("ell=%g: rel err dirichlet %.2e, half_plus %.2e", ell, d, h) +
           fmt(", spectrum(1..3) %.2e", s));
    worst = std::max({worst, d, h, s});
  }
  c.require(worst < 5e-3, fmt("max relative error at nx2=64 = %.3e (< 0.5%%)", worst));

  const double ell = 2.0;
  const AnalyticValues coarse = analytic_values(ell, {32, 4});
  const AnalyticValues fine = analytic_values(ell, {64, 8});
  double min_order = 1e9, max_order = -1e9;
  const auto order = [&](double vc, double vf, double exact) {
    const double o = std::log2(rel(vc, exact) / rel(vf, exact));
    min_order = std::min(min_order, o);
    max_order = std::max(max_order, o);
  };
  order(coarse.dirichlet, fine.dirichlet, oracle::continuum(ell, 1));
  order(coarse.half_plus, fine.half_plus, oracle::continuum(ell, 1));
  for (int k = 0; k < 3; ++k) order(coarse.spectrum[k], fine.spectrum[k], oracle::continuum(ell, k));
  c.require(min_order > 1.8 && max_order < 2.2,
            fmt("observed order under refinement (32,4)->(64,8), ell=2: %.3f .. %.3f", min_order, max_order));
  c.finish();
}

void criterion3() {
  Criterion c{3, "gradient consistency"};
  DomainSpec spec;
  spec.ell = 1.0;
  spec.nx2 = 8;
  spec.cells_per_unit = 4;
  const CylinderMesh mesh = build_mesh(spec);
  const CoefficientField coeffs = make_coefficients(CoefficientFamily::linear_off_diag(0.6));
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double p : {2.0, 2.5, 3.0, 4.0}) {
    const CylinderEnergy model(mesh, coeffs, p);
    double worst_e = 0.0, worst_m = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd u(model.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = dist(rng);
      Eigen::VectorXd ge, gm;
      model.energy_gradient(u, ge);
      model.p_mass_gradient(u, gm);
      Eigen::VectorXd fe(u.size()), fm(u.size()), v = u;
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double h = 1e-5;
        v[i] = u[i] + h;
        const double ep = model.energy(v), mp = model.p_mass(v);
        v[i] = u[i] - h;
        const double em = model.energy(v), mm = model.p_mass(v);
        v[i] = u[i];
        fe[i] = (ep - em) / (2 * h);
        fm[i] = (mp - mm) / (2 * h);
      }
      worst_e = std::max(worst_e, (fe - ge).cwiseAbs().maxCoeff() / ge.cwiseAbs().maxCoeff());
      worst_m = std::max(worst_m, (fm - gm).cwiseAbs().maxCoeff() / gm.cwiseAbs().maxCoeff());
    }
    c.require(worst_e < 1e-6 && worst_m < 1e-6,
              fmt("p=%g, 20 fields: energy %.2e, p_mass %.2e", p, worst_e, worst_m));
  }
  c.finish();
}

void criterion4(const Sweep& c2, const Sweep& c3) {
  Criterion c{4, "gap phenomenon"};
  for (const Sweep* s : {&c2, &c3}) {
    bool positive = true;
    for (const auto& r : s->table.rows) {
      if (r.ell >= 4.0) positive = positive && r.gap > 0.0;
    }
    const double g8 = row_at(*s, 8.0).gap, g12 = row_at(*s, 12.0).gap;
    c.require(positive, fmt("p=%g: gap(4,8,12) = %.5f", s->p, row_at(*s, 4.0).gap) +
                            fmt(", %.5f, %.5f (> 0)", g8, g12));
    const double change = std::abs(g12 - g8) / std::abs(g12);
    c.require(change < 0.02, fmt("p=%g: gap change 8 -> 12 = %.2f%% (< 2%%)", s->p, 100 * change));
    const double nu = std::min(ladder_of(*s, Side::Plus).extrapolated,
                               ladder_of(*s, Side::Minus).extrapolated);
    const SweepRow& r12 = row_at(*s, 12.0);
    const double diff = std::abs(r12.lambda_mixed - nu) / r12.mu1;
    c.require(diff < 0.01, fmt("p=%g: |lambda_mixed(12) - min nu| / mu1 = %.3e (< 1e-2), nu = %.6f",
                               s->p, diff, nu));
  }
  c.finish();
}

void criterion5(const Sweep& l2) {
  Criterion c{5, "no-gap branch"};
  const double mu = row_at(l2, 12.0).mu1;
  const NuEstimate plus = ladder_of(l2, Side::Plus);
  const NuEstimate minus = ladder_of(l2, Side::Minus);
  c.require(rel(plus.extrapolated, mu) < 0.01,
            fmt("nu_plus extrapolated %.6f vs mu1 %.6f: %.3f%% (< 1%%)", plus.extrapolated, mu,
                100 * rel(plus.extrapolated, mu)));
  const double delta = (mu - minus.extrapolated) / mu;
  c.require(delta > 0.005, fmt("nu_minus extrapolated %.6f: delta = %.3f%% of mu1 (> 0.5%%)",
                               minus.extrapolated, 100 * delta));
  for (const auto& r : l2.table.rows) c.note(fmt("ell=%g: d_plus = %.6f, d_minus = %.6f", r.ell, r.d_plus, r.d_minus));
  const double dp = row_at(l2, 12.0).d_plus;
  c.require(dp < 0.05, fmt("d_plus(12) = %.6f (< 0.05)", dp));
  c.finish();
}

void criterion6(const std::vector<const Sweep*>& sweeps,
                const std::vector<std::pair<const Sweep*, const Sweep*>>& mirrored) {
  Criterion c{6, "monotone ladders"};
  for (const Sweep* s : sweeps) {
    double rise = -1e300;
    for (std::size_t i = 1; i < s->table.rows.size(); ++i) {
      const auto& a = s->table.rows[i - 1];
      const auto& b = s->table.rows[i];
      rise = std::max({rise, b.lambda_half_plus - a.lambda_half_plus,
                       b.lambda_half_minus - a.lambda_half_minus});
    }
    c.require(rise <= 1e-7, s->name + fmt(" p=%g: max ladder increase %.3e (<= 1e-7)", s->p, rise));
  }
  for (const auto& [orig, refl] : mirrored) {
    double worst = 0.0;
    for (std::size_t i = 0; i < orig->table.rows.size(); ++i) {
      const auto& a = orig->table.rows[i];
      const auto& b = refl->table.rows[i];
      worst = std::max({worst, std::abs(a.lambda_half_plus - b.lambda_half_minus),
                        std::abs(a.lambda_half_minus - b.lambda_half_plus)});
    }
    c.require(worst <= 1e-7, orig->name + fmt(" p=%g: reflection swap max |difference| %.3e (<= 1e-7)",
                                               orig->p, worst));
  }
  c.finish();
}

void criterion7(const std::vector<const Sweep*>& gap_sweeps) {
  Criterion c{7, "decay"};
  for (const Sweep* s : gap_sweeps) {
    const SweepRow& r = row_at(*s, 12.0);
    const CylinderMesh mesh = full_mesh(12.0, kDesk, BoundaryKind::Mixed);
    const DiscreteField u{r.mixed.field.values, mesh.id()};
    const double fraction = central_mass(mesh, u, s->p, 2.0) / p_mass(mesh, u, s->p).value;
    const bool ok = r.decay.alpha_hat > 0.0 && r.decay.alpha_hat < 0.95 && r.decay.r_squared >= 0.98 &&
                    fraction < 0.05;
    c.require(ok, s->name + fmt(" p=%g: alpha_hat %.4f, r_squared %.4f", s->p, r.decay.alpha_hat,
                                r.decay.r_squared) +
                      fmt(", central mass %.3e", fraction));
  }
  c.finish();
}

void criterion8(const std::vector<const Sweep*>& sweeps) {
  Criterion c{8, "Dirichlet sandwich"};
  for (const Sweep* s : sweeps) {
    const int power = s->p == 2.0 ? 2 : 1;
    double lo = 1e300, hi = -1e300;
    bool above = true;
    std::string values;
    for (double ell : {4.0, 8.0, 12.0}) {
      const SweepRow& r = row_at(*s, ell);
      above = above && r.lambda_dirichlet >= r.mu1 * (1.0 - 1e-9);
      const double prod = (r.lambda_dirichlet - r.mu1) * std::pow(ell, power);
      lo = std::min(lo, prod);
      hi = std::max(hi, prod);
      values += fmt(" %.4f", prod);
    }
    const bool stable = lo > 0.0 && hi / lo <= 2.0;
    c.require(above && stable, s->name + fmt(" p=%g: (lambda_D - mu1) ell^%g over 4,8,12:", s->p, power) +
                                   values + fmt("  ratio %.3f (<= 2)", hi / lo));
  }
  c.finish();
}

void criterion9(const Sweep& c2) {
  Criterion c{9, "higher eigenvalues"};
  double prev2 = 1e300, prev3 = 1e300;
  bool monotone = true;
  double last2 = 0.0, last3 = 0.0;
  for (double ell : {4.0, 8.0, 12.0}) {
    const auto spec = linear_spectrum(full_mesh(ell, kDesk, BoundaryKind::Mixed), c2.coeffs, 3, {});
    const double d2 = spec[1].lambda - spec[0].lambda;
    const double d3 = spec[2].lambda - spec[0].lambda;
    monotone = monotone && d2 < prev2 && d3 < prev3;
    prev2 = d2;
    prev3 = d3;
    last2 = d2;
    last3 = d3;
    c.note(fmt("ell=%g: lambda2 - lambda1 = %.5f, lambda3 - lambda1 = %.5f", ell, d2, d3));
  }
  const double mu = row_at(c2, 12.0).mu1;
  c.require(monotone, "differences decrease along ell = 4, 8, 12");
  c.require(last2 < 0.02 * mu && last3 < 0.02 * mu,
            fmt("at ell=12: %.3f%%, %.3f%% of mu1 (< 2%%)", 100 * last2 / mu, 100 * last3 / mu));
  c.finish();
}

void criterion10(const Sweep& c3) {
  Criterion c{10, "beta2 bound"};
  double prev = 1e300;
  bool decreasing = true;
  std::string values;
  for (const auto& r : c3.table.rows) {
    const double d = std::max(r.lambda_half_plus, r.lambda_half_minus) - r.lambda_mixed;
    decreasing = decreasing && d < prev;
    prev = d;
    values += fmt(" %.3e", d);
  }
  c.require(decreasing, "beta2_ub - lambda_mixed over ell = 2,4,8,12:" + values);
  const double mu = row_at(c3, 12.0).mu1;
  c.require(prev < 0.02 * mu, fmt("at ell=12: %.4f%% of mu1 (< 2%%)", 100 * prev / mu));
  c.finish();
}

void criterion11(const std::vector<const Sweep*>& sweeps) {
  Criterion c{11, "Picone"};
  for (const Sweep* s : sweeps) {
    double worst = 1e300;
    int points = 0;
    for (const auto& r : s->table.rows) {
      const CylinderMesh mesh = full_mesh(r.ell, kDesk, BoundaryKind::Mixed);
      const DiscreteField u{r.mixed.field.values, mesh.id()};
      const PiconeResidual pr = picone_residual_min(u, s->table.cross, mesh, s->coeffs, s->p,
                                                    default_w_floor(s->table.cross));
      worst = std::min(worst, pr.min_normalized);
      points += pr.points;
    }
    c.require(worst >= -1e-10, s->name + fmt(" p=%g: min normalized residual %.3e over %g points",
                                             s->p, worst, points));
  }
  c.finish();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void criterion12(const std::filesystem::path& scratch) {
  Criterion c{12, "determinism"};
  const auto config = scratch / "sweep.json";
  {
    nlohmann::json doc = {{"experiment", "sweep"},
                          {"family", {{"kind", "ConstantOffDiag"}, {"c", 0.3}}},
                          {"p", 2},
                          {"ells", kElls},
                          {"resolution", {{"nx2", kDesk.nx2}, {"cells_per_unit", kDesk.cells_per_unit}}}};
    std::ofstream(config) << doc.dump(2);
  }
  RunOptions opts;
  opts.output_dir = scratch / "runs";
  opts.threads = 1;
  const std::string a = slurp(run_config(config, Experiment::Sweep, opts).run_dir / "sweep.csv");
  const std::string b = slurp(run_config(config, Experiment::Sweep, opts).run_dir / "sweep.csv");
  c.require(!a.empty() && a == b, "two runs at 1 thread give byte-identical sweep.csv");
  opts.threads = 4;
  const std::string d = slurp(run_config(config, Experiment::Sweep, opts).run_dir / "sweep.csv");
  // Compare every numeric cell.
  double worst = 0.0;
  std::istringstream sa(a), sd(d);
  std::string la, ld;
  bool shape = true;
  while (std::getline(sa, la)) {
    if (!std::getline(sd, ld)) {
      shape = false;
      break;
    }
    std::istringstream ca(la), cd(ld);
    std::string x, y;
    while (std::getline(ca, x, ',')) {
      if (!std::getline(cd, y, ',')) {
        shape = false;
        break;
      }
      char* end = nullptr;
      const double vx = std::strtod(x.c_str(), &end);
      if (end == x.c_str() || std::isnan(vx)) {
        shape = shape && x == y;
        continue;
      }
      const double vy = std::strtod(y.c_str(), nullptr);
      if (vx != vy) worst = std::max(worst, std::abs(vx - vy) / std::max(std::abs(vx), 1e-300));
    }
  }
  c.require(shape && worst <= 1e-13,
            fmt("1 vs 4 threads: max relative difference %.3e (<= 1e-13)", worst));
  c.finish();
}

}  // namespace

int main(int argc, char** argv) {
  g_threads = resolve_threads(argc > 1 ? std::atoi(argv[1]) : 0);
  if (g_threads == 1) g_threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::printf("acceptance at nx2=%d, cells_per_unit=%d, ell in {2,4,8,12}, %d thread(s)\n", kDesk.nx2,
              kDesk.cells_per_unit, g_threads);
  const auto t0 = std::chrono::steady_clock::now();

  const Sweep id2 = run_sweep("Identity", CoefficientFamily::identity(), 2.0);
  const Sweep id3 = run_sweep("Identity", CoefficientFamily::identity(), 3.0);
  const Sweep c2 = run_sweep("ConstantOffDiag(0.3)", CoefficientFamily::constant_off_diag(0.3), 2.0);
  const Sweep c3 = run_sweep("ConstantOffDiag(0.3)", CoefficientFamily::constant_off_diag(0.3), 3.0);
  const Sweep l2 = run_sweep("LinearOffDiag(0.8)", CoefficientFamily::linear_off_diag(0.8), 2.0);
  const Sweep l3 = run_sweep("LinearOffDiag(0.8)", CoefficientFamily::linear_off_diag(0.8), 3.0);
  const Sweep l2r = run_sweep("LinearOffDiag(0.8)~reflected", CoefficientFamily::linear_off_diag(0.8), 2.0, true);
  const Sweep l3r = run_sweep("LinearOffDiag(0.8)~reflected", CoefficientFamily::linear_off_diag(0.8), 3.0, true);
  const Sweep g2 = run_sweep("GradAligned(0.15)", CoefficientFamily::grad_aligned(0.15), 2.0);
  const Sweep g3 = run_sweep("GradAligned(0.15)", CoefficientFamily::grad_aligned(0.15), 3.0);

  const std::vector<const Sweep*> all = {&id2, &id3, &c2, &c3, &l2, &l3, &l2r, &l3r, &g2, &g3};
  const std::vector<const Sweep*> gap_families = {&c2, &c3, &l2, &l3, &g2, &g3};
  const std::vector<const Sweep*> unreflected = {&id2, &id3, &c2, &c3, &l2, &l3, &g2, &g3};

  criterion1(id2, id3);
  criterion2(id2);
  criterion3();
  criterion4(c2, c3);
  criterion5(l2);
  criterion6(all, {{&l2, &l2r}, {&l3, &l3r}, {&c2, &c2}, {&c3, &c3}});
  criterion7(gap_families);
  criterion8(unreflected);
  criterion9(c2);
  criterion10(c3);
  criterion11(all);

  oracle::TempDir scratch("acceptance");
  criterion12(scratch.path);

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("summary: %d of 12 criteria passed (%.0f s)\n", 12 - g_failed, secs);
  return g_failed == 0 ? 0 : 1;
}
