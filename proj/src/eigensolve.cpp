#include "cylspectra/eigensolve.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "cylspectra/errors.hpp"
#include "kernels.hpp"

namespace cylspectra {

void SolveOptions::validate() const {
  if (!(tol_residual > 0.0)) throw ConfigError("tol_residual must be positive");
  if (!(tol_stagnation > 0.0)) throw ConfigError("tol_stagnation must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("armijo_c must lie in (0, 1)");
  if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
    throw ConfigError("armijo_shrink must lie in (0, 1)");
  }
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Converged: return "converged";
    case StopReason::Stagnated: return "stagnated";
    case StopReason::LineSearchFailed: return "line-search-failed";
    case StopReason::MaxIterations: return "max-iterations";
  }
  return "?";
}

const char* to_string(Side side) { return side == Side::Plus ? "plus" : "minus"; }

// ---------------------------------------------------------------------------
// Cross-section functional

double CrossSectionResult::W_at(double x2) const {
  const double t = (x2 + 0.5) * nx2;
  const int j = std::clamp(static_cast<int>(std::floor(t)), 0, nx2 - 1);
  const double s = std::clamp(t - j, 0.0, 1.0);
  return (1.0 - s) * W[j] + s * W[j + 1];
}

double CrossSectionResult::W_prime_at(double x2) const {
  const double t = (x2 + 0.5) * nx2;
  const int j = std::clamp(static_cast<int>(std::floor(t)), 0, nx2 - 1);
  return (W[j + 1] - W[j]) * nx2;
}

CrossSectionEnergy::CrossSectionEnergy(int nx2, const CoefficientField& coeffs, double p,
                                       const QuadratureRule& quad)
    : nx2_(nx2), p_(p), quad_(quad) {
  check_exponent(p);
  const double h = 1.0 / nx2;
  const int nq = quad_.points_per_dir;
  a22_.resize(static_cast<std::size_t>(nx2) * nq);
  for (int j = 0; j < nx2; ++j) {
    for (int b = 0; b < nq; ++b) a22_[j * nq + b] = coeffs.at(-0.5 + (j + quad_.abscissae[b]) * h).a22;
  }
}

CrossSectionEnergy::CrossSectionEnergy(int nx2, double p, const QuadratureRule& quad)
    : nx2_(nx2), p_(p), quad_(quad) {
  check_exponent(p);
  a22_.assign(static_cast<std::size_t>(nx2) * quad_.points_per_dir, 1.0);
}

namespace {

// Interior DOF k is node k + 1; the end nodes are zero.
inline double node_value(const Eigen::VectorXd& u, int node, int nx2) {
  return (node == 0 || node == nx2) ? 0.0 : u[node - 1];
}

}  // namespace

double CrossSectionEnergy::energy(const Eigen::VectorXd& u) const {
  double total = 0.0;
  const double h = 1.0 / nx2_;
  const int nq = quad_.points_per_dir;
  const detail::PowerHalf power(p_);
  for (int j = 0; j < nx2_; ++j) {
    const double slope = (node_value(u, j + 1, nx2_) - node_value(u, j, nx2_)) / h;
    for (int b = 0; b < nq; ++b) {
      const double q = std::abs(a22_[j * nq + b] * slope * slope);
      total += quad_.weights[b] * h * power.reduced(q) * q;
    }
  }
  return total;
}

double CrossSectionEnergy::energy_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
  grad = Eigen::VectorXd::Zero(size());
  double total = 0.0;
  const double h = 1.0 / nx2_;
  const int nq = quad_.points_per_dir;
  const detail::PowerHalf power(p_);
  for (int j = 0; j < nx2_; ++j) {
    const double slope = (node_value(u, j + 1, nx2_) - node_value(u, j, nx2_)) / h;
    double dslope = 0.0;
    for (int b = 0; b < nq; ++b) {
      const double a = a22_[j * nq + b];
      const double q = std::abs(a * slope * slope);
      const double r = power.reduced(q);
      total += quad_.weights[b] * h * r * q;
      dslope += quad_.weights[b] * h * p_ * r * a * slope;
    }
    if (j > 0) grad[j - 1] -= dslope / h;
    if (j + 1 < nx2_) grad[j] += dslope / h;
  }
  return total;
}

double CrossSectionEnergy::p_mass(const Eigen::VectorXd& u) const {
  double total = 0.0;
  const double h = 1.0 / nx2_;
  const int nq = quad_.points_per_dir;
  const detail::PowerAbs power(p_);
  for (int j = 0; j < nx2_; ++j) {
    const double left = node_value(u, j, nx2_);
    const double right = node_value(u, j + 1, nx2_);
    for (int b = 0; b < nq; ++b) {
      const double s = quad_.abscissae[b];
      const double v = (1.0 - s) * left + s * right;
      total += quad_.weights[b] * h * power.reduced(v) * v * v;
    }
  }
  return total;
}

double CrossSectionEnergy::p_mass_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
  grad = Eigen::VectorXd::Zero(size());
  double total = 0.0;
  const double h = 1.0 / nx2_;
  const int nq = quad_.points_per_dir;
  const detail::PowerAbs power(p_);
  for (int j = 0; j < nx2_; ++j) {
    const double left = node_value(u, j, nx2_);
    const double right = node_value(u, j + 1, nx2_);
    double dl = 0.0, dr = 0.0;
    for (int b = 0; b < nq; ++b) {
      const double s = quad_.abscissae[b];
      const double v = (1.0 - s) * left + s * right;
      const double r = power.reduced(v);
      total += quad_.weights[b] * h * r * v * v;
      const double g = quad_.weights[b] * h * p_ * r * v;
      dl += (1.0 - s) * g;
      dr += s * g;
    }
    if (j > 0) grad[j - 1] += dl;
    if (j + 1 < nx2_) grad[j] += dr;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Nonlinear Rayleigh minimization

namespace {

constexpr int kProjectionPeriod = 50;
constexpr int kStagnationWindow = 20;
constexpr int kMaxBacktracks = 60;

double normalize(const RayleighProblem& problem, Eigen::VectorXd& u) {
  const double m = problem.p_mass(u);
  if (!(m > 0.0)) throw UndefinedQuotientError("cannot normalize the zero field");
  u /= std::pow(m, 1.0 / problem.p());
  return m;
}

struct Point {
  Eigen::VectorXd u;
  double R = 0.0;
  Eigen::VectorXd d;  // gradient of the quotient at u (u has unit p-mass)
};

void evaluate_direction(const RayleighProblem& problem, Point& pt) {
  Eigen::VectorXd gE, gm;
  const double E = problem.energy_gradient(pt.u, gE);
  const double m = problem.p_mass_gradient(pt.u, gm);
  pt.R = E / m;
  pt.d = (gE - pt.R * gm) / m;
}

// Clamps negative nodal values; returns false when nothing changed or the
// quotient would increase.
bool project_positive(const RayleighProblem& problem, Point& pt) {
  if (pt.u.minCoeff() >= 0.0) return false;
  Eigen::VectorXd v = pt.u.cwiseMax(0.0);
  const double m = problem.p_mass(v);
  if (!(m > 0.0)) return false;
  const double R = problem.energy(v) / m;
  if (R > pt.R) return false;
  v /= std::pow(m, 1.0 / problem.p());
  pt.u = std::move(v);
  evaluate_direction(problem, pt);
  return true;
}

}  // namespace

EigenResult minimize_rayleigh(const RayleighProblem& problem, Eigen::VectorXd initial,
                              const SolveOptions& opts, const Preconditioner& precond) {
  opts.validate();
  if (initial.size() != problem.size()) throw DimensionError("initial guess has the wrong size");
  const auto direction = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
    return precond ? precond(d) : d;
  };
  EigenResult result;
  Point pt;
  pt.u = std::move(initial);
  if (pt.u.sum() < 0.0) pt.u = -pt.u;
  normalize(problem, pt.u);
  evaluate_direction(problem, pt);
  Eigen::VectorXd z = direction(pt.d);
  result.rayleigh_history.push_back(pt.R);

  const double unorm = std::max(pt.u.cwiseAbs().maxCoeff(), 1e-300);
  const double znorm0 = z.cwiseAbs().maxCoeff();
  double tau = znorm0 > 0.0 ? 1e-2 * unorm / znorm0 : 1.0;
  if (precond) tau = std::min(tau, 1.0);

  result.stop = StopReason::MaxIterations;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const double res = pt.d.cwiseAbs().maxCoeff();
    result.final_residual = res;
    if (res <= opts.tol_residual * std::max(1.0, std::abs(pt.R))) {
      result.stop = StopReason::Converged;
      break;
    }
    const double dz = pt.d.dot(z);
    if (!(dz > 0.0)) {
      result.stop = StopReason::LineSearchFailed;
      break;
    }

    // Armijo backtracking from the Barzilai-Borwein seed.
    Eigen::VectorXd trial;
    double trial_R = 0.0;
    double trial_m = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < kMaxBacktracks; ++ls) {
      trial = pt.u - tau * z;
      trial_m = problem.p_mass(trial);
      if (trial_m > 0.0) {
        trial_R = problem.energy(trial) / trial_m;
        if (trial_R <= pt.R - opts.armijo_c * tau * dz) {
          accepted = true;
          break;
        }
      }
      tau *= opts.armijo_shrink;
    }
    if (!accepted) {
      result.stop = StopReason::LineSearchFailed;
      break;
    }
    trial /= std::pow(trial_m, 1.0 / problem.p());

    Point next;
    next.u = std::move(trial);
    evaluate_direction(problem, next);
    Eigen::VectorXd z_next = direction(next.d);

    // BB step in the preconditioned metric: s'y / y'P^{-1}y.
    const Eigen::VectorXd s = next.u - pt.u;
    const Eigen::VectorXd y = next.d - pt.d;
    const double sy = s.dot(y);
    const double yz = y.dot(z_next - z);
    if (sy > 0.0 && yz > 0.0) {
      tau = std::clamp(sy / yz, 1e-20, 1e20);
    } else {
      tau = std::min(tau / opts.armijo_shrink, 1e20);
    }

    pt = std::move(next);
    z = std::move(z_next);
    if (opts.positivity_projection && (it + 1) % kProjectionPeriod == 0) {
      if (project_positive(problem, pt)) z = direction(pt.d);
    }
    result.rayleigh_history.push_back(pt.R);

    const auto n = result.rayleigh_history.size();
    if (n > kStagnationWindow) {
      const double before = result.rayleigh_history[n - 1 - kStagnationWindow];
      if (before - pt.R <= opts.tol_stagnation * std::abs(pt.R)) {
        ++it;
        result.final_residual = pt.d.cwiseAbs().maxCoeff();
        result.stop = StopReason::Stagnated;
        break;
      }
    }
  }
  result.iterations = it;
  if (result.stop == StopReason::MaxIterations) result.final_residual = pt.d.cwiseAbs().maxCoeff();

  if (opts.positivity_projection && pt.u.minCoeff() < 0.0) {
    // Roundoff-level negatives left over after the last periodic projection.
    Eigen::VectorXd v = pt.u.cwiseMax(0.0);
    if (problem.p_mass(v) > 0.0) {
      normalize(problem, v);
      pt.u = std::move(v);
    }
  }
  const double m = problem.p_mass(pt.u);
  result.lambda = problem.energy(pt.u) / m;
  result.field.values = std::move(pt.u);
  result.converged = result.stop == StopReason::Converged || result.stop == StopReason::Stagnated;
  return result;
}

Preconditioner stiffness_preconditioner(const CylinderMesh& mesh, const CoefficientField& coeffs) {
  using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;
  auto factor = std::make_shared<Factor>(assemble_p2(mesh, coeffs).K);
  if (factor->info() != Eigen::Success) throw SolverError("stiffness factorization failed");
  return [factor](const Eigen::VectorXd& d) -> Eigen::VectorXd { return factor->solve(d); };
}

Eigen::VectorXd initial_guess(const CylinderMesh& mesh, const CrossSectionResult& cross,
                              InitKind kind, unsigned seed) {
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.free_dof_count());
  Eigen::VectorXd u(n);
  if (kind == InitKind::Ones) {
    u.setOnes();
    return u;
  }
  const Eigen::VectorXd nodal = lift_nodal(cross, mesh);
  const double ell = mesh.spec().ell;
  const double length = mesh.x1_end() - mesh.x1_begin();
  double phase = 0.0;
  if (kind == InitKind::PerturbedLift) {
    std::mt19937 gen(seed);
    phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(gen);
  }
  const auto& dofs = mesh.dof_nodes();
  for (Eigen::Index k = 0; k < n; ++k) {
    const int node = dofs[k];
    const int i = node / (mesh.n2() + 1);
    const double x1 = mesh.x1(i);
    double envelope = 1.0;
    if (mesh.spec().bc != BoundaryKind::Mixed) {
      envelope = std::cos(std::numbers::pi * x1 / (2.0 * ell));
    }
    if (kind == InitKind::PerturbedLift) {
      envelope *= 1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * (x1 - mesh.x1_begin()) / length + phase);
    }
    u[k] = envelope * nodal[node];
  }
  return u;
}

EigenResult minimize_rayleigh(const CylinderMesh& mesh, const CoefficientField& coeffs, double p,
                              const SolveOptions& opts, const CrossSectionResult& cross) {
  const CylinderEnergy model(mesh, coeffs, p);
  Preconditioner precond;
  if (opts.precondition) precond = stiffness_preconditioner(mesh, coeffs);
  EigenResult r =
      minimize_rayleigh(model, initial_guess(mesh, cross, opts.init, opts.seed), opts, precond);
  r.field.mesh_id = mesh.id();
  return r;
}

EigenResult minimize_rayleigh(const CylinderMesh& mesh, const CoefficientField& coeffs, double p,
                              const SolveOptions& opts) {
  const CrossSectionResult cross = cross_section_ground_state(mesh.n2(), coeffs, p, opts);
  return minimize_rayleigh(mesh, coeffs, p, opts, cross);
}

// ---------------------------------------------------------------------------
// Cross-section ground state

CrossSectionResult cross_section_ground_state(int nx2, const CoefficientField& coeffs, double p,
                                              const SolveOptions& opts) {
  if (nx2 < 8) throw ConfigError("cross-section needs nx2 >= 8");
  check_exponent(p);
  SolveOptions o = opts;
  o.tol_residual = std::min(opts.tol_residual, 1e-12);
  o.tol_stagnation = std::min(opts.tol_stagnation, 1e-15);
  o.positivity_projection = true;

  Eigen::VectorXd init(nx2 - 1);
  for (int k = 0; k < nx2 - 1; ++k) {
    init[k] = std::cos(std::numbers::pi * (-0.5 + (k + 1.0) / nx2));
  }

  const CrossSectionEnergy problem(nx2, coeffs, p);
  const EigenResult r = minimize_rayleigh(problem, init, o);

  CrossSectionResult out;
  out.p = p;
  out.nx2 = nx2;
  out.mu1 = r.lambda;
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.W = Eigen::VectorXd::Zero(nx2 + 1);
  out.W.segment(1, nx2 - 1) = r.field.values;
  const int nq = default_quadrature().points_per_dir;
  out.W_prime.resize(static_cast<std::size_t>(nx2) * nq);
  for (int j = 0; j < nx2; ++j) {
    for (int b = 0; b < nq; ++b) out.W_prime[j * nq + b] = (out.W[j + 1] - out.W[j]) * nx2;
  }

  bool unit_a22 = true;
  for (int j = 0; j < nx2 && unit_a22; ++j) {
    for (int b = 0; b < nq; ++b) {
      if (coeffs.at(-0.5 + (j + default_quadrature().abscissae[b]) / nx2).a22 != 1.0) {
        unit_a22 = false;
        break;
      }
    }
  }
  double mu_unit = out.mu1;
  if (!unit_a22) {
    const CrossSectionEnergy plain(nx2, p);
    mu_unit = minimize_rayleigh(plain, init, o).lambda;
  }
  out.poincare_cp = std::pow(mu_unit, -1.0 / p);
  return out;
}

// ---------------------------------------------------------------------------
// Half cylinders

EigenResult half_cylinder_eigen(Side side, double ell, const Resolution& resolution,
                                const CoefficientField& coeffs, double p, const SolveOptions& opts,
                                const CrossSectionResult& cross) {
  DomainSpec spec;
  spec.shape = side == Side::Plus ? Shape::HalfPlus : Shape::HalfMinus;
  spec.ell = ell;
  spec.bc = BoundaryKind::HalfCylinder;
  spec.cells_per_unit = resolution.cells_per_unit;
  spec.nx2 = resolution.nx2;
  const CylinderMesh mesh(spec);
  return minimize_rayleigh(mesh, coeffs, p, opts, cross);
}

EigenResult half_cylinder_eigen(Side side, double ell, const Resolution& resolution,
                                const CoefficientField& coeffs, double p, const SolveOptions& opts) {
  const CrossSectionResult cross = cross_section_ground_state(resolution.nx2, coeffs, p, opts);
  return half_cylinder_eigen(side, ell, resolution, coeffs, p, opts, cross);
}

// ---------------------------------------------------------------------------
// Linear spectrum (p = 2)

namespace {

// M-orthonormalizes the columns of Y in place (Cholesky QR, repeated once).
void m_orthonormalize(Eigen::MatrixXd& Y, const Eigen::SparseMatrix<double>& M) {
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::MatrixXd G = Y.transpose() * (M * Y);
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (G + G.transpose()));
    if (llt.info() != Eigen::Success) throw SolverError("block lost rank during inverse iteration");
    const Eigen::MatrixXd L = llt.matrixL();
    Y = L.triangularView<Eigen::Lower>().solve(Y.transpose()).transpose();
  }
}

}  // namespace

std::vector<EigenResult> linear_spectrum(const CylinderMesh& mesh, const CoefficientField& coeffs,
                                         int k, const SolveOptions& opts) {
  opts.validate();
  const auto n = static_cast<Eigen::Index>(mesh.free_dof_count());
  if (k < 1 || k > n) throw ConfigError("linear_spectrum: k must lie in [1, free DOF count]");
  const SparsePair pair = assemble_p2(mesh, coeffs);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(pair.K);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "factorization of the stiffness matrix failed (n = " << n << ")";
    throw SolverError(os.str());
  }

  const Eigen::Index q = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * k, k + 6));
  Eigen::MatrixXd X(n, q);
  {
    std::mt19937 gen(opts.seed + 7919u);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (Eigen::Index c = 0; c < q; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) X(r, c) = dist(gen);
    }
  }
  m_orthonormalize(X, pair.M);

  const double target = 1e-3 * opts.tol_residual;
  const int max_iters = std::min(opts.max_iters, 20000);
  Eigen::VectorXd theta;
  Eigen::VectorXd residual(k);
  int it = 0;
  bool done = false;
  for (; it < max_iters && !done; ++it) {
    Eigen::MatrixXd Y(n, q);
    const Eigen::MatrixXd MX = pair.M * X;
    for (Eigen::Index c = 0; c < q; ++c) {
      Y.col(c) = solver.solve(MX.col(c));
      if (solver.info() != Eigen::Success) throw SolverError("inverse iteration solve failed");
    }
    m_orthonormalize(Y, pair.M);
    const Eigen::MatrixXd KY = pair.K * Y;
    Eigen::MatrixXd H = Y.transpose() * KY;
    H = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    if (eig.info() != Eigen::Success) throw SolverError("Rayleigh-Ritz eigensolve failed");
    theta = eig.eigenvalues();
    X = Y * eig.eigenvectors();

    done = true;
    for (int i = 0; i < k; ++i) {
      const Eigen::VectorXd x = X.col(i);
      const Eigen::VectorXd r = pair.K * x - theta[i] * (pair.M * x);
      residual[i] = r.norm() / x.norm();
      if (residual[i] > target * std::max(1.0, std::abs(theta[i]))) done = false;
    }
  }

  std::vector<EigenResult> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    EigenResult r;
    Eigen::VectorXd x = X.col(i);
    double s = x.sum();
    if (std::abs(s) < 1e-8 * x.cwiseAbs().sum()) {
      Eigen::Index idx = 0;
      x.cwiseAbs().maxCoeff(&idx);
      s = x[idx];
    }
    if (s < 0.0) x = -x;
    r.lambda = x.dot(pair.K * x) / x.dot(pair.M * x);
    r.field = {std::move(x), mesh.id()};
    r.iterations = it;
    r.final_residual = residual[i];
    r.rayleigh_history = {r.lambda};
    r.converged = residual[i] <= opts.tol_residual;
    r.stop = r.converged ? StopReason::Converged : StopReason::MaxIterations;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cylspectra
