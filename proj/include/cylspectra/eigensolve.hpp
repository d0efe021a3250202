#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "cylspectra/coeffs.hpp"
#include "cylspectra/discretization.hpp"
#include "cylspectra/mesh.hpp"

namespace cylspectra {

enum class InitKind { LiftedW, PerturbedLift, Ones };

struct SolveOptions {
  double tol_residual = 1e-8;
  double tol_stagnation = 1e-12;
  int max_iters = 50000;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  InitKind init = InitKind::LiftedW;
  bool positivity_projection = true;
  /// Precondition the descent direction with the p = 2 stiffness matrix of
  /// the same coefficients (cylinder problems only).
  bool precondition = true;
  /// Seed for the PerturbedLift phase.
  unsigned seed = 0;

  /// Throws ConfigError when a tolerance or Armijo parameter is out of range.
  void validate() const;
};

enum class StopReason { Converged, Stagnated, LineSearchFailed, MaxIterations };

const char* to_string(StopReason reason);

struct EigenResult {
  double lambda = 0.0;
  DiscreteField field;
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<double> rayleigh_history;
  bool converged = false;
  StopReason stop = StopReason::MaxIterations;
};

/// First eigenpair of the cross-section problem on omega = (-1/2, 1/2)
/// with Dirichlet ends, discretized with P1 elements on nx2 cells.
struct CrossSectionResult {
  double p = 2.0;
  int nx2 = 0;
  double mu1 = 0.0;
  /// Nodal values at x2_j = -1/2 + j / nx2, j = 0..nx2 (ends are zero).
  Eigen::VectorXd W;
  /// W' at the cross quadrature points, cell-major: index j * q + b.
  std::vector<double> W_prime;
  /// Poincare constant mu1(omega; a22 = 1, p)^(-1/p).
  double poincare_cp = 0.0;
  int iterations = 0;
  bool converged = false;

  double h() const { return 1.0 / nx2; }
  /// Piecewise-linear W at x2.
  double W_at(double x2) const;
  /// W' on the cell containing x2.
  double W_prime_at(double x2) const;
};

/// The 1D cross-section functional: int |a22 W'^2|^{p/2} over int |W|^p.
class CrossSectionEnergy final : public RayleighProblem {
 public:
  CrossSectionEnergy(int nx2, const CoefficientField& coeffs, double p,
                     const QuadratureRule& quad = default_quadrature());
  /// Variant with a22 = 1 (used for the Poincare constant).
  CrossSectionEnergy(int nx2, double p, const QuadratureRule& quad = default_quadrature());

  Eigen::Index size() const override { return nx2_ - 1; }
  double p() const override { return p_; }
  double energy(const Eigen::VectorXd& u) const override;
  double energy_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const override;
  double p_mass(const Eigen::VectorXd& u) const override;
  double p_mass_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const override;

 private:
  int nx2_;
  double p_;
  QuadratureRule quad_;
  std::vector<double> a22_;
};

/// Maps a residual d to a search direction; must be symmetric positive definite.
using Preconditioner = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Normalized projected gradient descent on the Rayleigh quotient of an
/// arbitrary discrete problem, starting from `initial`. With an empty
/// `precond` the search direction is the residual itself.
EigenResult minimize_rayleigh(const RayleighProblem& problem, Eigen::VectorXd initial,
                              const SolveOptions& opts, const Preconditioner& precond = {});

/// Solver for the stiffness matrix of the p = 2 problem on `mesh`.
Preconditioner stiffness_preconditioner(const CylinderMesh& mesh, const CoefficientField& coeffs);

/// First eigenpair of the generalized p-Laplacian on `mesh` (boundary
/// conditions per mesh tags). Computes the cross-section state for the
/// initial guess.
EigenResult minimize_rayleigh(const CylinderMesh& mesh, const CoefficientField& coeffs, double p,
                              const SolveOptions& opts);

/// Same, reusing an already computed cross-section ground state.
EigenResult minimize_rayleigh(const CylinderMesh& mesh, const CoefficientField& coeffs, double p,
                              const SolveOptions& opts, const CrossSectionResult& cross);

/// Initial guess on `mesh` of the requested kind: W(x2) times an axial
/// envelope that satisfies the mesh's end conditions.
Eigen::VectorXd initial_guess(const CylinderMesh& mesh, const CrossSectionResult& cross,
                              InitKind kind, unsigned seed);

/// The k smallest eigenpairs of the p = 2 problem (K, M) by block inverse
/// iteration with M-orthonormalization and Rayleigh-Ritz. Eigenvalues come
/// out nondecreasing and eigenvectors M-orthonormal.
std::vector<EigenResult> linear_spectrum(const CylinderMesh& mesh, const CoefficientField& coeffs,
                                         int k, const SolveOptions& opts);

CrossSectionResult cross_section_ground_state(int nx2, const CoefficientField& coeffs, double p,
                                              const SolveOptions& opts = {});

enum class Side { Plus, Minus };

const char* to_string(Side side);

/// First eigenvalue of the half cylinder (0, ell) x omega (Plus) or
/// (-ell, 0) x omega (Minus): Dirichlet on the lateral side and the far end,
/// natural at x1 = 0.
EigenResult half_cylinder_eigen(Side side, double ell, const Resolution& resolution,
                                const CoefficientField& coeffs, double p, const SolveOptions& opts);

EigenResult half_cylinder_eigen(Side side, double ell, const Resolution& resolution,
                                const CoefficientField& coeffs, double p, const SolveOptions& opts,
                                const CrossSectionResult& cross);

}  // namespace cylspectra
