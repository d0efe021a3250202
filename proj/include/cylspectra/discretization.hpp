#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <vector>

#include "cylspectra/coeffs.hpp"
#include "cylspectra/mesh.hpp"

namespace cylspectra {

struct CrossSectionResult;

/// Nodal coefficients of a Q1 function over the free DOFs of one mesh.
/// Constrained (Dirichlet) nodes are implicitly zero.
struct DiscreteField {
  Eigen::VectorXd values;
  std::size_t mesh_id = 0;

  static DiscreteField zeros(const CylinderMesh& mesh) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.free_dof_count())), mesh.id()};
  }
};

/// Tensor Gauss-Legendre rule on the reference interval [0, 1].
struct QuadratureRule {
  int points_per_dir = 3;
  std::vector<double> abscissae;
  std::vector<double> weights;

  /// 2 or 3 points per direction; anything else is a ConfigError.
  static QuadratureRule gauss(int points_per_dir);
};

/// The rule used throughout: 3x3 Gauss per cell.
const QuadratureRule& default_quadrature();

/// Objective pieces of a discrete Rayleigh quotient E(u) / m(u), shared by
/// the 2D cylinder problems and the 1D cross-section problem.
class RayleighProblem {
 public:
  virtual ~RayleighProblem() = default;
  virtual Eigen::Index size() const = 0;
  virtual double p() const = 0;
  virtual double energy(const Eigen::VectorXd& u) const = 0;
  /// Writes dE/du into `grad` and returns E(u).
  virtual double energy_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const = 0;
  virtual double p_mass(const Eigen::VectorXd& u) const = 0;
  /// Writes dm/du into `grad` and returns m(u).
  virtual double p_mass_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const = 0;
};

/// Per axial cell column: integrals summed over the cross-section.
struct ColumnIntegrals {
  std::vector<double> energy;     // int |A grad u . grad u|^{p/2}
  std::vector<double> grad_p;     // int |grad u|^p
  std::vector<double> p_mass;     // int |u|^p
};

/// Quadrature sums of the generalized p-Laplacian energy and the p-mass on a
/// cylinder mesh. Coefficients are tabulated at the cross-section quadrature
/// abscissae on construction; the mesh and field are referenced, not copied.
///
/// Gradients are exact derivatives of the quadrature sums.
class CylinderEnergy final : public RayleighProblem {
 public:
  CylinderEnergy(const CylinderMesh& mesh, const CoefficientField& coeffs, double p,
                 const QuadratureRule& quad = default_quadrature());

  Eigen::Index size() const override { return static_cast<Eigen::Index>(mesh_->free_dof_count()); }
  double p() const override { return p_; }
  double energy(const Eigen::VectorXd& u) const override;
  double energy_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const override;
  double p_mass(const Eigen::VectorXd& u) const override;
  double p_mass_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const override;

  /// int |grad u|^p with the plain Euclidean gradient.
  double gradient_p_norm(const Eigen::VectorXd& u) const;

  /// Column sums from a full nodal vector (constrained nodes may be nonzero).
  ColumnIntegrals column_integrals_nodal(const Eigen::VectorXd& nodal) const;
  ColumnIntegrals column_integrals(const Eigen::VectorXd& u) const;

  const CylinderMesh& mesh() const { return *mesh_; }
  const QuadratureRule& quadrature() const { return quad_; }
  /// Coefficient entries at cross row j and quadrature point b.
  const MatrixEntries& coefficient(int j, int b) const { return table_[j * quad_.points_per_dir + b]; }

  Eigen::VectorXd expand(const Eigen::VectorXd& u) const;

 private:
  template <bool WithGradient>
  double energy_impl(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const;
  template <bool WithGradient>
  double mass_impl(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const;

  const CylinderMesh* mesh_;
  double p_;
  QuadratureRule quad_;
  std::vector<MatrixEntries> table_;
};

/// Symmetric stiffness and mass matrices of the p = 2 problem over free DOFs.
struct SparsePair {
  Eigen::SparseMatrix<double> K;
  Eigen::SparseMatrix<double> M;
};

void check_exponent(double p);
void check_field(const CylinderMesh& mesh, const DiscreteField& u);

double energy(const CylinderMesh& mesh, const CoefficientField& coeffs, const DiscreteField& u,
              double p, const QuadratureRule& quad = default_quadrature());

DiscreteField energy_gradient(const CylinderMesh& mesh, const CoefficientField& coeffs,
                              const DiscreteField& u, double p,
                              const QuadratureRule& quad = default_quadrature());

struct MassValue {
  double value = 0.0;
  DiscreteField gradient;
};

MassValue p_mass(const CylinderMesh& mesh, const DiscreteField& u, double p,
                 const QuadratureRule& quad = default_quadrature());

/// energy / p_mass; throws UndefinedQuotientError for the zero field.
double rayleigh(const CylinderMesh& mesh, const CoefficientField& coeffs, const DiscreteField& u,
                double p, const QuadratureRule& quad = default_quadrature());

SparsePair assemble_p2(const CylinderMesh& mesh, const CoefficientField& coeffs,
                       const QuadratureRule& quad = default_quadrature());

/// u(x1, x2) = W(x2) on a Mixed mesh, renormalized to unit p-mass.
/// Throws AdmissibilityError for other boundary kinds and DimensionError when
/// the cross-section resolution differs from the mesh.
DiscreteField lift_cross_section(const CrossSectionResult& cross, const CylinderMesh& mesh);

/// W(x2) on every axial station, without the admissibility check and without
/// renormalization (reference function for Picone residuals).
Eigen::VectorXd lift_nodal(const CrossSectionResult& cross, const CylinderMesh& mesh);

}  // namespace cylspectra
