#include "cylspectra/discretization.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "cylspectra/eigensolve.hpp"
#include "cylspectra/errors.hpp"
#include "kernels.hpp"

namespace cylspectra {

QuadratureRule QuadratureRule::gauss(int points_per_dir) {
  QuadratureRule q;
  q.points_per_dir = points_per_dir;
  if (points_per_dir == 2) {
    const double d = 0.5 / std::sqrt(3.0);
    q.abscissae = {0.5 - d, 0.5 + d};
    q.weights = {0.5, 0.5};
  } else if (points_per_dir == 3) {
    const double d = 0.5 * std::sqrt(0.6);
    q.abscissae = {0.5 - d, 0.5, 0.5 + d};
    q.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  } else {
    throw ConfigError("quadrature supports 2 or 3 points per direction");
  }
  return q;
}

const QuadratureRule& default_quadrature() {
  static const QuadratureRule rule = QuadratureRule::gauss(3);
  return rule;
}

void check_exponent(double p) {
  if (!(p >= 2.0) || !std::isfinite(p)) {
    std::ostringstream os;
    os << "exponent p = " << p << " is unsupported (need p >= 2)";
    throw UnsupportedExponentError(os.str());
  }
}

void check_field(const CylinderMesh& mesh, const DiscreteField& u) {
  if (static_cast<std::size_t>(u.values.size()) != mesh.free_dof_count()) {
    std::ostringstream os;
    os << "field has " << u.values.size() << " values, mesh has " << mesh.free_dof_count()
       << " free DOFs";
    throw DimensionError(os.str());
  }
  if (u.mesh_id != 0 && u.mesh_id != mesh.id()) {
    throw DimensionError("field belongs to a different mesh");
  }
}

CylinderEnergy::CylinderEnergy(const CylinderMesh& mesh, const CoefficientField& coeffs, double p,
                               const QuadratureRule& quad)
    : mesh_(&mesh), p_(p), quad_(quad) {
  check_exponent(p);
  const int nq = quad_.points_per_dir;
  table_.resize(static_cast<std::size_t>(mesh.n2()) * nq);
  for (int j = 0; j < mesh.n2(); ++j) {
    for (int b = 0; b < nq; ++b) {
      table_[j * nq + b] = coeffs.at(mesh.x2(j) + quad_.abscissae[b] * mesh.h2());
    }
  }
}

Eigen::VectorXd CylinderEnergy::expand(const Eigen::VectorXd& u) const {
  if (u.size() != size()) throw DimensionError("field size does not match mesh free DOFs");
  Eigen::VectorXd nodal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh_->node_count()));
  const auto& dofs = mesh_->dof_nodes();
  for (Eigen::Index k = 0; k < u.size(); ++k) nodal[dofs[k]] = u[k];
  return nodal;
}

namespace {

// Bilinear gradient at reference point (xi, eta) of a cell with nodal values
// u00 = (i, j), u10 = (i+1, j), u01 = (i, j+1), u11 = (i+1, j+1).
struct CellValues {
  double u00, u10, u01, u11;
};

inline double grad1(const CellValues& c, double eta, double h1) {
  return ((1.0 - eta) * (c.u10 - c.u00) + eta * (c.u11 - c.u01)) / h1;
}
inline double grad2(const CellValues& c, double xi, double h2) {
  return ((1.0 - xi) * (c.u01 - c.u00) + xi * (c.u11 - c.u10)) / h2;
}
inline double value(const CellValues& c, double xi, double eta) {
  return (1.0 - xi) * (1.0 - eta) * c.u00 + xi * (1.0 - eta) * c.u10 + (1.0 - xi) * eta * c.u01 +
         xi * eta * c.u11;
}

}  // namespace

template <bool WithGradient>
double CylinderEnergy::energy_impl(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const {
  const Eigen::VectorXd U = expand(u);
  Eigen::VectorXd G;
  if constexpr (WithGradient) G = Eigen::VectorXd::Zero(U.size());
  const int n1 = mesh_->n1();
  const int n2 = mesh_->n2();
  const double h1 = mesh_->h1();
  const double h2 = mesh_->h2();
  const int nq = quad_.points_per_dir;
  const detail::PowerHalf power(p_);
  double total = 0.0;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const auto nodes = mesh_->cell_nodes(i, j);
      const CellValues c{U[nodes[0]], U[nodes[1]], U[nodes[2]], U[nodes[3]]};
      double cell = 0.0;
      double d00 = 0.0, d10 = 0.0, d01 = 0.0, d11 = 0.0;
      for (int a = 0; a < nq; ++a) {
        const double xi = quad_.abscissae[a];
        for (int b = 0; b < nq; ++b) {
          const double eta = quad_.abscissae[b];
          const double w = quad_.weights[a] * quad_.weights[b] * h1 * h2;
          const MatrixEntries& A = table_[j * nq + b];
          const double g1 = grad1(c, eta, h1);
          const double g2 = grad2(c, xi, h2);
          const double f1 = A.a11 * g1 + A.a12 * g2;
          const double f2 = A.a12 * g1 + A.a22 * g2;
          const double q = std::abs(g1 * f1 + g2 * f2);
          const double r = power.reduced(q);  // q^{(p-2)/2}
          cell += w * r * q;
          if constexpr (WithGradient) {
            // d/dg |q|^{p/2} = p q^{(p-2)/2} A g on the nonnegative branch.
            const double s1 = w * p_ * r * f1 / h1;
            const double s2 = w * p_ * r * f2 / h2;
            d00 += -(1.0 - eta) * s1 - (1.0 - xi) * s2;
            d10 += (1.0 - eta) * s1 - xi * s2;
            d01 += -eta * s1 + (1.0 - xi) * s2;
            d11 += eta * s1 + xi * s2;
          }
        }
      }
      total += cell;
      if constexpr (WithGradient) {
        G[nodes[0]] += d00;
        G[nodes[1]] += d10;
        G[nodes[2]] += d01;
        G[nodes[3]] += d11;
      }
    }
  }
  if constexpr (WithGradient) {
    grad->resize(size());
    const auto& dofs = mesh_->dof_nodes();
    for (Eigen::Index k = 0; k < size(); ++k) (*grad)[k] = G[dofs[k]];
  }
  return total;
}

template <bool WithGradient>
double CylinderEnergy::mass_impl(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const {
  const Eigen::VectorXd U = expand(u);
  Eigen::VectorXd G;
  if constexpr (WithGradient) G = Eigen::VectorXd::Zero(U.size());
  const int n1 = mesh_->n1();
  const int n2 = mesh_->n2();
  const double area = mesh_->h1() * mesh_->h2();
  const int nq = quad_.points_per_dir;
  const detail::PowerAbs power(p_);
  double total = 0.0;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const auto nodes = mesh_->cell_nodes(i, j);
      const CellValues c{U[nodes[0]], U[nodes[1]], U[nodes[2]], U[nodes[3]]};
      double cell = 0.0;
      double d00 = 0.0, d10 = 0.0, d01 = 0.0, d11 = 0.0;
      for (int a = 0; a < nq; ++a) {
        const double xi = quad_.abscissae[a];
        for (int b = 0; b < nq; ++b) {
          const double eta = quad_.abscissae[b];
          const double w = quad_.weights[a] * quad_.weights[b] * area;
          const double v = value(c, xi, eta);
          const double r = power.reduced(v);  // |v|^{p-2}
          cell += w * r * v * v;
          if constexpr (WithGradient) {
            const double s = w * p_ * r * v;
            d00 += (1.0 - xi) * (1.0 - eta) * s;
            d10 += xi * (1.0 - eta) * s;
            d01 += (1.0 - xi) * eta * s;
            d11 += xi * eta * s;
          }
        }
      }
      total += cell;
      if constexpr (WithGradient) {
        G[nodes[0]] += d00;
        G[nodes[1]] += d10;
        G[nodes[2]] += d01;
        G[nodes[3]] += d11;
      }
    }
  }
  if constexpr (WithGradient) {
    grad->resize(size());
    const auto& dofs = mesh_->dof_nodes();
    for (Eigen::Index k = 0; k < size(); ++k) (*grad)[k] = G[dofs[k]];
  }
  return total;
}

double CylinderEnergy::energy(const Eigen::VectorXd& u) const { return energy_impl<false>(u, nullptr); }

double CylinderEnergy::energy_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
  return energy_impl<true>(u, &grad);
}

double CylinderEnergy::p_mass(const Eigen::VectorXd& u) const { return mass_impl<false>(u, nullptr); }

double CylinderEnergy::p_mass_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
  return mass_impl<true>(u, &grad);
}

ColumnIntegrals CylinderEnergy::column_integrals_nodal(const Eigen::VectorXd& U) const {
  if (static_cast<std::size_t>(U.size()) != mesh_->node_count()) {
    throw DimensionError("nodal vector size does not match mesh node count");
  }
  const int n1 = mesh_->n1();
  const int n2 = mesh_->n2();
  const double h1 = mesh_->h1();
  const double h2 = mesh_->h2();
  const int nq = quad_.points_per_dir;
  const detail::PowerHalf half_power(p_);
  const detail::PowerAbs abs_power(p_);
  ColumnIntegrals out;
  out.energy.assign(n1, 0.0);
  out.grad_p.assign(n1, 0.0);
  out.p_mass.assign(n1, 0.0);
  for (int i = 0; i < n1; ++i) {
    double e = 0.0, g = 0.0, m = 0.0;
    for (int j = 0; j < n2; ++j) {
      const auto nodes = mesh_->cell_nodes(i, j);
      const CellValues c{U[nodes[0]], U[nodes[1]], U[nodes[2]], U[nodes[3]]};
      for (int a = 0; a < nq; ++a) {
        const double xi = quad_.abscissae[a];
        for (int b = 0; b < nq; ++b) {
          const double eta = quad_.abscissae[b];
          const double w = quad_.weights[a] * quad_.weights[b] * h1 * h2;
          const MatrixEntries& A = table_[j * nq + b];
          const double g1 = grad1(c, eta, h1);
          const double g2 = grad2(c, xi, h2);
          const double q = std::abs(A.a11 * g1 * g1 + 2.0 * A.a12 * g1 * g2 + A.a22 * g2 * g2);
          e += w * half_power.reduced(q) * q;
          const double s = g1 * g1 + g2 * g2;
          g += w * half_power.reduced(s) * s;
          const double v = value(c, xi, eta);
          m += w * abs_power.reduced(v) * v * v;
        }
      }
    }
    out.energy[i] = e;
    out.grad_p[i] = g;
    out.p_mass[i] = m;
  }
  return out;
}

ColumnIntegrals CylinderEnergy::column_integrals(const Eigen::VectorXd& u) const {
  return column_integrals_nodal(expand(u));
}

double CylinderEnergy::gradient_p_norm(const Eigen::VectorXd& u) const {
  const ColumnIntegrals cols = column_integrals(u);
  double total = 0.0;
  for (double v : cols.grad_p) total += v;
  return total;
}

double energy(const CylinderMesh& mesh, const CoefficientField& coeffs, const DiscreteField& u,
              double p, const QuadratureRule& quad) {
  check_field(mesh, u);
  return CylinderEnergy(mesh, coeffs, p, quad).energy(u.values);
}

DiscreteField energy_gradient(const CylinderMesh& mesh, const CoefficientField& coeffs,
                              const DiscreteField& u, double p, const QuadratureRule& quad) {
  check_field(mesh, u);
  DiscreteField g{Eigen::VectorXd(), mesh.id()};
  CylinderEnergy(mesh, coeffs, p, quad).energy_gradient(u.values, g.values);
  return g;
}

MassValue p_mass(const CylinderMesh& mesh, const DiscreteField& u, double p,
                 const QuadratureRule& quad) {
  check_field(mesh, u);
  // The mass does not involve A; any field serves for the tabulation.
  static const CoefficientField identity = make_coefficients(CoefficientFamily::identity());
  MassValue out;
  out.gradient.mesh_id = mesh.id();
  out.value = CylinderEnergy(mesh, identity, p, quad).p_mass_gradient(u.values, out.gradient.values);
  return out;
}

double rayleigh(const CylinderMesh& mesh, const CoefficientField& coeffs, const DiscreteField& u,
                double p, const QuadratureRule& quad) {
  check_field(mesh, u);
  const CylinderEnergy model(mesh, coeffs, p, quad);
  const double m = model.p_mass(u.values);
  if (!(m > 0.0)) throw UndefinedQuotientError("Rayleigh quotient of the zero field");
  return model.energy(u.values) / m;
}

SparsePair assemble_p2(const CylinderMesh& mesh, const CoefficientField& coeffs,
                       const QuadratureRule& quad) {
  const int n1 = mesh.n1();
  const int n2 = mesh.n2();
  const double h1 = mesh.h1();
  const double h2 = mesh.h2();
  const int nq = quad.points_per_dir;
  const auto& dof = mesh.free_dof_map();

  // Local order: 00, 10, 01, 11 as in CylinderMesh::cell_nodes.
  const double sx[4] = {0.0, 1.0, 0.0, 1.0};
  const double sy[4] = {0.0, 0.0, 1.0, 1.0};

  std::vector<Eigen::Triplet<double>> kt;
  std::vector<Eigen::Triplet<double>> mt;
  kt.reserve(mesh.cell_count() * 16);
  mt.reserve(mesh.cell_count() * 16);

  // Element matrices depend on the cross row j only.
  for (int j = 0; j < n2; ++j) {
    double ke[4][4] = {};
    double me[4][4] = {};
    for (int a = 0; a < nq; ++a) {
      const double xi = quad.abscissae[a];
      for (int b = 0; b < nq; ++b) {
        const double eta = quad.abscissae[b];
        const double w = quad.weights[a] * quad.weights[b] * h1 * h2;
        const MatrixEntries A = coeffs.at(mesh.x2(j) + eta * h2);
        double N[4], Nx[4], Ny[4];
        for (int k = 0; k < 4; ++k) {
          const double fx = sx[k] > 0.5 ? xi : 1.0 - xi;
          const double fy = sy[k] > 0.5 ? eta : 1.0 - eta;
          N[k] = fx * fy;
          Nx[k] = (sx[k] > 0.5 ? 1.0 : -1.0) * fy / h1;
          Ny[k] = (sy[k] > 0.5 ? 1.0 : -1.0) * fx / h2;
        }
        for (int k = 0; k < 4; ++k) {
          for (int l = 0; l < 4; ++l) {
            ke[k][l] += w * (A.a11 * Nx[k] * Nx[l] + A.a12 * (Nx[k] * Ny[l] + Ny[k] * Nx[l]) +
                             A.a22 * Ny[k] * Ny[l]);
            me[k][l] += w * N[k] * N[l];
          }
        }
      }
    }
    for (int i = 0; i < n1; ++i) {
      const auto nodes = mesh.cell_nodes(i, j);
      for (int k = 0; k < 4; ++k) {
        const int r = dof[nodes[k]];
        if (r < 0) continue;
        for (int l = 0; l < 4; ++l) {
          const int c = dof[nodes[l]];
          if (c < 0) continue;
          kt.emplace_back(r, c, ke[k][l]);
          mt.emplace_back(r, c, me[k][l]);
        }
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(mesh.free_dof_count());
  SparsePair out;
  out.K.resize(n, n);
  out.M.resize(n, n);
  out.K.setFromTriplets(kt.begin(), kt.end());
  out.M.setFromTriplets(mt.begin(), mt.end());
  return out;
}

Eigen::VectorXd lift_nodal(const CrossSectionResult& cross, const CylinderMesh& mesh) {
  if (cross.nx2 != mesh.n2()) {
    std::ostringstream os;
    os << "cross-section has " << cross.nx2 << " cells, mesh has " << mesh.n2();
    throw DimensionError(os.str());
  }
  Eigen::VectorXd nodal(static_cast<Eigen::Index>(mesh.node_count()));
  for (int i = 0; i <= mesh.n1(); ++i) {
    for (int j = 0; j <= mesh.n2(); ++j) nodal[mesh.node(i, j)] = cross.W[j];
  }
  return nodal;
}

DiscreteField lift_cross_section(const CrossSectionResult& cross, const CylinderMesh& mesh) {
  if (mesh.spec().bc != BoundaryKind::Mixed) {
    throw AdmissibilityError(std::string("lifted cross-section state violates the ") +
                             to_string(mesh.spec().bc) + " end conditions");
  }
  const Eigen::VectorXd nodal = lift_nodal(cross, mesh);
  DiscreteField u = DiscreteField::zeros(mesh);
  const auto& dofs = mesh.dof_nodes();
  for (Eigen::Index k = 0; k < u.values.size(); ++k) u.values[k] = nodal[dofs[k]];
  const double m = p_mass(mesh, u, cross.p).value;
  u.values /= std::pow(m, 1.0 / cross.p);
  return u;
}

}  // namespace cylspectra
