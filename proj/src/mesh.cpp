#include "cylspectra/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "cylspectra/errors.hpp"

namespace cylspectra {

namespace {

std::atomic<std::size_t> g_next_mesh_id{1};

// Number of cells covering `length` at `per_unit` cells per unit; the product
// must be an integer so that unit slabs fall on grid lines.
int axial_cells(double length, int per_unit) {
  const double exact = length * per_unit;
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact) || rounded < 1.0) {
    throw ConfigError("axial length " + std::to_string(length) + " times cells_per_unit " +
                      std::to_string(per_unit) + " must be a positive integer");
  }
  return static_cast<int>(rounded);
}

}  // namespace

const char* to_string(Shape shape) {
  switch (shape) {
    case Shape::FullCylinder: return "FullCylinder";
    case Shape::HalfPlus: return "HalfPlus";
    case Shape::HalfMinus: return "HalfMinus";
    case Shape::CrossSection: return "CrossSection";
  }
  return "?";
}

const char* to_string(BoundaryKind bc) {
  switch (bc) {
    case BoundaryKind::Mixed: return "Mixed";
    case BoundaryKind::DirichletAll: return "DirichletAll";
    case BoundaryKind::HalfCylinder: return "HalfCylinder";
  }
  return "?";
}

void validate(const DomainSpec& spec) {
  if (spec.shape == Shape::CrossSection) {
    throw ConfigError("CrossSection domains are one-dimensional; use cross_section_ground_state");
  }
  if (!(spec.ell > 0.0) || !std::isfinite(spec.ell)) {
    throw ConfigError("ell must be positive for cylinder shapes");
  }
  const bool half = spec.shape == Shape::HalfPlus || spec.shape == Shape::HalfMinus;
  if (half && spec.bc != BoundaryKind::HalfCylinder) {
    throw ConfigError(std::string("shape ") + to_string(spec.shape) +
                      " requires bc HalfCylinder, got " + to_string(spec.bc));
  }
  if (!half && spec.bc == BoundaryKind::HalfCylinder) {
    throw ConfigError("bc HalfCylinder is only valid on HalfPlus/HalfMinus shapes");
  }
  if (spec.cells_per_unit < 2) throw ConfigError("cells_per_unit must be >= 2");
  if (spec.nx2 < 4) throw ConfigError("nx2 must be >= 4");
  axial_cells(half ? spec.ell : 2.0 * spec.ell, spec.cells_per_unit);
}

CylinderMesh build_mesh(const DomainSpec& spec) { return CylinderMesh(spec); }

CylinderMesh::CylinderMesh(const DomainSpec& spec) : spec_(spec) {
  validate(spec);
  const bool half = spec.shape == Shape::HalfPlus || spec.shape == Shape::HalfMinus;
  const double length = half ? spec.ell : 2.0 * spec.ell;
  n1_ = axial_cells(length, spec.cells_per_unit);
  n2_ = spec.nx2;
  h1_ = length / n1_;
  h2_ = 1.0 / n2_;
  switch (spec.shape) {
    case Shape::FullCylinder: x1_begin_ = -spec.ell; break;
    case Shape::HalfPlus: x1_begin_ = 0.0; break;
    case Shape::HalfMinus: x1_begin_ = -spec.ell; break;
    case Shape::CrossSection: break;
  }

  dirichlet_mask_.assign(node_count(), false);
  for (int i = 0; i <= n1_; ++i) {
    for (int j = 0; j <= n2_; ++j) {
      bool masked = (j == 0 || j == n2_);  // lateral boundary gamma
      switch (spec.bc) {
        case BoundaryKind::Mixed: break;
        case BoundaryKind::DirichletAll: masked = masked || i == 0 || i == n1_; break;
        case BoundaryKind::HalfCylinder:
          // Far end {+ell} for HalfPlus, {-ell} for HalfMinus; the end at 0 stays natural.
          masked = masked || (spec.shape == Shape::HalfPlus ? i == n1_ : i == 0);
          break;
      }
      dirichlet_mask_[node(i, j)] = masked;
    }
  }

  free_dof_map_.assign(node_count(), -1);
  for (std::size_t n = 0; n < node_count(); ++n) {
    if (!dirichlet_mask_[n]) {
      free_dof_map_[n] = static_cast<int>(dof_nodes_.size());
      dof_nodes_.push_back(static_cast<int>(n));
    }
  }
  free_count_ = dof_nodes_.size();

  // Unit slabs measured from each end; they meet in the middle when the
  // length is not an integer.
  std::vector<int> edge_nodes;
  const int per_unit = spec.cells_per_unit;
  for (int i = 0; i <= n1_; i += per_unit) edge_nodes.push_back(i);
  for (int i = n1_; i >= 0; i -= per_unit) edge_nodes.push_back(i);
  std::sort(edge_nodes.begin(), edge_nodes.end());
  edge_nodes.erase(std::unique(edge_nodes.begin(), edge_nodes.end()), edge_nodes.end());
  slab_edge_nodes_ = edge_nodes;
  for (int i : edge_nodes) slab_edges_.push_back(x1(i));

  id_ = g_next_mesh_id.fetch_add(1);
}

std::array<int, 4> CylinderMesh::cell_nodes(int i, int j) const {
  return {node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)};
}

}  // namespace cylspectra
