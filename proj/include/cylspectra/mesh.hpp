#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace cylspectra {

enum class Shape { FullCylinder, HalfPlus, HalfMinus, CrossSection };
enum class BoundaryKind { Mixed, DirichletAll, HalfCylinder };

/// Geometry and boundary-condition request for one discretized domain.
///
/// The cross-section is always omega = (-1/2, 1/2). `ell` is the half-length
/// of a full cylinder (-ell, ell) x omega, or the length of a half cylinder
/// (0, ell) x omega / (-ell, 0) x omega.
struct DomainSpec {
  Shape shape = Shape::FullCylinder;
  double ell = 1.0;
  BoundaryKind bc = BoundaryKind::Mixed;
  int cells_per_unit = 8;
  int nx2 = 64;
};

/// Per-direction grid resolution shared by all meshes in one experiment.
struct Resolution {
  int nx2 = 64;
  int cells_per_unit = 8;
};

/// Uniform tensor-product Q1 mesh of a (half-)cylinder.
///
/// Nodes are numbered axially-major: node(i, j) = i * (n2 + 1) + j, where
/// i = 0..n1 runs along x1 and j = 0..n2 along x2. Cell (i, j) spans nodes
/// (i, j), (i+1, j), (i, j+1), (i+1, j+1). Immutable after construction.
class CylinderMesh {
 public:
  explicit CylinderMesh(const DomainSpec& spec);

  const DomainSpec& spec() const { return spec_; }

  int n1() const { return n1_; }  // axial cell count
  int n2() const { return n2_; }  // cross-section cell count
  double h1() const { return h1_; }
  double h2() const { return h2_; }
  double x1_begin() const { return x1_begin_; }
  double x1_end() const { return x1_begin_ + n1_ * h1_; }

  std::size_t node_count() const { return static_cast<std::size_t>(n1_ + 1) * (n2_ + 1); }
  std::size_t cell_count() const { return static_cast<std::size_t>(n1_) * n2_; }
  std::size_t free_dof_count() const { return free_count_; }

  int node(int i, int j) const { return i * (n2_ + 1) + j; }
  double x1(int i) const { return x1_begin_ + i * h1_; }
  static double x2_begin() { return -0.5; }
  double x2(int j) const { return -0.5 + j * h2_; }

  /// Node indices of cell (i, j) in the order (i,j), (i+1,j), (i,j+1), (i+1,j+1).
  std::array<int, 4> cell_nodes(int i, int j) const;

  const std::vector<bool>& dirichlet_mask() const { return dirichlet_mask_; }
  /// node -> DOF index, or -1 for constrained nodes.
  const std::vector<int>& free_dof_map() const { return free_dof_map_; }
  /// DOF -> node index.
  const std::vector<int>& dof_nodes() const { return dof_nodes_; }

  /// Sorted axial breakpoints at unit spacing, anchored at both ends.
  const std::vector<double>& slab_edges() const { return slab_edges_; }
  /// Axial node index of each slab edge.
  const std::vector<int>& slab_edge_nodes() const { return slab_edge_nodes_; }

  /// Unique id, used to check that fields belong to this mesh.
  std::size_t id() const { return id_; }

 private:
  DomainSpec spec_;
  int n1_ = 0;
  int n2_ = 0;
  double h1_ = 0.0;
  double h2_ = 0.0;
  double x1_begin_ = 0.0;
  std::vector<bool> dirichlet_mask_;
  std::vector<int> free_dof_map_;
  std::vector<int> dof_nodes_;
  std::size_t free_count_ = 0;
  std::vector<double> slab_edges_;
  std::vector<int> slab_edge_nodes_;
  std::size_t id_ = 0;
};

/// Validates `spec` and builds the mesh; throws ConfigError on inconsistent
/// shape/bc combinations or out-of-range resolution.
CylinderMesh build_mesh(const DomainSpec& spec);

/// Validation without construction.
void validate(const DomainSpec& spec);

const char* to_string(Shape shape);
const char* to_string(BoundaryKind bc);

}  // namespace cylspectra
