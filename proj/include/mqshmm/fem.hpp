#pragma once
// P1 nodal finite elements for the out-of-plane potential a_z: element
// matrices, DOF maps with Dirichlet/periodic constraints, sparse assembly and
// direct/iterative linear solves.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <vector>

#include "mqshmm/mesh.hpp"

namespace mqshmm {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

using TrianglePoints = std::array<Point, 3>;
TrianglePoints triangle_points(const Mesh2D& mesh, int t);

// Constant P1 data of one triangle.
struct ElementGeometry {
  double area = 0.0;
  Mat23 grad;  // column i: grad(phi_i)
  // Column i: curl(phi_i e_z) = (d phi_i/dy, -d phi_i/dx).
  Mat23 curl() const;
};
ElementGeometry element_geometry(const TrianglePoints& tri);

// K_ij = int_T (coeff grad phi_i) . grad phi_j.
Mat3 element_stiffness(const TrianglePoints& tri, const Mat2& coeff);
// K_ij = int_T (D curl phi_j) . curl phi_i: the curl-curl form with tangent D.
Mat3 element_curlcurl(const TrianglePoints& tri, const Mat2& tangent);
// M = coeff (A/12) [[2,1,1],[1,2,1],[1,1,2]].
Mat3 element_mass(const TrianglePoints& tri, double coeff);

class DofMap {
 public:
  static DofMap all_free(int n_nodes);
  // Nodes on edges carrying any of `tags` are constrained to `value`.
  static DofMap dirichlet(const Mesh2D& mesh, const std::vector<BoundaryTag>& tags, double value = 0.0);

  int num_nodes() const { return static_cast<int>(node_dof_.size()); }
  int n_free() const { return n_free_; }
  int dof(int node) const { return node_dof_[static_cast<size_t>(node)]; }
  bool constrained(int node) const { return node_dof_[static_cast<size_t>(node)] < 0; }
  double constrained_value(int node) const { return value_[static_cast<size_t>(node)]; }
  int anchor_node() const { return anchor_; }

  // Nodal values from free DOF values (constrained nodes take their value).
  Vec expand(const Vec& free) const;
  // Free DOF values from nodal values (each DOF takes the value of its lowest-index node).
  Vec restrict_to_free(const Vec& nodal) const;

  friend DofMap apply_periodic(const DofMap& dofs, const PeriodicPairing& pairing);

 private:
  std::vector<int> node_dof_;
  std::vector<double> value_;
  int n_free_ = 0;
  int anchor_ = -1;
};

// Aliases slaves to masters and pins one anchor DOF (the master corner if any,
// otherwise the first free node) to zero.
DofMap apply_periodic(const DofMap& dofs, const PeriodicPairing& pairing);

struct SparseSystem {
  SpMat matrix;
  Vec rhs;
};

struct ElementContribution {
  Mat3 matrix = Mat3::Zero();
  Vec3 vector = Vec3::Zero();
};
using ElementCallback = std::function<ElementContribution(int triangle)>;

// Global system sum_T (K_T, f_T) with slaves folded into masters; constrained
// values g are eliminated: rhs = f - K_fc g.
SparseSystem assemble(const Mesh2D& mesh, const DofMap& dofs, const ElementCallback& element_cb);

// Reusable sparsity pattern with an element-to-storage scatter map, for
// repeated assembly of the same structure (Newton loops).
class AssemblyPattern {
 public:
  AssemblyPattern() = default;
  AssemblyPattern(const Mesh2D& mesh, const DofMap& dofs);
  const SpMat& pattern() const { return pattern_; }
  int n_free() const { return static_cast<int>(pattern_.rows()); }
  // Adds the element matrix of triangle t into `target` (same pattern) and the
  // element vector into `rhs`, eliminating constrained values.
  void scatter(int t, const Mat3& k, const Vec3& f, SpMat& target, Vec& rhs) const;
  void scatter_matrix(int t, const Mat3& k, SpMat& target) const;
  void scatter_vector(int t, const Vec3& f, Vec& rhs) const;
  SpMat zero_matrix() const;

 private:
  SpMat pattern_;
  std::vector<std::array<int, 3>> tri_dofs_;
  std::vector<std::array<double, 3>> tri_values_;   // constrained values (0 for free)
  std::vector<std::array<int, 9>> slots_;           // storage index per local (i,j), -1 if constrained
};

enum class LinearSolverKind { LU, LDLT, CG };

// Direct LU by default. Throws SolverFailure (with a conditioning diagnostic)
// if factorization fails or the residual check is violated.
Vec solve_linear(const SparseSystem& system, LinearSolverKind kind = LinearSolverKind::LU);

// Residual acceptance used by all direct solves: ||Ax-b|| <= 1e-10(||b||+1),
// or the backward error ||Ax-b|| <= 1e-12 ||A||_inf ||x|| for badly scaled systems.
bool residual_acceptable(const SpMat& a, const Vec& x, const Vec& b, double* residual_norm = nullptr);

}  // namespace mqshmm
