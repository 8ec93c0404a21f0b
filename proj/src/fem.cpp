#include "mqshmm/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

TrianglePoints triangle_points(const Mesh2D& mesh, int t) {
  const auto& tri = mesh.triangles[static_cast<size_t>(t)];
  return {mesh.nodes[static_cast<size_t>(tri[0])], mesh.nodes[static_cast<size_t>(tri[1])],
          mesh.nodes[static_cast<size_t>(tri[2])]};
}

Mat23 ElementGeometry::curl() const {
  Mat23 c;
  c.row(0) = grad.row(1);
  c.row(1) = -grad.row(0);
  return c;
}

ElementGeometry element_geometry(const TrianglePoints& p) {
  const double x0 = p[0].x, y0 = p[0].y, x1 = p[1].x, y1 = p[1].y, x2 = p[2].x, y2 = p[2].y;
  const double two_a = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
  double h2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Point& a = p[static_cast<size_t>(k)];
    const Point& b = p[static_cast<size_t>((k + 1) % 3)];
    h2 = std::max(h2, (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
  }
  if (!(two_a > 1e-14 * h2) || !std::isfinite(two_a)) {
    std::ostringstream os;
    os << "degenerate or clockwise triangle (2A = " << two_a << ")";
    throw SingularElement(os.str());
  }
  ElementGeometry g;
  g.area = 0.5 * two_a;
  g.grad << (y1 - y2), (y2 - y0), (y0 - y1),  //
      (x2 - x1), (x0 - x2), (x1 - x0);
  g.grad /= two_a;
  return g;
}

Mat3 element_stiffness(const TrianglePoints& tri, const Mat2& coeff) {
  const ElementGeometry g = element_geometry(tri);
  // K_ij = A (C grad_i) . grad_j  ->  A * grad^T C^T grad
  return g.area * (g.grad.transpose() * coeff.transpose() * g.grad);
}

Mat3 element_curlcurl(const TrianglePoints& tri, const Mat2& tangent) {
  const ElementGeometry g = element_geometry(tri);
  const Mat23 c = g.curl();
  return g.area * (c.transpose() * tangent * c);
}

Mat3 element_mass(const TrianglePoints& tri, double coeff) {
  const ElementGeometry g = element_geometry(tri);
  Mat3 m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return (coeff * g.area / 12.0) * m;
}

DofMap DofMap::all_free(int n_nodes) {
  DofMap d;
  d.node_dof_.resize(static_cast<size_t>(n_nodes));
  d.value_.assign(static_cast<size_t>(n_nodes), 0.0);
  for (int i = 0; i < n_nodes; ++i) d.node_dof_[static_cast<size_t>(i)] = i;
  d.n_free_ = n_nodes;
  return d;
}

DofMap DofMap::dirichlet(const Mesh2D& mesh, const std::vector<BoundaryTag>& tags, double value) {
  DofMap d;
  const size_t nn = static_cast<size_t>(mesh.num_nodes());
  std::vector<char> fixed(nn, 0);
  for (const auto& e : mesh.boundary)
    for (BoundaryTag t : tags)
      if (e.tag == t) fixed[static_cast<size_t>(e.nodes[0])] = fixed[static_cast<size_t>(e.nodes[1])] = 1;
  d.node_dof_.assign(nn, -1);
  d.value_.assign(nn, 0.0);
  for (size_t i = 0; i < nn; ++i) {
    if (fixed[i])
      d.value_[i] = value;
    else
      d.node_dof_[i] = d.n_free_++;
  }
  return d;
}

Vec DofMap::expand(const Vec& free) const {
  if (free.size() != n_free_) throw Inconsistency("DofMap::expand: vector size differs from n_free");
  Vec out(num_nodes());
  for (int i = 0; i < num_nodes(); ++i) {
    const int d = dof(i);
    out[i] = d >= 0 ? free[d] : value_[static_cast<size_t>(i)];
  }
  return out;
}

Vec DofMap::restrict_to_free(const Vec& nodal) const {
  if (nodal.size() != num_nodes()) throw Inconsistency("DofMap::restrict_to_free: vector size differs from node count");
  Vec out = Vec::Zero(n_free_);
  std::vector<char> seen(static_cast<size_t>(n_free_), 0);
  for (int i = 0; i < num_nodes(); ++i) {
    const int d = dof(i);
    if (d >= 0 && !seen[static_cast<size_t>(d)]) {
      out[d] = nodal[i];
      seen[static_cast<size_t>(d)] = 1;
    }
  }
  return out;
}

DofMap apply_periodic(const DofMap& dofs, const PeriodicPairing& pairing) {
  const int nn = dofs.num_nodes();
  std::vector<int> master(static_cast<size_t>(nn));
  for (int i = 0; i < nn; ++i) master[static_cast<size_t>(i)] = i;
  for (auto [m, s] : pairing.master_slave_pairs) {
    if (m < 0 || m >= nn || s < 0 || s >= nn) throw Inconsistency("apply_periodic: pairing references unknown node");
    master[static_cast<size_t>(s)] = m;
  }
  for (int c : pairing.corner_group)
    if (c < 0 || c >= nn) throw Inconsistency("apply_periodic: corner group references unknown node");
  // Resolve chains (a master that is itself a slave).
  for (int i = 0; i < nn; ++i) {
    int m = master[static_cast<size_t>(i)];
    int guard = 0;
    while (master[static_cast<size_t>(m)] != m) {
      m = master[static_cast<size_t>(m)];
      if (++guard > nn) throw Inconsistency("apply_periodic: cyclic pairing");
    }
    master[static_cast<size_t>(i)] = m;
  }
  int anchor = -1;
  if (!pairing.corner_group.empty()) {
    anchor = master[static_cast<size_t>(pairing.corner_group.front())];
  } else if (!pairing.master_slave_pairs.empty()) {
    anchor = master[static_cast<size_t>(pairing.master_slave_pairs.front().first)];
  } else {
    for (int i = 0; i < nn; ++i)
      if (!dofs.constrained(i)) {
        anchor = i;
        break;
      }
  }
  if (anchor >= 0 && dofs.constrained(anchor)) anchor = -1;  // already pinned by Dirichlet data

  DofMap out;
  out.node_dof_.assign(static_cast<size_t>(nn), -1);
  out.value_.assign(static_cast<size_t>(nn), 0.0);
  out.anchor_ = anchor;
  for (int i = 0; i < nn; ++i) {
    if (master[static_cast<size_t>(i)] != i) continue;
    if (dofs.constrained(i)) {
      out.value_[static_cast<size_t>(i)] = dofs.constrained_value(i);
    } else if (i == anchor) {
      out.value_[static_cast<size_t>(i)] = 0.0;
    } else {
      out.node_dof_[static_cast<size_t>(i)] = out.n_free_++;
    }
  }
  for (int i = 0; i < nn; ++i) {
    const int m = master[static_cast<size_t>(i)];
    if (m == i) continue;
    out.node_dof_[static_cast<size_t>(i)] = out.node_dof_[static_cast<size_t>(m)];
    out.value_[static_cast<size_t>(i)] = out.value_[static_cast<size_t>(m)];
  }
  return out;
}

SparseSystem assemble(const Mesh2D& mesh, const DofMap& dofs, const ElementCallback& element_cb) {
  if (dofs.num_nodes() != mesh.num_nodes()) throw Inconsistency("assemble: DofMap does not match mesh");
  SparseSystem sys;
  const int n = dofs.n_free();
  sys.rhs = Vec::Zero(n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(9 * mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    ElementContribution c;
    try {
      c = element_cb(t);
    } catch (...) {
      rethrow_with_context("assembly of triangle " + std::to_string(t));
    }
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    for (int a = 0; a < 3; ++a) {
      const int da = dofs.dof(tri[static_cast<size_t>(a)]);
      if (da < 0) continue;
      double f = c.vector[a];
      for (int b = 0; b < 3; ++b) {
        const int nb = tri[static_cast<size_t>(b)];
        const int db = dofs.dof(nb);
        if (db >= 0)
          trips.emplace_back(da, db, c.matrix(a, b));
        else
          f -= c.matrix(a, b) * dofs.constrained_value(nb);
      }
      sys.rhs[da] += f;
    }
  }
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(trips.begin(), trips.end());
  sys.matrix.makeCompressed();
  return sys;
}

AssemblyPattern::AssemblyPattern(const Mesh2D& mesh, const DofMap& dofs) {
  if (dofs.num_nodes() != mesh.num_nodes()) throw Inconsistency("AssemblyPattern: DofMap does not match mesh");
  const int n = dofs.n_free();
  const int nt = mesh.num_triangles();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(9 * nt));
  tri_dofs_.resize(static_cast<size_t>(nt));
  tri_values_.resize(static_cast<size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    for (int a = 0; a < 3; ++a) {
      tri_dofs_[static_cast<size_t>(t)][static_cast<size_t>(a)] = dofs.dof(tri[static_cast<size_t>(a)]);
      tri_values_[static_cast<size_t>(t)][static_cast<size_t>(a)] =
          dofs.dof(tri[static_cast<size_t>(a)]) < 0 ? dofs.constrained_value(tri[static_cast<size_t>(a)]) : 0.0;
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int da = tri_dofs_[static_cast<size_t>(t)][static_cast<size_t>(a)];
        const int db = tri_dofs_[static_cast<size_t>(t)][static_cast<size_t>(b)];
        if (da >= 0 && db >= 0) trips.emplace_back(da, db, 1.0);
      }
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();
  slots_.resize(static_cast<size_t>(nt));
  for (int t = 0; t < nt; ++t)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int da = tri_dofs_[static_cast<size_t>(t)][static_cast<size_t>(a)];
        const int db = tri_dofs_[static_cast<size_t>(t)][static_cast<size_t>(b)];
        int slot = -1;
        if (da >= 0 && db >= 0) slot = static_cast<int>(&pattern_.coeffRef(da, db) - pattern_.valuePtr());
        slots_[static_cast<size_t>(t)][static_cast<size_t>(3 * a + b)] = slot;
      }
  std::fill(pattern_.valuePtr(), pattern_.valuePtr() + pattern_.nonZeros(), 0.0);
}

SpMat AssemblyPattern::zero_matrix() const { return pattern_; }

void AssemblyPattern::scatter_matrix(int t, const Mat3& k, SpMat& target) const {
  double* v = target.valuePtr();
  const auto& s = slots_[static_cast<size_t>(t)];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const int slot = s[static_cast<size_t>(3 * a + b)];
      if (slot >= 0) v[slot] += k(a, b);
    }
}

void AssemblyPattern::scatter_vector(int t, const Vec3& f, Vec& rhs) const {
  const auto& d = tri_dofs_[static_cast<size_t>(t)];
  for (int a = 0; a < 3; ++a)
    if (d[static_cast<size_t>(a)] >= 0) rhs[d[static_cast<size_t>(a)]] += f[a];
}

void AssemblyPattern::scatter(int t, const Mat3& k, const Vec3& f, SpMat& target, Vec& rhs) const {
  scatter_matrix(t, k, target);
  const auto& d = tri_dofs_[static_cast<size_t>(t)];
  const auto& g = tri_values_[static_cast<size_t>(t)];
  for (int a = 0; a < 3; ++a) {
    if (d[static_cast<size_t>(a)] < 0) continue;
    double fa = f[a];
    for (int b = 0; b < 3; ++b)
      if (d[static_cast<size_t>(b)] < 0) fa -= k(a, b) * g[static_cast<size_t>(b)];
    rhs[d[static_cast<size_t>(a)]] += fa;
  }
}

bool residual_acceptable(const SpMat& a, const Vec& x, const Vec& b, double* residual_norm) {
  const double r = (a * x - b).norm();
  if (residual_norm) *residual_norm = r;
  if (!std::isfinite(r)) return false;
  if (r <= 1e-10 * (b.norm() + 1.0)) return true;
  double a_inf = 0.0;
  {
    Vec row_sums = Vec::Zero(a.rows());
    for (int k = 0; k < a.outerSize(); ++k)
      for (SpMat::InnerIterator it(a, k); it; ++it) row_sums[it.row()] += std::abs(it.value());
    a_inf = row_sums.size() ? row_sums.maxCoeff() : 0.0;
  }
  return r <= 1e-12 * a_inf * x.norm();
}

namespace {

std::string diagnostic(const SpMat& a, const std::string& what) {
  double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < a.rows(); ++i) {
    const double d = std::abs(a.coeff(i, i));
    dmax = std::max(dmax, d);
    dmin = std::min(dmin, d);
  }
  std::ostringstream os;
  os << what << " (n=" << a.rows() << ", |diag| range [" << dmin << ", " << dmax
     << "], diagonal condition estimate " << (dmin > 0 ? dmax / dmin : std::numeric_limits<double>::infinity()) << ")";
  return os.str();
}

}  // namespace

Vec solve_linear(const SparseSystem& system, LinearSolverKind kind) {
  const SpMat& a = system.matrix;
  if (a.rows() != a.cols() || a.rows() != system.rhs.size())
    throw Inconsistency("solve_linear: matrix/rhs dimensions differ");
  if (a.rows() == 0) return Vec();
  Vec x;
  switch (kind) {
    case LinearSolverKind::LU: {
      Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
      lu.compute(a);
      if (lu.info() != Eigen::Success) throw SolverFailure(diagnostic(a, "sparse LU factorization failed"));
      x = lu.solve(system.rhs);
      break;
    }
    case LinearSolverKind::LDLT: {
      Eigen::SimplicialLDLT<SpMat> ldlt;
      ldlt.compute(a);
      if (ldlt.info() != Eigen::Success) throw SolverFailure(diagnostic(a, "sparse LDLT factorization failed"));
      const Vec d = ldlt.vectorD();
      if (d.cwiseAbs().minCoeff() <= 1e-14 * d.cwiseAbs().maxCoeff())
        throw SolverFailure(diagnostic(a, "sparse LDLT: zero pivot (singular matrix)"));
      x = ldlt.solve(system.rhs);
      break;
    }
    case LinearSolverKind::CG: {
      Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(1e-14);
      cg.setMaxIterations(static_cast<int>(10 * a.rows()));
      cg.compute(a);
      x = cg.solve(system.rhs);
      if (cg.info() != Eigen::Success) throw SolverFailure(diagnostic(a, "conjugate gradients did not converge"));
      break;
    }
  }
  double r = 0.0;
  if (!residual_acceptable(a, x, system.rhs, &r)) {
    std::ostringstream os;
    os << "linear solve residual " << r << " too large";
    throw SolverFailure(diagnostic(a, os.str()));
  }
  return x;
}

}  // namespace mqshmm
