#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <random>

#include "mqshmm/errors.hpp"
#include "mqshmm/fem.hpp"
#include "mqshmm/mesh.hpp"

using namespace mqshmm;
using Catch::Approx;

namespace {
const TrianglePoints kUnit{Point{0, 0}, Point{1, 0}, Point{0, 1}};
}

TEST_CASE("stiffness of the unit right triangle", "[fem]") {
  const Mat3 k = element_stiffness(kUnit, Mat2::Identity());
  Mat3 expected;
  expected << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  expected *= 0.5;
  CHECK((k - expected).norm() <= 1e-15);
  CHECK((element_stiffness(kUnit, 2.0 * Mat2::Identity()) - 2.0 * k).norm() <= 1e-15);
}

TEST_CASE("stiffness rows sum to zero on any triangle", "[fem]") {
  const TrianglePoints tri{Point{0.1, -0.3}, Point{2.0, 0.4}, Point{0.7, 1.9}};
  const Mat3 k = element_stiffness(tri, Mat2::Identity());
  for (int i = 0; i < 3; ++i) CHECK(std::abs(k.row(i).sum()) <= 1e-14);
  // Isotropic curl-curl equals the Laplacian stiffness.
  CHECK((element_curlcurl(tri, Mat2::Identity()) - k).norm() <= 1e-14);
}

TEST_CASE("mass of the unit right triangle", "[fem]") {
  const Mat3 m = element_mass(kUnit, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(m(i, j) == Approx(i == j ? 1.0 / 12 : 1.0 / 24).epsilon(1e-15));
  CHECK(element_mass(kUnit, 0.0).norm() == 0.0);
  const TrianglePoints tri{Point{0.1, -0.3}, Point{2.0, 0.4}, Point{0.7, 1.9}};
  const double area = element_geometry(tri).area;
  CHECK(element_mass(tri, 3.0).sum() == Approx(3.0 * area).epsilon(1e-14));
}

TEST_CASE("degenerate triangle is singular", "[fem]") {
  const TrianglePoints flat{Point{0, 0}, Point{1, 1}, Point{2, 2}};
  CHECK_THROWS_AS(element_mass(flat, 1.0), SingularElement);
  CHECK_THROWS_AS(element_stiffness(flat, Mat2::Identity()), SingularElement);
}

TEST_CASE("assembly: pinned Laplacian on a periodic cell is SPD", "[fem]") {
  const CellMesh c = generate_cell_mesh(Homogeneous{}, 4);
  const DofMap dofs = apply_periodic(DofMap::all_free(c.mesh.num_nodes()), c.pairing);
  const SparseSystem s = assemble(c.mesh, dofs, [&](int t) {
    return ElementContribution{element_stiffness(triangle_points(c.mesh, t), Mat2::Identity()), Vec3::Zero()};
  });
  const Eigen::MatrixXd a(s.matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
  CHECK((a - a.transpose()).norm() <= 1e-14);
}

TEST_CASE("assembly: zero callback gives zero system", "[fem]") {
  const Mesh2D m = generate_macro_mesh(1, GeometryParams{});
  const DofMap dofs = DofMap::all_free(m.num_nodes());
  const SparseSystem s = assemble(m, dofs, [](int) { return ElementContribution{}; });
  CHECK(Eigen::MatrixXd(s.matrix).norm() == 0.0);
  CHECK(s.rhs.norm() == 0.0);
}

TEST_CASE("assembly: renumbering invariance of a Dirichlet solve", "[fem]") {
  const GeometryParams g;
  const Mesh2D m = generate_macro_mesh(2, g);
  auto solve = [](const Mesh2D& mesh) {
    const DofMap dofs = DofMap::dirichlet(mesh, {BoundaryTag::GammaInf});
    const SparseSystem s = assemble(mesh, dofs, [&](int t) {
      const TrianglePoints p = triangle_points(mesh, t);
      const double a = element_geometry(p).area;
      return ElementContribution{element_stiffness(p, Mat2::Identity()), Vec3::Constant(a / 3.0)};
    });
    return dofs.expand(solve_linear(s));
  };
  const Vec u = solve(m);
  std::vector<int> perm(static_cast<size_t>(m.num_nodes()));
  std::mt19937 rng(7);
  for (int i = 0; i < m.num_nodes(); ++i) perm[static_cast<size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  const Vec v = solve(renumber_nodes(m, perm));
  for (int i = 0; i < m.num_nodes(); ++i) CHECK(std::abs(v[perm[static_cast<size_t>(i)]] - u[i]) <= 1e-12 * u.norm());
}

TEST_CASE("solve_linear small systems", "[fem]") {
  SpMat id(3, 3);
  id.setIdentity();
  const Vec b = Vec3(1, -2, 3);
  CHECK((solve_linear({id, b}) - b).norm() == 0.0);
  SpMat d(2, 2);
  d.insert(0, 0) = 2;
  d.insert(1, 1) = 4;
  const Vec x = solve_linear({d, Vec2(2, 8)});
  CHECK(x[0] == Approx(1.0));
  CHECK(x[1] == Approx(2.0));
  SpMat z(2, 2);
  z.insert(0, 0) = 1;
  CHECK_THROWS_AS(solve_linear({z, Vec2(1, 1)}), SolverFailure);
}

TEST_CASE("solve_linear residual on an assembled SPD system", "[fem]") {
  const CellMesh c = generate_cell_mesh(Homogeneous{}, 5);  // 50 triangles
  const DofMap dofs = DofMap::dirichlet(c.mesh, {BoundaryTag::CellBoundary});
  const SparseSystem s = assemble(c.mesh, dofs, [&](int t) {
    return ElementContribution{element_stiffness(triangle_points(c.mesh, t), Mat2::Identity()), Vec3::Ones()};
  });
  for (auto kind : {LinearSolverKind::LU, LinearSolverKind::LDLT, LinearSolverKind::CG}) {
    const Vec x = solve_linear(s, kind);
    CHECK((s.matrix * x - s.rhs).norm() <= 1e-10 * (s.rhs.norm() + 1.0));
  }
}

TEST_CASE("periodic DOF map counts and aliasing", "[fem]") {
  const CellMesh c = generate_cell_mesh(Homogeneous{}, 2);
  const DofMap d = apply_periodic(DofMap::all_free(c.mesh.num_nodes()), c.pairing);
  // 3x3 grid: 1 interior + 2 edge masters + 1 corner master, minus the anchor.
  CHECK(d.n_free() == 1 + 2 + 1 - 1);
  CHECK(d.anchor_node() >= 0);
  for (auto [m, s] : c.pairing.master_slave_pairs) CHECK(d.dof(m) == d.dof(s));

  const DofMap plain = apply_periodic(DofMap::all_free(5), PeriodicPairing{});
  CHECK(plain.n_free() == 4);

  PeriodicPairing bad;
  bad.master_slave_pairs = {{0, 999}};
  CHECK_THROWS_AS(apply_periodic(DofMap::all_free(c.mesh.num_nodes()), bad), Inconsistency);
}

TEST_CASE("periodic Laplacian with zero-mean source is periodic", "[fem]") {
  const CellMesh c = generate_cell_mesh(Homogeneous{}, 8);
  const DofMap d = apply_periodic(DofMap::all_free(c.mesh.num_nodes()), c.pairing);
  const SparseSystem s = assemble(c.mesh, d, [&](int t) {
    const TrianglePoints p = triangle_points(c.mesh, t);
    const Point ctr = c.mesh.centroid(t);
    const double f = std::sin(2 * 3.14159265358979 * ctr.x) * element_geometry(p).area / 3.0;
    return ElementContribution{element_stiffness(p, Mat2::Identity()), Vec3::Constant(f)};
  });
  const Vec u = d.expand(solve_linear(s));
  for (auto [m, sl] : c.pairing.master_slave_pairs) CHECK(u[m] == u[sl]);
}
