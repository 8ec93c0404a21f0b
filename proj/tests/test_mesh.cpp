#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mqshmm/errors.hpp"
#include "mqshmm/mesh.hpp"

using namespace mqshmm;
using Catch::Approx;

namespace {
double max_x(const Mesh2D& m) {
  double v = -1e300;
  for (const auto& p : m.nodes) v = std::max(v, p.x);
  return v;
}
double max_y(const Mesh2D& m) {
  double v = -1e300;
  for (const auto& p : m.nodes) v = std::max(v, p.y);
  return v;
}
}  // namespace

TEST_CASE("macro mesh: smallest instance has all region tags", "[mesh]") {
  GeometryParams g;
  const Mesh2D m = generate_macro_mesh(1, g);
  REQUIRE_NOTHROW(m.validate());
  CHECK(m.has_region(Region::Homogenized));
  CHECK(m.has_region(Region::Air));
  CHECK(m.has_region(Region::Inductor));
  CHECK(m.triangles_in(Region::Homogenized).size() >= 2);
}

TEST_CASE("macro mesh: bounding box and analytic area", "[mesh]") {
  GeometryParams g;
  for (int grains : {1, 2, 4}) {
    const Mesh2D m = generate_macro_mesh(grains, g);
    CHECK(max_x(m) == Approx(g.extent()).epsilon(1e-14));
    CHECK(max_y(m) == Approx(g.extent()).epsilon(1e-14));
    CHECK(g.extent() == Approx(0.5 * g.L + g.e_gap + g.e_i + g.air_margin_factor * 0.5 * g.L));
    CHECK(std::abs(m.total_area() - g.analytic_area()) <= 1e-12 * g.analytic_area());
    CHECK(m.region_area(Region::Homogenized) == Approx(0.25 * g.L * g.L).epsilon(1e-12));
  }
}

TEST_CASE("macro mesh: invalid geometry is rejected", "[mesh]") {
  GeometryParams g;
  CHECK_THROWS_AS(generate_macro_mesh(0, g), InvalidGeometry);
  g.L = -1.0;
  CHECK_THROWS_AS(generate_macro_mesh(2, g), InvalidGeometry);
}

TEST_CASE("cell mesh: homogeneous 2x2", "[mesh]") {
  const CellMesh c = generate_cell_mesh(Homogeneous{}, 2);
  CHECK(c.mesh.num_triangles() == 8);
  const Region r0 = c.mesh.regions.front();
  CHECK(std::all_of(c.mesh.regions.begin(), c.mesh.regions.end(), [&](Region r) { return r == r0; }));
  // 3x3 nodes: one non-corner node per side edge is paired (2 per axis), plus 3 corner slaves.
  REQUIRE_NOTHROW(c.pairing.validate(c.mesh));
  CHECK(c.pairing.corner_group.size() == 4);
  CHECK(c.pairing.master_slave_pairs.size() == 2 + 3);
}

TEST_CASE("cell mesh: pairing idempotent, offsets of one period", "[mesh]") {
  const CellMesh c = generate_cell_mesh(SquareInclusion{0.64}, 10);
  std::set<int> masters, slaves;
  for (auto [m, s] : c.pairing.master_slave_pairs) {
    masters.insert(m);
    slaves.insert(s);
    const Point& a = c.mesh.nodes[static_cast<size_t>(m)];
    const Point& b = c.mesh.nodes[static_cast<size_t>(s)];
    const double dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y);
    const bool ok = (std::abs(dx - c.pairing.period) < 1e-14 && dy < 1e-14) ||
                    (std::abs(dy - c.pairing.period) < 1e-14 && dx < 1e-14) ||
                    (std::abs(dx - c.pairing.period) < 1e-14 && std::abs(dy - c.pairing.period) < 1e-14);
    CHECK(ok);
  }
  // No master is itself a slave: mapping twice gives the same master.
  for (int m : masters) CHECK(slaves.count(m) == 0);
}

TEST_CASE("cell mesh: square inclusion area fraction is exact on aligned mesh", "[mesh]") {
  const CellMesh c = generate_cell_mesh(SquareInclusion{0.64}, 10);
  CHECK(c.mesh.region_area(Region::ConductingGrain) / c.mesh.total_area() == Approx(0.64).epsilon(1e-13));
  CHECK(c.mesh.total_area() == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cell mesh: laminate halves", "[mesh]") {
  const CellMesh c = generate_cell_mesh(Laminate{0.5, Axis::X}, 4);
  for (int t = 0; t < c.mesh.num_triangles(); ++t) {
    const Point p = c.mesh.centroid(t);
    CHECK(c.mesh.regions[static_cast<size_t>(t)] == (p.x < 0.0 ? Region::Insulation : Region::ConductingGrain));
  }
}

TEST_CASE("cell mesh: invalid layouts", "[mesh]") {
  CHECK_THROWS_AS(generate_cell_mesh(SquareInclusion{0.0}, 10), InvalidLayout);
  CHECK_THROWS_AS(generate_cell_mesh(SquareInclusion{1.0}, 10), InvalidLayout);
  CHECK_THROWS_AS(generate_cell_mesh(Laminate{1.5, Axis::Y}, 10), InvalidLayout);
}

TEST_CASE("reference mesh: grains are disconnected islands", "[mesh]") {
  GeometryParams g;
  const Mesh2D m = generate_reference_mesh(2, 1, g);
  REQUIRE_NOTHROW(m.validate());
  int n = 0;
  region_components(m, Region::ConductingGrain, &n);
  CHECK(n == 4);
}

TEST_CASE("reference mesh: refinement quadruples triangle count", "[mesh]") {
  GeometryParams g;
  const Mesh2D m1 = generate_reference_mesh(2, 1, g);
  const Mesh2D m2 = generate_reference_mesh(2, 2, g);
  const double ratio = static_cast<double>(m2.num_triangles()) / m1.num_triangles();
  CHECK(ratio == Approx(4.0).epsilon(0.05));
}

TEST_CASE("reference mesh: conducting area is analytic", "[mesh]") {
  GeometryParams g;
  for (int grains : {2, 4}) {
    const Mesh2D m = generate_reference_mesh(grains, 1, g);
    const double side = std::sqrt(g.grain_fill) * (0.5 * g.L / grains);
    const double expected = grains * grains * side * side;
    CHECK(std::abs(m.region_area(Region::ConductingGrain) - expected) <= 1e-12 * expected);
    CHECK(std::abs(m.total_area() - g.analytic_area()) <= 1e-12 * g.analytic_area());
  }
}

TEST_CASE("renumbering keeps geometry", "[mesh]") {
  GeometryParams g;
  const Mesh2D m = generate_macro_mesh(2, g);
  std::vector<int> perm(static_cast<size_t>(m.num_nodes()));
  for (int i = 0; i < m.num_nodes(); ++i) perm[static_cast<size_t>(i)] = m.num_nodes() - 1 - i;
  const Mesh2D r = renumber_nodes(m, perm);
  REQUIRE_NOTHROW(r.validate());
  CHECK(r.total_area() == Approx(m.total_area()).epsilon(1e-14));
  std::ostringstream os;
  write_mesh(os, r);
  CHECK(!os.str().empty());
}
