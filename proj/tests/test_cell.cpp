#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mqshmm/cell.hpp"
#include "mqshmm/errors.hpp"

using namespace mqshmm;
using Catch::Approx;

namespace {

CellModelPtr laminate_sigma(double s_ins, double s_grain, int n = 8) {
  CellOptions o;
  o.layout = Laminate{0.5, Axis::X};
  o.n_per_side = n;
  o.conductivity.sigma.fill(0.0);
  o.conductivity.sigma[static_cast<size_t>(Region::Insulation)] = s_ins;
  o.conductivity.sigma[static_cast<size_t>(Region::ConductingGrain)] = s_grain;
  return CellModel::build(o);
}

CellModelPtr homogeneous(const MaterialLaw& law, double sigma, int n = 6) {
  CellOptions o;
  o.layout = Homogeneous{};
  o.n_per_side = n;
  o.grain_law = law;
  o.insulation_law = law;
  o.conductivity.sigma.fill(0.0);
  o.conductivity.sigma[static_cast<size_t>(Region::ConductingGrain)] = sigma;
  o.conductivity.sigma[static_cast<size_t>(Region::Insulation)] = sigma;
  return CellModel::build(o);
}

CellState random_state(const CellModelPtr& m, std::mt19937& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  CellState s = CellState::initial(m);
  for (Eigen::Index i = 0; i < s.alpha.size(); ++i) s.alpha[i] = u(rng);
  return s;
}

}  // namespace

TEST_CASE("conductivity cell: homogeneous", "[cell]") {
  const auto m = homogeneous(MaterialLaw::linear(kNu0), 2.5);
  const Mat2 s = homogenized_sigma(*m);
  CHECK((s - 2.5 * Mat2::Identity()).norm() <= 1e-12);
  const Vec chi = solve_conductivity_cell(*m, 0);
  CHECK(chi.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("conductivity cell: laminate gives harmonic/arithmetic means", "[cell]") {
  const auto m = laminate_sigma(1.0, 3.0);
  const Mat2 s = homogenized_sigma(*m);
  CHECK(std::abs(s(0, 0) - 1.5) <= 1e-10);
  CHECK(std::abs(s(1, 1) - 2.0) <= 1e-10);
  CHECK(std::abs(s(0, 1)) <= 1e-10);
  CHECK(std::abs(s(1, 0)) <= 1e-10);
  CHECK(solve_conductivity_cell(*m, 1).cwiseAbs().maxCoeff() <= 1e-12);
  // Across the layers the corrector is piecewise linear: constant gradient per layer.
  const Vec chi = solve_conductivity_cell(*m, 0);
  double g_ins = 0, g_con = 0;
  for (int e = 0; e < m->n_elements(); ++e) {
    const auto& tri = m->mesh().triangles[static_cast<size_t>(e)];
    const ElementGeometry g = element_geometry(m->element_points(e));
    double gx = 0;
    for (int a = 0; a < 3; ++a) gx += g.grad(0, a) * chi[tri[static_cast<size_t>(a)]];
    (m->mesh().regions[static_cast<size_t>(e)] == Region::Insulation ? g_ins : g_con) = gx;
  }
  // Flux continuity: sigma (1 - dchi/dx) equal in both layers.
  CHECK(1.0 * (1 - g_ins) == Approx(3.0 * (1 - g_con)).epsilon(1e-10));
}

TEST_CASE("conductivity cell: isolated grains do not percolate", "[cell]") {
  CellOptions o;
  o.n_per_side = 10;
  o.conductivity = ConductivityField::physical(1.0);
  o.sigma_reg_factor = 1e-6;
  const double s1 = homogenized_sigma(*CellModel::build(o)).norm();
  o.sigma_reg_factor = 1e-7;
  const double s2 = homogenized_sigma(*CellModel::build(o)).norm();
  CHECK(s1 <= 10 * 1e-6);
  CHECK(s2 / s1 == Approx(0.1).epsilon(0.05));
}

TEST_CASE("upscaling: homogeneous linear cell", "[cell]") {
  const double nu = 1234.5;
  const auto m = homogeneous(MaterialLaw::linear(nu), 0.0);
  const CellState c = CellState::initial(m);
  const Vec2 b(0.7, -1.1);
  CHECK((upscale_h(c, b) - nu * b).norm() <= 1e-12 * nu);
  CHECK((exact_jacobian(c, b) - nu * Mat2::Identity()).norm() <= 1e-12 * nu);
}

TEST_CASE("upscaling: linear laminate", "[cell]") {
  CellOptions o;
  o.layout = Laminate{0.5, Axis::X};
  o.n_per_side = 8;
  o.grain_law = MaterialLaw::linear(1000.0);
  o.insulation_law = MaterialLaw::linear(3000.0);
  o.conductivity.sigma.fill(0.0);
  const auto m = CellModel::build(o);
  const double arithmetic = 2000.0, harmonic = 1.0 / (0.5 / 1000.0 + 0.5 / 3000.0);
  SECTION("flux across the layers: normal b continuous, arithmetic mean of nu") {
    MacroSource src;
    src.b_M = Vec2(1.0, 0.0);
    const CellState c = meso_step(CellState::initial(m), src, 1e-6, {1e-12, 10});
    const Vec2 h = upscale_h(c, src.b_M);
    CHECK(h[0] == Approx(arithmetic).epsilon(1e-10));
    CHECK(std::abs(h[1]) <= 1e-8);
  }
  SECTION("flux along the layers: tangential h continuous, harmonic mean of nu") {
    MacroSource src;
    src.b_M = Vec2(0.0, 1.0);
    const CellState c = meso_step(CellState::initial(m), src, 1e-6, {1e-12, 10});
    const Vec2 h = upscale_h(c, src.b_M);
    CHECK(h[1] == Approx(harmonic).epsilon(1e-10));
    CHECK(std::abs(h[0]) <= 1e-8);
  }
}

TEST_CASE("upscaling: homogeneous Brauer cell", "[cell]") {
  const MaterialLaw br = MaterialLaw::brauer(388.0, 0.3774, 2.97);
  const auto m = homogeneous(br, 0.0);
  const CellState c = CellState::initial(m);
  CHECK(upscale_h(c, Vec2(1, 0))[0] == Approx(395.36).margin(0.01));
  const Mat2 d = exact_jacobian(c, Vec2(1, 0));
  CHECK(d(0, 0) == Approx(439.05).margin(0.01));
  CHECK(d(1, 1) == Approx(395.36).margin(0.01));
  // Magnetostatic step at 1.5 T: a uniform field needs no correction.
  MacroSource src;
  src.b_M = Vec2(1.5, 0.0);
  const CellState s = meso_step(c, src, 1e-6, {1e-12, 10});
  CHECK(s.alpha.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("exact Jacobian matches frozen-correction central differences", "[cell]") {
  CellOptions o;
  o.n_per_side = 8;
  const auto m = CellModel::build(o);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int i = 0; i < 20; ++i) {
    const CellState c = random_state(m, rng, 0.05);
    const Vec2 b(u(rng), u(rng));
    const Mat2 j = exact_jacobian(c, b);
    Mat2 fd;
    const double h = 1e-5;
    for (int k = 0; k < 2; ++k) {
      Vec2 e = Vec2::Zero();
      e[k] = h;
      fd.col(k) = (upscale_h(c, b + e) - upscale_h(c, b - e)) / (2 * h);
    }
    CHECK((fd - j).norm() <= 1e-8 * j.norm());
    CHECK((upscale(c, b).dh_M_db_M - j).norm() == 0.0);
  }
}

TEST_CASE("meso step: zero source keeps zero correction", "[cell]") {
  const auto m = homogeneous(MaterialLaw::linear(kNu0), 5e6);
  const CellState c = meso_step(CellState::initial(m), MacroSource{}, 1e-6);
  CHECK(c.alpha.norm() == 0.0);
  const Vec r = cell_residual(CellState::initial(m), Vec::Zero(m->n_free()), MacroSource{}, 1e-6);
  CHECK(r.norm() == 0.0);
}

TEST_CASE("meso step: linear conducting cell against a dense transient oracle", "[cell]") {
  const double nu = 1000.0, sigma = 5e6, dt = 1e-6;
  CellOptions o;
  o.layout = SquareInclusion{0.64};
  o.n_per_side = 5;
  o.grain_law = MaterialLaw::linear(nu);
  o.insulation_law = MaterialLaw::linear(nu);
  o.conductivity = ConductivityField::physical(sigma);
  const auto m = CellModel::build(o);
  const double eps2 = o.period * o.period;
  MacroSource src;
  src.db_M_dt = Vec2(3e4, -1e4);

  // Independent dense assembly of the same FE system.
  const int n = m->n_free();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n), M = Eigen::MatrixXd::Zero(n, n);
  Vec mvec = Vec::Zero(n), f = Vec::Zero(n);
  double S = 0, Sx = 0, Sy = 0;
  const Mesh2D& mesh = m->mesh();
  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const TrianglePoints p = m->element_points(e);
    const double s = mesh.regions[static_cast<size_t>(e)] == Region::ConductingGrain ? eps2 * sigma : 0.0;
    const double a = element_geometry(p).area;
    S += s * a;
    Sx += s * a * (p[0].y + p[1].y + p[2].y) / 3.0;
    Sy += s * a * (p[0].x + p[1].x + p[2].x) / 3.0;
  }
  const double my = Sx / S, mx = Sy / S;  // conductivity-weighted centroid
  for (int e = 0; e < mesh.num_triangles(); ++e) {
    const TrianglePoints p = m->element_points(e);
    const double s = mesh.regions[static_cast<size_t>(e)] == Region::ConductingGrain ? eps2 * sigma : 0.0;
    const Mat3 ke = element_stiffness(p, nu * Mat2::Identity());
    const Mat3 me = element_mass(p, s);
    Vec3 es;
    for (int i = 0; i < 3; ++i)
      es[i] = -src.db_M_dt[0] * (p[static_cast<size_t>(i)].y - my) + src.db_M_dt[1] * (p[static_cast<size_t>(i)].x - mx);
    const Vec3 fe = me * es;
    const auto& d = m->element_dofs()[static_cast<size_t>(e)];
    for (int i = 0; i < 3; ++i) {
      const int di = d[static_cast<size_t>(i)];
      if (di < 0) continue;
      f[di] += fe[i];
      mvec[di] += s * element_geometry(p).area / 3.0;
      for (int j = 0; j < 3; ++j) {
        const int dj = d[static_cast<size_t>(j)];
        if (dj < 0) continue;
        K(di, dj) += ke(i, j);
        M(di, dj) += me(i, j);
      }
    }
  }
  const Eigen::MatrixXd Mp = M - mvec * mvec.transpose() / S;
  const Eigen::MatrixXd A = Mp / dt + K;
  const auto lu = A.partialPivLu();

  CellState c = CellState::initial(m);
  Vec x = Vec::Zero(n);
  for (int step = 0; step < 6; ++step) {
    const CellState next = meso_step(c, src, dt, {1e-13, 10});
    const Vec xn = lu.solve(Mp * x / dt + f);
    CHECK((next.alpha - xn).norm() <= 1e-9 * xn.norm());
    // Joule density of the step from the oracle fields.
    const Vec rate = (xn - x) / dt;
    const double mean_rate = mvec.dot(rate) / S;
    double loss = 0;
    for (int e = 0; e < mesh.num_triangles(); ++e) {
      if (mesh.regions[static_cast<size_t>(e)] != Region::ConductingGrain) continue;
      const TrianglePoints p = m->element_points(e);
      Vec3 v;
      for (int i = 0; i < 3; ++i) {
        const int d = m->element_dofs()[static_cast<size_t>(e)][static_cast<size_t>(i)];
        const double es = -src.db_M_dt[0] * (p[static_cast<size_t>(i)].y - my) +
                          src.db_M_dt[1] * (p[static_cast<size_t>(i)].x - mx);
        v[i] = es - ((d >= 0 ? rate[d] : 0.0) - mean_rate);
      }
      loss += v.dot(element_mass(p, eps2 * sigma) * v);
    }
    CHECK(cell_loss_density(c, next, src, dt) == Approx(loss / m->domain_area()).epsilon(1e-8));
    c = next;
    x = xn;
  }
}

TEST_CASE("finite-difference Jacobian", "[cell]") {
  SECTION("linear homogeneous static cell gives nu I") {
    const double nu = 800.0;
    const auto m = homogeneous(MaterialLaw::linear(nu), 0.0, 4);
    MacroSource src;
    src.b_M = Vec2(0.4, 0.2);
    const FdJacobianResult r = fd_jacobian(CellState::initial(m), src, 1e-6, 1e-6);
    CHECK(r.solve_count == 3);
    CHECK((r.law.dh_M_db_M - nu * Mat2::Identity()).norm() <= 1e-6 * nu);
  }
  SECTION("Brauer cell: first-order consistency between two steps") {
    CellOptions o;
    o.n_per_side = 8;
    const auto m = CellModel::build(o);
    MacroSource src;
    src.b_M = Vec2(1.2, 0.4);
    src.db_M_dt = Vec2(2e5, -1e5);
    const NewtonOptions tight{1e-13, 20};
    const Mat2 j6 = fd_jacobian(CellState::initial(m), src, 1e-6, 1e-6, tight).law.dh_M_db_M;
    const Mat2 j7 = fd_jacobian(CellState::initial(m), src, 1e-6, 1e-7, tight).law.dh_M_db_M;
    CHECK((j6 - j7).norm() <= 1e-4 * j7.norm());
  }
}

TEST_CASE("projected mass annihilates the uniform mode", "[cell]") {
  CellOptions o;
  o.n_per_side = 6;
  const auto m = CellModel::build(o);
  MacroSource a, b;
  a.db_M_dt = b.db_M_dt = Vec2(1e4, 2e4);
  b.da_M_dt = 123.0;
  const CellState s0 = CellState::initial(m);
  CHECK((meso_step(s0, a, 1e-6).alpha - meso_step(s0, b, 1e-6).alpha).norm() == 0.0);
}

TEST_CASE("linearization blocks are consistent with the residual", "[cell]") {
  CellOptions o;
  o.n_per_side = 6;
  const auto m = CellModel::build(o);
  std::mt19937 rng(3);
  const CellState prev = random_state(m, rng, 0.02);
  const Vec alpha = random_state(m, rng, 0.02).alpha;
  MacroSource src;
  src.b_M = Vec2(1.0, -0.5);
  src.db_M_dt = Vec2(1e5, 3e4);
  const double dt = 1e-6;
  const CellLinearization lin = linearize_cell(prev, alpha, src, dt);
  CHECK((lin.residual - cell_residual(prev, alpha, src, dt)).norm() <= 1e-12 * (1 + lin.residual.norm()));
  // dR/dalpha (stiffness + projected mass/dt) against a directional difference.
  Vec dir = random_state(m, rng, 1.0).alpha;
  const double h = 1e-7;
  const Vec fd = (cell_residual(prev, alpha + h * dir, src, dt) - cell_residual(prev, alpha - h * dir, src, dt)) / (2 * h);
  const Vec an = lin.stiffness * dir + m->projected_mass_times(dir) / dt;
  CHECK((fd - an).norm() <= 1e-6 * an.norm());
  // Solver applies the inverse of the same operator.
  const CellJacobianSolver solver(*m, lin.stiffness, dt);
  const Vec x = solver.solve(an);
  CHECK((x - dir).norm() <= 1e-8 * dir.norm());
}

TEST_CASE("meso step reports non-convergence", "[cell]") {
  CellOptions o;
  o.n_per_side = 6;
  const auto m = CellModel::build(o);
  MacroSource src;
  src.b_M = Vec2(1.8, 0.0);  // magnetostatic, deep in saturation: Newton needs several updates
  CHECK_THROWS_AS(meso_step(CellState::initial(m), src, 1.0, {1e-14, 1}), ConvergenceFailure);
}
