#include "mqshmm/reference.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "mqshmm/analysis.hpp"
#include "mqshmm/errors.hpp"

namespace mqshmm {

namespace {
constexpr int kMaxBacktracks = 12;
}  // namespace

ReferenceSetup reference_setup(const RunConfig& cfg) {
  cfg.validate();
  ReferenceSetup s;
  GeometryParams g = cfg.geometry;
  g.grain_fill = cfg.cell_fill;
  s.mesh = generate_reference_mesh(cfg.grains, cfg.ref_refinement, g);
  s.laws = material_set(cfg);
  s.sigma_grain = cfg.sigma;
  s.source = cfg.source;
  s.t_end = cfg.t_end;
  s.n_steps = cfg.ref_steps > 0 ? cfg.ref_steps : cfg.n_steps_macro;
  s.newton = macro_newton(cfg);
  s.insulated_grains = cfg.insulated_grains;
  return s;
}

ReferenceRun run_reference(const RunConfig& cfg) { return run_reference(reference_setup(cfg)); }

ReferenceRun run_reference(const ReferenceSetup& setup) {
  setup.source.validate();
  if (setup.n_steps < 1 || !(setup.t_end > 0.0)) throw ConfigError("reference: invalid time grid");
  ReferenceRun run;
  run.mesh = setup.mesh;
  run.mesh.validate();
  const Mesh2D& mesh = run.mesh;
  if (mesh.has_region(Region::Homogenized)) throw InvalidGeometry("reference mesh must not contain homogenized elements");
  run.dofs = DofMap::dirichlet(mesh, {BoundaryTag::GammaInf, BoundaryTag::GammaH}, 0.0);
  const DofMap& dofs = run.dofs;
  const int n = dofs.n_free();
  if (static_cast<std::size_t>(n) > setup.dof_budget) {
    std::ostringstream os;
    os << "reference mesh has " << n << " unknowns, budget " << setup.dof_budget;
    throw BudgetExceeded(os.str());
  }
  const int nt = mesh.num_triangles();
  run.element_sigma.assign(static_cast<size_t>(nt), 0.0);
  for (int t = 0; t < nt; ++t)
    if (mesh.regions[static_cast<size_t>(t)] == Region::ConductingGrain) run.element_sigma[static_cast<size_t>(t)] = setup.sigma_grain;
  run.grain_of_element = region_components(mesh, Region::ConductingGrain, &run.n_grains);

  const AssemblyPattern pattern(mesh, dofs);
  std::vector<Mat23> curl(static_cast<size_t>(nt));
  std::vector<double> area(static_cast<size_t>(nt));
  SpMat mass = pattern.zero_matrix();
  Vec load = Vec::Zero(n);
  // Per-grain conductance moments: m_g = int sigma phi, S_g = int sigma.
  std::vector<Vec> m_grain;
  std::vector<double> S_grain;
  const bool constrained = setup.insulated_grains && setup.sigma_grain > 0.0;
  if (constrained) {
    m_grain.assign(static_cast<size_t>(run.n_grains), Vec::Zero(n));
    S_grain.assign(static_cast<size_t>(run.n_grains), 0.0);
  }
  for (int t = 0; t < nt; ++t) {
    const TrianglePoints p = triangle_points(mesh, t);
    const ElementGeometry g = element_geometry(p);
    curl[static_cast<size_t>(t)] = g.curl();
    area[static_cast<size_t>(t)] = g.area;
    const double s = run.element_sigma[static_cast<size_t>(t)];
    if (s > 0.0) {
      pattern.scatter_matrix(t, element_mass(p, s), mass);
      if (constrained) {
        const int gr = run.grain_of_element[static_cast<size_t>(t)];
        pattern.scatter_vector(t, Vec3::Constant(s * g.area / 3.0), m_grain[static_cast<size_t>(gr)]);
        S_grain[static_cast<size_t>(gr)] += s * g.area;
      }
    }
    if (mesh.regions[static_cast<size_t>(t)] == Region::Inductor)
      pattern.scatter_vector(t, Vec3::Constant(g.area / 3.0), load);
  }
  const int ngr = constrained ? run.n_grains : 0;
  const double ref = std::abs(setup.source.j_s0) * load.norm();

  run.waveform = Waveform(0.0, setup.t_end, setup.n_steps, n);
  const std::vector<int>* grains = constrained ? &run.grain_of_element : nullptr;
  Vec a_prev = Vec::Zero(n);
  run.qoi.push(0.0, 0.0, resolved_energy(mesh, dofs, setup.laws, a_prev));
  const double dt = setup.t_end / setup.n_steps;

  for (int k = 1; k <= setup.n_steps; ++k) {
    const double t = run.waveform.time(k);
    const Vec f = (setup.source.j_s0 * setup.source.s(t)) * load;
    Vec a = a_prev;
    int evals = 0;
    // Residual (and optionally tangent) at iterate x.
    auto evaluate = [&](const Vec& x, SpMat* jac, Vec* abs_sum) {
      Vec r = Vec::Zero(n);
      for (int e = 0; e < nt; ++e) {
        const Mat23& c = curl[static_cast<size_t>(e)];
        const auto& tri = mesh.triangles[static_cast<size_t>(e)];
        Vec3 ae;
        for (int q = 0; q < 3; ++q) {
          const int d = dofs.dof(tri[static_cast<size_t>(q)]);
          ae[q] = d >= 0 ? x[d] : dofs.constrained_value(tri[static_cast<size_t>(q)]);
        }
        const Vec2 b = c * ae;
        const MaterialLaw& law = setup.laws.law(mesh.regions[static_cast<size_t>(e)]);
        const Vec3 fe = area[static_cast<size_t>(e)] * (c.transpose() * law.h(b));
        pattern.scatter_vector(e, fe, r);
        if (abs_sum) pattern.scatter_vector(e, fe.cwiseAbs(), *abs_sum);
        if (jac) pattern.scatter_matrix(e, area[static_cast<size_t>(e)] * (c.transpose() * law.tangent(b) * c), *jac);
      }
      const Vec dx = x - a_prev;
      r += mass * dx / dt;
      for (int g = 0; g < ngr; ++g)
        r -= m_grain[static_cast<size_t>(g)] *
             (m_grain[static_cast<size_t>(g)].dot(dx) / (S_grain[static_cast<size_t>(g)] * dt));
      r -= f;
      return r;
    };
    try {
      for (int j = 0;; ++j) {
        ++evals;
        SpMat jac = pattern.zero_matrix();
        Vec abs_sum = Vec::Zero(n);
        const Vec r = evaluate(a, &jac, &abs_sum);
        const double rn = r.norm();
        if (rn <= std::max(setup.newton.tol * ref, 1e-12 * (abs_sum.norm() + f.norm()))) break;
        if (j + 1 >= setup.newton.max_iter) {
          std::ostringstream os;
          os << "reference Newton did not converge in " << setup.newton.max_iter << " evaluations (residual " << rn << ")";
          throw ConvergenceFailure(os.str(), rn);
        }
        for (Eigen::Index q = 0; q < mass.nonZeros(); ++q) jac.valuePtr()[q] += mass.valuePtr()[q] / dt;
        Vec delta;
        if (ngr == 0) {
          delta = solve_linear(SparseSystem{jac, -r}, LinearSolverKind::LU);
        } else {
          // Bordered system [J, m/dt; m^T/dt, S/dt] [x; z] = [-r; 0] eliminates the grain means exactly.
          std::vector<Eigen::Triplet<double>> trip;
          trip.reserve(static_cast<size_t>(jac.nonZeros()) + 2 * static_cast<size_t>(n) + static_cast<size_t>(ngr));
          for (int col = 0; col < jac.outerSize(); ++col)
            for (SpMat::InnerIterator it(jac, col); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
          for (int g = 0; g < ngr; ++g) {
            const Vec& m = m_grain[static_cast<size_t>(g)];
            for (int i = 0; i < n; ++i) {
              if (m[i] == 0.0) continue;
              trip.emplace_back(i, n + g, m[i] / dt);
              trip.emplace_back(n + g, i, m[i] / dt);
            }
            trip.emplace_back(n + g, n + g, S_grain[static_cast<size_t>(g)] / dt);
          }
          SpMat big(n + ngr, n + ngr);
          big.setFromTriplets(trip.begin(), trip.end());
          Vec rhs = Vec::Zero(n + ngr);
          rhs.head(n) = -r;
          delta = solve_linear(SparseSystem{big, rhs}, LinearSolverKind::LU).head(n);
        }
        // Backtracking on the residual norm: full steps from far-off iterates
        // overshoot on the exponential branch of the Brauer law.
        double step = 1.0;
        for (int ls = 0;; ++ls) {
          Vec trial = a + step * delta;
          if (ls == kMaxBacktracks) {
            a = std::move(trial);
            break;
          }
          if (trial.allFinite()) {
            const double rt = evaluate(trial, nullptr, nullptr).norm();
            if (std::isfinite(rt) && rt <= (1.0 - 1e-4 * step) * rn) {
              a = std::move(trial);
              break;
            }
          }
          step *= 0.5;
        }
      }
    } catch (...) {
      rethrow_with_context("reference time step " + std::to_string(k));
    }
    run.newton_counts.push_back(evals);
    run.waveform.set(k, a);
    run.qoi.push(t, resolved_joule_losses(mesh, dofs, run.element_sigma, a_prev, a, dt, grains),
                 resolved_energy(mesh, dofs, setup.laws, a));
    a_prev = a;
  }
  return run;
}

}  // namespace mqshmm
