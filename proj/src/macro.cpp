#include "mqshmm/macro.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

double SourceSpec::s(double t) const { return std::sin(2.0 * kPi * f * t); }

void SourceSpec::validate() const {
  if (!(f > 0.0)) throw ConfigError("source frequency must be positive");
  if (!std::isfinite(j_s0)) throw ConfigError("source amplitude must be finite");
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Exact: return "exact";
    case Provenance::FiniteDifference: return "finite-difference";
    case Provenance::FrozenWaveform: return "frozen-waveform";
  }
  return "?";
}

std::shared_ptr<const MacroModel> MacroModel::build(Mesh2D mesh, MaterialSet laws, MacroOptions options) {
  mesh.validate();
  std::shared_ptr<MacroModel> m(new MacroModel());
  m->mesh_ = std::move(mesh);
  m->laws_ = std::move(laws);
  m->options_ = std::move(options);
  m->dofs_ = DofMap::dirichlet(m->mesh_, m->options_.dirichlet, 0.0);
  m->pattern_ = AssemblyPattern(m->mesh_, m->dofs_);
  const int nt = m->mesh_.num_triangles();
  m->area_.resize(static_cast<size_t>(nt));
  m->curl_.resize(static_cast<size_t>(nt));
  m->gauss_of_element_.assign(static_cast<size_t>(nt), -1);
  m->mass_ = m->pattern_.zero_matrix();
  m->l2_mass_ = m->pattern_.zero_matrix();
  m->source_load_ = Vec::Zero(m->dofs_.n_free());
  for (int t = 0; t < nt; ++t) {
    const TrianglePoints p = triangle_points(m->mesh_, t);
    const ElementGeometry g = element_geometry(p);
    m->area_[static_cast<size_t>(t)] = g.area;
    m->curl_[static_cast<size_t>(t)] = g.curl();
    const Region r = m->mesh_.regions[static_cast<size_t>(t)];
    if (r == Region::Homogenized) {
      m->gauss_of_element_[static_cast<size_t>(t)] = static_cast<int>(m->gauss_elements_.size());
      m->gauss_elements_.push_back(t);
      if (m->options_.sigma_M > 0.0) m->pattern_.scatter_matrix(t, element_mass(p, m->options_.sigma_M), m->mass_);
    }
    m->pattern_.scatter_matrix(t, element_mass(p, 1.0), m->l2_mass_);
    if (r == Region::Inductor) m->pattern_.scatter_vector(t, Vec3::Constant(g.area / 3.0), m->source_load_);
  }
  return m;
}

Vec2 MacroModel::element_b(const Vec& alpha, int t) const {
  const auto& tri = mesh_.triangles[static_cast<size_t>(t)];
  Vec3 a;
  for (int k = 0; k < 3; ++k) {
    const int d = dofs_.dof(tri[static_cast<size_t>(k)]);
    a[k] = d >= 0 ? alpha[d] : dofs_.constrained_value(tri[static_cast<size_t>(k)]);
  }
  return curl_[static_cast<size_t>(t)] * a;
}

double MacroModel::element_a(const Vec& alpha, int t) const {
  const auto& tri = mesh_.triangles[static_cast<size_t>(t)];
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const int d = dofs_.dof(tri[static_cast<size_t>(k)]);
    s += d >= 0 ? alpha[d] : dofs_.constrained_value(tri[static_cast<size_t>(k)]);
  }
  return s / 3.0;
}

std::vector<Vec2> MacroModel::gauss_b(const Vec& alpha) const {
  std::vector<Vec2> b(gauss_elements_.size());
  for (size_t g = 0; g < gauss_elements_.size(); ++g) b[g] = element_b(alpha, gauss_elements_[g]);
  return b;
}

double MacroModel::direct_energy(const Vec& alpha) const {
  double w = 0.0;
  for (int t = 0; t < mesh_.num_triangles(); ++t) {
    const Region r = mesh_.regions[static_cast<size_t>(t)];
    if (r == Region::Homogenized) continue;
    w += area_[static_cast<size_t>(t)] * coenergy_density(laws_.law(r), element_b(alpha, t));
  }
  return w;
}

double MacroModel::l2_norm(const Vec& alpha) const { return std::sqrt(std::max(0.0, alpha.dot(l2_mass_ * alpha))); }

MacroAssembly assemble_macro(const MacroModel& model, const MacroState& prev, const MacroState& state,
                             const GaussPointTable& laws, double dt, const SourceSpec& source, bool want_jacobian) {
  if (!(dt > 0.0)) throw NumericDomain("time step must be positive");
  if (static_cast<int>(laws.size()) != model.n_gauss()) {
    std::ostringstream os;
    os << "constitutive table covers " << laws.size() << " of " << model.n_gauss() << " Gauss points";
    throw CoverageError(os.str());
  }
  const int n = model.n_free();
  if (state.alpha.size() != n || prev.alpha.size() != n) throw Inconsistency("macro state has wrong dimension");
  MacroAssembly out;
  out.residual = Vec::Zero(n);
  Vec abs_sum = Vec::Zero(n);
  if (want_jacobian) out.jacobian = model.pattern().zero_matrix();
  const Mesh2D& mesh = model.mesh();
  int g = 0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Region r = mesh.regions[static_cast<size_t>(t)];
    const Vec2 b = model.element_b(state.alpha, t);
    Vec2 h;
    Mat2 d;
    if (r == Region::Homogenized) {
      const GaussPointLaw& gl = laws[static_cast<size_t>(g++)];
      if (!gl.valid) throw CoverageError("missing constitutive data at Gauss point " + std::to_string(g - 1));
      h = gl.h_M;
      d = gl.dh_M_db_M;
    } else {
      const MaterialLaw& law = model.laws().law(r);
      h = law.h(b);
      if (want_jacobian) d = law.tangent(b);
    }
    const Mat23& c = model.element_curl(t);
    const double a = model.element_area(t);
    const Vec3 f = a * (c.transpose() * h);
    model.pattern().scatter_vector(t, f, out.residual);
    model.pattern().scatter_vector(t, f.cwiseAbs(), abs_sum);
    if (want_jacobian) model.pattern().scatter_matrix(t, a * (c.transpose() * d * c), out.jacobian);
  }
  if (model.options().sigma_M > 0.0) {
    out.residual += model.mass_matrix() * (state.alpha - prev.alpha) / dt;
    if (want_jacobian) {
      const SpMat& m = model.mass_matrix();
      for (Eigen::Index k = 0; k < m.nonZeros(); ++k) out.jacobian.valuePtr()[k] += m.valuePtr()[k] / dt;
    }
  }
  const Vec load = (source.j_s0 * source.s(state.t)) * model.unit_source_load();
  out.residual -= load;
  out.abs_scale = abs_sum.norm() + load.norm();
  return out;
}

Vec macro_residual(const MacroModel& model, const MacroState& prev, const MacroState& state,
                   const GaussPointTable& laws, double dt, const SourceSpec& source) {
  return assemble_macro(model, prev, state, laws, dt, source, false).residual;
}

MacroState macro_newton_step(const MacroModel& model, const MacroState& prev, const MacroState& state,
                             const GaussPointTable& laws, double dt, const SourceSpec& source) {
  const MacroAssembly a = assemble_macro(model, prev, state, laws, dt, source, true);
  SparseSystem sys{a.jacobian, -a.residual};
  MacroState next = state;
  next.alpha += solve_linear(sys, LinearSolverKind::LU);
  return next;
}

MacroRunResult backward_euler_run(const MacroModel& model, const MacroState& initial, double t_end, int n_steps,
                                  const SourceSpec& source, const MaterialProvider& provider,
                                  const MacroNewtonOptions& newton, const StepCallback& on_step,
                                  const Waveform* guess) {
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a) { return std::chrono::duration<double>(Clock::now() - a).count(); };
  if (n_steps < 1) throw Inconsistency("backward_euler_run needs n_steps >= 1");
  source.validate();
  MacroRunResult out;
  out.waveform = Waveform(initial.t, t_end, n_steps, model.n_free());
  out.waveform.set(0, initial.alpha);
  const double ref = std::abs(source.j_s0) * model.unit_source_load().norm();
  MacroState prev = initial;
  GaussPointTable table(static_cast<size_t>(model.n_gauss()));
  for (int k = 1; k <= n_steps; ++k) {
    const double t = out.waveform.time(k);
    const double dt = t - prev.t;
    MacroState state = prev;
    state.t = t;
    if (guess) {
      if (guess->n_steps() != n_steps || guess->dim() != model.n_free()) throw Inconsistency("initial-guess waveform does not match the time grid");
      state.alpha = (*guess)[k];
    }
    std::vector<double> trace;
    try {
      for (int j = 0;; ++j) {
        ProviderContext ctx{k, j, t, dt, &prev, &state};
        for (auto& e : table) e.valid = false;
        auto t0 = Clock::now();
        provider(ctx, model.gauss_b(state.alpha), table);
        out.provider_seconds += seconds(t0);
        t0 = Clock::now();
        const MacroAssembly a = assemble_macro(model, prev, state, table, dt, source, true);
        out.assemble_seconds += seconds(t0);
        const double rn = a.residual.norm();
        trace.push_back(rn);
        if (rn <= std::max(newton.tol * ref, 1e-12 * a.abs_scale)) break;
        if (j + 1 >= newton.max_iter) {
          std::ostringstream os;
          os << "macro Newton did not converge in " << newton.max_iter << " evaluations (residual " << rn << ")";
          throw ConvergenceFailure(os.str(), rn);
        }
        t0 = Clock::now();
        SparseSystem sys{a.jacobian, -a.residual};
        state.alpha += solve_linear(sys, LinearSolverKind::LU);
        out.solve_seconds += seconds(t0);
      }
    } catch (...) {
      rethrow_with_context("time step " + std::to_string(k));
    }
    out.newton_evaluations.push_back(static_cast<int>(trace.size()));
    out.residual_traces.push_back(std::move(trace));
    out.waveform.set(k, state.alpha);
    if (on_step) on_step(k, state);
    prev = state;
  }
  return out;
}

MaterialProvider constant_law_provider(const MaterialLaw& law) {
  return [law](const ProviderContext&, const std::vector<Vec2>& b, GaussPointTable& table) {
    for (size_t g = 0; g < b.size(); ++g) {
      table[g].h_M = law.h(b[g]);
      table[g].dh_M_db_M = law.tangent(b[g]);
      table[g].provenance = Provenance::Exact;
      table[g].valid = true;
    }
  };
}

}  // namespace mqshmm
