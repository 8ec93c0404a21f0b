#include "mqshmm/problem.hpp"

#include <chrono>
#include <thread>

#include "mqshmm/errors.hpp"

namespace mqshmm {

void RunConfig::validate() const {
  if (grains < 1) throw ConfigError("grains must be >= 1");
  geometry.validate();
  if (cell_n < 2) throw ConfigError("cell_n must be >= 2");
  if (!(cell_fill > 0.0 && cell_fill < 1.0)) throw ConfigError("cell fill must lie in (0,1)");
  if (!(alpha > 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) throw ConfigError("invalid Brauer parameters");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  if (!(mu_r_ins > 0.0)) throw ConfigError("mu_r_ins must be positive");
  source.validate();
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (n_steps_macro < 1 || n_steps_meso < 1 || n_windows < 1) throw ConfigError("step and window counts must be >= 1");
  if (n_steps_macro % n_windows != 0) throw ConfigError("n_steps_macro must be divisible by n_windows");
  if (n_steps_meso % n_steps_macro != 0) throw ConfigError("n_steps_meso must be an integer multiple of n_steps_macro");
  if (!(newton_tol > 0.0) || !(cell_newton_tol > 0.0) || newton_max < 1 || cell_newton_max < 1)
    throw ConfigError("invalid Newton settings");
  if (!(wr_tol >= 0.0) || wr_max < 1) throw ConfigError("invalid waveform-relaxation settings");
  if (!(fd_delta >= 0.0)) throw ConfigError("fd_delta must be non-negative");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (ref_refinement < 1 || ref_steps < 0) throw ConfigError("invalid reference settings");
  if (!(comm_delay_us >= 0.0)) throw ConfigError("comm_delay_us must be non-negative");
}

MaterialSet material_set(const RunConfig& cfg) {
  MaterialSet m;
  m.grain = MaterialLaw::brauer(cfg.alpha, cfg.beta, cfg.gamma);
  m.insulation = MaterialLaw::linear(kNu0 / cfg.mu_r_ins);
  m.air = MaterialLaw::linear(kNu0);
  m.inductor = MaterialLaw::linear(kNu0);
  return m;
}

CellOptions cell_options(const RunConfig& cfg) {
  const MaterialSet m = material_set(cfg);
  CellOptions o;
  o.layout = SquareInclusion{cfg.cell_fill};
  o.n_per_side = cfg.cell_n;
  o.grain_law = m.grain;
  o.insulation_law = m.insulation;
  o.conductivity = ConductivityField::physical(cfg.sigma);
  o.period = cfg.period();
  return o;
}

NewtonOptions cell_newton(const RunConfig& cfg) { return {cfg.cell_newton_tol, cfg.cell_newton_max}; }
MacroNewtonOptions macro_newton(const RunConfig& cfg) { return {cfg.newton_tol, cfg.newton_max}; }

Problem build_problem(const RunConfig& cfg) {
  cfg.validate();
  Problem p;
  p.cfg = cfg;
  GeometryParams g = cfg.geometry;
  g.grain_fill = cfg.cell_fill;
  p.cfg.geometry = g;
  p.macro = MacroModel::build(generate_macro_mesh(cfg.grains, g), material_set(cfg));
  p.cell = CellModel::build(cell_options(cfg));
  return p;
}

void emulate_communication(double delay_us) {
  if (delay_us <= 0.0) return;
  const auto until = std::chrono::steady_clock::now() + std::chrono::nanoseconds(static_cast<long>(delay_us * 1e3));
  while (std::chrono::steady_clock::now() < until) std::this_thread::yield();
}

}  // namespace mqshmm
