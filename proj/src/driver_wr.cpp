#include "mqshmm/driver_wr.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <string>

#include "mqshmm/errors.hpp"

namespace mqshmm {

namespace {
using Clock = std::chrono::steady_clock;
double since(Clock::time_point a) { return std::chrono::duration<double>(Clock::now() - a).count(); }

double elementwise_max(const Vec& v, int components) {
  double m = 0.0;
  for (Eigen::Index e = 0; e + components <= v.size(); e += components) m = std::max(m, v.segment(e, components).norm());
  return m;
}

// Relative field change with the initial-iterate normalization; when the
// initial iterate vanishes, the first iterate normalizes instead.
double field_error(const Waveform& prev, const Waveform& cur, const Waveform& init, const Waveform& first,
                   int components, bool& used_first) {
  used_first = false;
  try {
    return wr_error_metrics(prev, cur, init, components);
  } catch (const UndefinedNorm&) {
  }
  used_first = true;
  try {
    return wr_error_metrics(prev, cur, first, components);
  } catch (const UndefinedNorm&) {
  }
  // Both normalizations vanish: the fields are identically zero unless the change is not.
  double num = 0.0;
  for (int k = 0; k < cur.n_samples(); ++k) num = std::max(num, elementwise_max(cur[k] - prev[k], components));
  return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}
}  // namespace

void WindowPlan::validate() const {
  if (!(t_end > t0)) throw ConfigError("window plan: empty time interval");
  if (n_windows < 1 || macro_steps < 1 || meso_steps < 1) throw ConfigError("window plan: counts must be >= 1");
  if (macro_steps % n_windows != 0) throw ConfigError("window plan: macro steps must split evenly into windows");
  if (meso_steps % macro_steps != 0) throw Inconsistency("window plan: meso grid is not nested in the macro grid");
  if (max_iter < 1) throw ConfigError("window plan: at least one iteration is required");
  if (!(tol >= 0.0)) throw ConfigError("window plan: tolerance must be non-negative");
}

WindowPlan WindowPlan::from_config(const RunConfig& cfg) {
  WindowPlan p;
  p.t0 = 0.0;
  p.t_end = cfg.t_end;
  p.n_windows = cfg.n_windows;
  p.macro_steps = cfg.n_steps_macro;
  p.meso_steps = cfg.n_steps_meso;
  p.max_iter = cfg.wr_max;
  p.tol = cfg.wr_tol;
  return p;
}

bool WrRunReport::converged() const {
  for (bool c : window_converged)
    if (!c) return false;
  return true;
}

std::vector<MacroSource> downscale_waveform(const MacroModel& model, const Waveform& macro_wf, int gauss_id,
                                            int meso_steps, double kappa) {
  const int NM = macro_wf.n_steps();
  if (gauss_id < 0 || gauss_id >= model.n_gauss()) throw RangeError("Gauss point index out of range");
  if (macro_wf.dim() != model.n_free()) throw Inconsistency("macro waveform dimension does not match the model");
  if (meso_steps < NM || meso_steps % NM != 0) throw Inconsistency("meso grid is not nested in the macro grid");
  const int r = meso_steps / NM;
  const int t = model.gauss_element(gauss_id);
  const double dtM = macro_wf.dt();
  std::vector<Vec2> b(static_cast<size_t>(NM + 1));
  std::vector<double> a(static_cast<size_t>(NM + 1));
  for (int k = 0; k <= NM; ++k) {
    b[static_cast<size_t>(k)] = model.element_b(macro_wf[k], t);
    a[static_cast<size_t>(k)] = model.element_a(macro_wf[k], t);
  }
  std::vector<MacroSource> out(static_cast<size_t>(meso_steps + 1));
  for (int i = 0; i <= meso_steps; ++i) {
    const int K = i == 0 ? 1 : (i + r - 1) / r;  // macro interval containing t_i
    const int k0 = i / r;
    const double w = static_cast<double>(i - k0 * r) / r;
    MacroSource& s = out[static_cast<size_t>(i)];
    s.b_M = w == 0.0 ? b[static_cast<size_t>(k0)]
                     : Vec2((1.0 - w) * b[static_cast<size_t>(k0)] + w * b[static_cast<size_t>(k0 + 1)]);
    s.db_M_dt = (b[static_cast<size_t>(K)] - b[static_cast<size_t>(K - 1)]) / dtM;
    s.da_M_dt = (a[static_cast<size_t>(K)] - a[static_cast<size_t>(K - 1)]) / dtM;
    s.kappa = kappa;
  }
  return out;
}

Waveform element_b_waveform(const MacroModel& model, const Waveform& wf) {
  const int nt = model.mesh().num_triangles();
  Waveform out(wf.t0(), wf.t_end(), wf.n_steps(), 2 * nt);
  for (int k = 0; k < wf.n_samples(); ++k) {
    Vec v(2 * nt);
    for (int e = 0; e < nt; ++e) v.segment<2>(2 * e) = model.element_b(wf[k], e);
    out.set(k, v);
  }
  return out;
}

Waveform element_dta_waveform(const MacroModel& model, const Waveform& wf) {
  const int nt = model.mesh().num_triangles();
  Waveform out(wf.t0(), wf.t_end(), wf.n_steps(), nt);
  const double dt = wf.dt();
  for (int k = 1; k < wf.n_samples(); ++k) {
    Vec v(nt);
    for (int e = 0; e < nt; ++e) v[e] = (model.element_a(wf[k], e) - model.element_a(wf[k - 1], e)) / dt;
    out.set(k, v);
  }
  return out;
}

double waveform_linf(const Waveform& wf, int components) {
  if (components < 1 || wf.dim() % components != 0) throw Inconsistency("component count does not divide the dimension");
  double m = 0.0;
  for (int k = 0; k < wf.n_samples(); ++k) m = std::max(m, elementwise_max(wf[k], components));
  return m;
}

double wr_error_metrics(const Waveform& wf_prev, const Waveform& wf_cur, const Waveform& wf_init, int components) {
  if (!wf_prev.same_grid(wf_cur) || !wf_prev.same_grid(wf_init) || wf_prev.dim() != wf_cur.dim() ||
      wf_prev.dim() != wf_init.dim())
    throw Inconsistency("waveforms for the field error live on different grids");
  const double den = waveform_linf(wf_init, components);
  if (!(den > 0.0)) throw UndefinedNorm("field error normalization vanishes");
  double num = 0.0;
  for (int k = 0; k < wf_cur.n_samples(); ++k)
    num = std::max(num, elementwise_max(wf_cur[k] - wf_prev[k], components));
  return num / den;
}

WrRunReport run_wr(const RunConfig& cfg) { return run_wr(build_problem(cfg), WindowPlan::from_config(cfg)); }

WrRunReport run_wr(const Problem& problem, const WindowPlan& plan) {
  const auto start = Clock::now();
  plan.validate();
  const RunConfig& cfg = problem.cfg;
  const MacroModel& model = *problem.macro;
  const CellModelPtr cell = problem.cell;
  const int ng = model.n_gauss();
  const int nM = model.n_free();
  const int r = plan.ratio();
  const int NM = plan.macro_steps_per_window();
  const int Nm = plan.meso_steps_per_window();
  const NewtonOptions cnewton = cell_newton(cfg);
  const MacroNewtonOptions mnewton = macro_newton(cfg);

  WrRunReport rep;
  rep.n_gauss = ng;
  rep.meso_steps_per_window = Nm;
  rep.waveform = Waveform(plan.t0, plan.t_end, plan.macro_steps, nM);
  std::vector<CellState> committed(static_cast<size_t>(ng), CellState::initial(cell, plan.t0));
  Vec a_start = Vec::Zero(nM);
  double last_loss = 0.0;
  rep.qoi.push(plan.t0, 0.0, homogenized_energy(model, a_start, committed));

  for (int w = 0; w < plan.n_windows; ++w) {
    const double ts = plan.window_start(w), te = plan.window_end(w);
    const double dtm = (te - ts) / Nm;
    // Initial iterate: constant extrapolation of the window start.
    Waveform prev_wf(ts, te, NM, nM);
    for (int k = 0; k <= NM; ++k) prev_wf.set(k, a_start);
    const Waveform b_init = element_b_waveform(model, prev_wf);
    const Waveform dta_init = element_dta_waveform(model, prev_wf);
    Waveform b_first, dta_first;
    std::vector<std::vector<Vec>> cell_wf(static_cast<size_t>(ng)), prev_cell_wf(static_cast<size_t>(ng));
    std::vector<std::vector<double>> loss_density(static_cast<size_t>(ng));
    bool converged = false;
    int l = 0;
    WrIterationRecord* last = nullptr;
    while (l < plan.max_iter) {
      ++l;
      const std::string ctx = "window " + std::to_string(w) + ", WR iteration " + std::to_string(l);
      // (1) cell ensemble over the window with the frozen macro waveform.
      const auto t_meso = Clock::now();
      std::vector<std::exception_ptr> errors(static_cast<size_t>(ng));
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
      for (int g = 0; g < ng; ++g) {
        const size_t kg = static_cast<size_t>(g);
        try {
          const std::vector<MacroSource> src = downscale_waveform(model, prev_wf, g, Nm, cfg.kappa);
          std::vector<Vec> hist(static_cast<size_t>(Nm + 1));
          hist[0] = committed[kg].alpha;
          CellState s = committed[kg];
          std::vector<double> loss(static_cast<size_t>(NM + 1), 0.0);
          for (int i = 1; i <= Nm; ++i) {
            const Vec* guess = prev_cell_wf[kg].empty() ? nullptr : &prev_cell_wf[kg][static_cast<size_t>(i)];
            CellState next = meso_step(s, src[static_cast<size_t>(i)], dtm, cnewton, nullptr, guess);
            if (i % r == 0) loss[static_cast<size_t>(i / r)] = cell_loss_density(s, next, src[static_cast<size_t>(i)], dtm);
            s = std::move(next);
            hist[static_cast<size_t>(i)] = s.alpha;
          }
          cell_wf[kg] = std::move(hist);
          loss_density[kg] = std::move(loss);
        } catch (...) {
          errors[kg] = std::current_exception();
        }
      }
      rep.timings.meso += since(t_meso);
      for (int g = 0; g < ng; ++g) {
        if (!errors[static_cast<size_t>(g)]) continue;
        try {
          std::rethrow_exception(errors[static_cast<size_t>(g)]);
        } catch (...) {
          rethrow_with_context(ctx + ", meso phase, Gauss point " + std::to_string(g));
        }
      }
      rep.counters.meso_solves += static_cast<long>(ng) * Nm;
      const auto t_com = Clock::now();
      for (int g = 0; g < ng; ++g) emulate_communication(cfg.comm_delay_us);
      rep.counters.communications += ng;
      rep.timings.communication += since(t_com);

      // (2) macro transient over the window with the frozen cell waveforms.
      MaterialProvider provider = [&](const ProviderContext& pc, const std::vector<Vec2>& b, GaussPointTable& table) {
        for (int g = 0; g < ng; ++g) {
          const size_t kg = static_cast<size_t>(g);
          const CellState cs{cell, cell_wf[kg][static_cast<size_t>(pc.step * r)], pc.t};
          const UpscaledLaw law = upscale(cs, b[kg]);
          table[kg] = GaussPointLaw{law.h_M, law.dh_M_db_M, Provenance::FrozenWaveform, true};
        }
      };
      MacroRunResult mr;
      try {
        mr = backward_euler_run(model, MacroState{a_start, ts}, te, NM, cfg.source, provider, mnewton, {}, &prev_wf);
      } catch (...) {
        rethrow_with_context(ctx + ", macro phase");
      }
      rep.timings.macro_assemble += mr.assemble_seconds + mr.provider_seconds;
      rep.timings.macro_solve += mr.solve_seconds;
      const Waveform& cur = mr.waveform;

      WrIterationRecord rec;
      rec.window = w;
      rec.l = l;
      for (int n : mr.newton_evaluations) rec.macro_newton_evaluations += n;
      // Quantities of interest on the macro grid of the window.
      rec.qoi.push(ts, last_loss, homogenized_energy(model, a_start, committed));
      for (int k = 1; k <= NM; ++k) {
        double p = 0.0, wm = model.direct_energy(cur[k]);
        for (int g = 0; g < ng; ++g) {
          const size_t kg = static_cast<size_t>(g);
          const int t = model.gauss_element(g);
          p += model.element_area(t) * loss_density[kg][static_cast<size_t>(k)];
          const CellState cs{cell, cell_wf[kg][static_cast<size_t>(k * r)], cur.time(k)};
          wm += model.element_area(t) * cell_energy_density(cs, model.element_b(cur[k], t));
        }
        rec.qoi.push(cur.time(k), p, wm);
      }
      // Convergence gate: L-infinity in time of the spatial L2 norm.
      double num = 0.0, den = 0.0;
      for (int k = 0; k <= NM; ++k) {
        num = std::max(num, model.l2_norm(cur[k] - prev_wf[k]));
        den = std::max(den, model.l2_norm(cur[k]));
      }
      rec.gate = den > 0.0 ? num / den : (num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      // Field errors relative to the initial iterate.
      const Waveform b_cur = element_b_waveform(model, cur), b_prev = element_b_waveform(model, prev_wf);
      const Waveform dta_cur = element_dta_waveform(model, cur), dta_prev = element_dta_waveform(model, prev_wf);
      if (l == 1) {
        b_first = b_cur;
        dta_first = dta_cur;
      }
      rec.err_b = field_error(b_prev, b_cur, b_init, b_first, 2, rec.b_normalized_by_first);
      rec.err_dta = field_error(dta_prev, dta_cur, dta_init, dta_first, 1, rec.dta_normalized_by_first);
      rec.waveform = cur;
      rep.iterations.push_back(std::move(rec));
      last = &rep.iterations.back();
      rep.macro_newton_counts.resize(static_cast<size_t>(w * NM));
      rep.macro_newton_counts.insert(rep.macro_newton_counts.end(), mr.newton_evaluations.begin(),
                                     mr.newton_evaluations.end());

      prev_wf = cur;
      prev_cell_wf = cell_wf;
      if (last->gate <= plan.tol) {
        converged = true;
        break;
      }
    }
    rep.iterations_per_window.push_back(l);
    rep.window_converged.push_back(converged);
    for (int k = 0; k <= NM; ++k) rep.waveform.set(w * NM + k, prev_wf[k]);
    for (int g = 0; g < ng; ++g)
      committed[static_cast<size_t>(g)] = CellState{cell, cell_wf[static_cast<size_t>(g)][static_cast<size_t>(Nm)], te};
    a_start = prev_wf[NM];
    rep.qoi.append(last->qoi, true);
    last_loss = rep.qoi.losses.back();
  }
  rep.final_cells = std::move(committed);
  rep.timings.total = since(start);
  return rep;
}

}  // namespace mqshmm
