#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "mqshmm/cost.hpp"
#include "mqshmm/driver_monolithic.hpp"
#include "mqshmm/driver_wr.hpp"
#include "mqshmm/errors.hpp"
#include "test_support.hpp"

using namespace mqshmm;
using namespace mqshmm::testing;
using Catch::Approx;

namespace {
// Largest sample-wise deviation relative to the peak sample norm of `b`.
double rel_diff(const Waveform& a, const Waveform& b) {
  double peak = 0.0, dev = 0.0;
  for (int k = 0; k < b.n_samples(); ++k) {
    peak = std::max(peak, b[k].norm());
    dev = std::max(dev, (a[k] - b[k]).norm());
  }
  return dev / std::max(peak, 1e-300);
}

Waveform filled(const MacroModel& m, int n, double t_end, const std::function<Vec(double)>& f) {
  Waveform w(0.0, t_end, n, m.n_free());
  for (int k = 0; k <= n; ++k) w.set(k, f(w.time(k)));
  return w;
}

Vec pattern(const MacroModel& m) {
  Vec v(m.n_free());
  for (int i = 0; i < m.n_free(); ++i) v[i] = std::sin(0.37 * i) + 0.1 * i / m.n_free();
  return v;
}
}  // namespace

TEST_CASE("zero source: one iteration, zero waveforms", "[wr]") {
  RunConfig cfg = tiny_config(3);
  cfg.source.j_s0 = 0.0;
  const WrRunReport r = run_wr(cfg);
  REQUIRE(r.iterations_per_window.size() == 1);
  CHECK(r.iterations_per_window[0] == 1);
  CHECK(r.converged());
  for (int k = 0; k <= 3; ++k) CHECK(r.waveform[k].norm() == 0.0);
  CHECK(audit_costs(r).discrepancy() == 0);
}

TEST_CASE("linear materials: WR matches the monolithic waveform", "[wr]") {
  RunConfig cfg = tiny_config(4);
  cfg.source.j_s0 = 1e9;
  cfg.wr_tol = 1e-10;
  cfg.wr_max = 40;
  cfg.newton_tol = 1e-11;
  cfg.cell_newton_tol = 1e-12;
  const Problem p = linear_homogeneous_problem(cfg, 600.0);
  const WrRunReport w = run_wr(p, WindowPlan::from_config(p.cfg));
  const MonolithicRunReport m = run_monolithic(p);
  CHECK(w.converged());
  CHECK(rel_diff(w.waveform, m.waveform) <= 1e-9);
}

TEST_CASE("Brauer tiny instance: contraction towards the monolithic solution", "[wr]") {
  RunConfig cfg = tiny_config(6);
  cfg.wr_tol = 1e-9;
  cfg.wr_max = 30;
  const Problem p = build_problem(cfg);
  const WrRunReport w = run_wr(p, WindowPlan::from_config(cfg));
  const MonolithicRunReport m = run_monolithic(p);
  REQUIRE(w.converged());
  CHECK(audit_costs(w).discrepancy() == 0);
  CHECK(rel_diff(w.waveform, m.waveform) <= 1e-6);
  // Field changes decrease across iterations (l >= 2).
  for (size_t i = 2; i < w.iterations.size(); ++i) {
    CHECK(w.iterations[i].err_b < w.iterations[i - 1].err_b);
    CHECK(w.iterations[i].gate < w.iterations[i - 1].gate);
  }
  // The first field-change record is normalized by the first iterate.
  CHECK(w.iterations[0].b_normalized_by_first);
}

TEST_CASE("two windows: Gauss-Seidel schedule and seeding", "[wr]") {
  RunConfig cfg = tiny_config(4);
  cfg.n_windows = 2;
  cfg.wr_tol = 1e-9;
  cfg.wr_max = 30;
  const Problem p = build_problem(cfg);
  const WrRunReport w = run_wr(p, WindowPlan::from_config(cfg));
  REQUIRE(w.iterations_per_window.size() == 2);
  int expect_window = 0, expect_l = 1;
  for (const auto& it : w.iterations) {
    if (it.window != expect_window) {
      CHECK(it.window == expect_window + 1);
      CHECK(expect_l - 1 == w.iterations_per_window[static_cast<size_t>(expect_window)]);
      expect_window = it.window;
      expect_l = 1;
    }
    CHECK(it.l == expect_l);
    ++expect_l;
  }
  // Window 2 starts from window 1's final state.
  const WrIterationRecord* first_w1 = nullptr;
  const WrIterationRecord* last_w0 = nullptr;
  for (const auto& it : w.iterations) {
    if (it.window == 0) last_w0 = &it;
    if (it.window == 1 && !first_w1) first_w1 = &it;
  }
  REQUIRE(first_w1);
  REQUIRE(last_w0);
  CHECK(first_w1->waveform[0] == last_w0->waveform[last_w0->waveform.n_steps()]);
  CHECK(w.waveform[2] == last_w0->waveform[last_w0->waveform.n_steps()]);
  // Agreement with the monolithic solution once converged.
  const MonolithicRunReport m = run_monolithic(p);
  CHECK(rel_diff(w.waveform, m.waveform) <= 1e-6);
  CHECK(audit_costs(w).discrepancy() == 0);
}

TEST_CASE("multirate WR converges and is audited", "[wr]") {
  RunConfig cfg = tiny_config(3);
  cfg.n_steps_meso = 9;
  const WrRunReport w = run_wr(cfg);
  CHECK(w.converged());
  CHECK(w.meso_steps_per_window == 9);
  CHECK(audit_costs(w).discrepancy() == 0);
}

TEST_CASE("window plan validation", "[wr]") {
  WindowPlan p;
  p.macro_steps = 10;
  p.meso_steps = 15;
  CHECK_THROWS(p.validate());
  p.meso_steps = 30;
  CHECK_NOTHROW(p.validate());
  p.n_windows = 3;
  CHECK_THROWS(p.validate());
}

TEST_CASE("downscaling: constant and linear macro waveforms", "[wr]") {
  const Problem p = build_problem(tiny_config(4));
  const MacroModel& m = *p.macro;
  const Vec a0 = pattern(m);
  const Waveform constant = filled(m, 4, 1e-5, [&](double) { return a0; });
  for (const auto& s : downscale_waveform(m, constant, 0, 12, 1.0)) {
    CHECK(s.db_M_dt.norm() == 0.0);
    CHECK(s.da_M_dt == 0.0);
  }
  const double rate = 3e4;
  const Waveform linear = filled(m, 4, 1e-5, [&](double t) { Vec v = a0 * (1.0 + rate * t); return v; });
  const int g = 2;
  const int tri = m.gauss_element(g);
  const Vec2 b0 = m.element_b(a0, tri);
  const double mean0 = m.element_a(a0, tri);
  const auto src = downscale_waveform(m, linear, g, 12, 1.0);
  REQUIRE(src.size() == 13);
  for (int i = 0; i <= 12; ++i) {
    const double t = 1e-5 * i / 12.0;
    const auto& s = src[static_cast<size_t>(i)];
    CHECK((s.b_M - b0 * (1.0 + rate * t)).norm() <= 1e-10 * b0.norm());
    CHECK((s.db_M_dt - b0 * rate).norm() <= 1e-8 * rate * b0.norm());
    CHECK(s.da_M_dt == Approx(mean0 * rate).epsilon(1e-8));
  }
}

TEST_CASE("downscaling: first-order error for a sinusoidal waveform", "[wr]") {
  const Problem p = build_problem(tiny_config(4));
  const MacroModel& m = *p.macro;
  const Vec a0 = pattern(m);
  const double T = 2e-5, w = 2 * 3.14159265358979 / T;
  const int g = 1;
  const Vec2 b0 = m.element_b(a0, m.gauss_element(g));
  auto err = [&](int n) {
    const Waveform wf = filled(m, n, T, [&](double t) { Vec v = a0 * std::sin(w * t); return v; });
    const auto src = downscale_waveform(m, wf, g, 100, 1.0);
    double e = 0;
    for (int i = 1; i <= 100; ++i) {
      const double t = T * i / 100.0;
      e = std::max(e, (src[static_cast<size_t>(i)].db_M_dt - b0 * w * std::cos(w * t)).norm());
    }
    return e;
  };
  const double e10 = err(10), e50 = err(50);
  CHECK(e10 / e50 == Approx(5.0).margin(1.5));
}

TEST_CASE("field error metric examples", "[wr]") {
  Waveform init(0, 1, 3, 4), prev(0, 1, 3, 4);
  for (int k = 0; k <= 3; ++k) {
    init.set(k, Vec::Constant(4, 2.0 + k));
    prev.set(k, Vec::Constant(4, -1.0 * k));
  }
  CHECK(wr_error_metrics(prev, prev, init, 2) == 0.0);
  Waveform cur(0, 1, 3, 4);
  for (int k = 0; k <= 3; ++k) cur.set(k, prev[k] + 0.1 * init[k]);
  CHECK(wr_error_metrics(prev, cur, init, 2) == Approx(0.1).epsilon(1e-14));
  CHECK(wr_error_metrics(prev, cur, init, 1) == Approx(0.1).epsilon(1e-14));
  const Waveform zero(0, 1, 3, 4);
  CHECK_THROWS_AS(wr_error_metrics(prev, cur, zero, 2), UndefinedNorm);
  CHECK_THROWS_AS(wr_error_metrics(prev, Waveform(0, 1, 4, 4), init, 2), Inconsistency);
  CHECK(waveform_linf(init, 2) == Approx(5.0 * std::sqrt(2.0)));
}
