#include <catch_amalgamated.hpp>

#include <algorithm>

#include "mqshmm/cost.hpp"
#include "mqshmm/driver_monolithic.hpp"
#include "mqshmm/errors.hpp"
#include "test_support.hpp"

using namespace mqshmm;
using namespace mqshmm::testing;

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
}  // namespace

TEST_CASE("linear homogeneous cells reproduce the single-scale run", "[monolithic]") {
  const double nu = 600.0;
  RunConfig cfg = tiny_config(4);
  cfg.source.j_s0 = 1e9;
  const Problem p = linear_homogeneous_problem(cfg, nu);
  const MonolithicRunReport r = run_monolithic(p);
  const MacroRunResult single =
      backward_euler_run(*p.macro, MacroState{Vec::Zero(p.macro->n_free()), 0.0}, cfg.t_end, cfg.n_steps_macro,
                         cfg.source, constant_law_provider(MaterialLaw::linear(nu)), macro_newton(cfg));
  CHECK(rel_diff(r.waveform, single.waveform) <= 1e-10);
  // A linear problem needs one update; the converged check is a second evaluation.
  for (int n : r.newton_counts) CHECK(n == 2);
  long nr = 0;
  for (int n : r.newton_counts) nr += n;
  CHECK(r.counters.meso_solves == nr * r.n_gauss * 3);
  CHECK(audit_costs(r).discrepancy() == 0);
}

TEST_CASE("zero source: zero waveform and zero corrections", "[monolithic]") {
  RunConfig cfg = tiny_config(3);
  cfg.source.j_s0 = 0.0;
  const MonolithicRunReport r = run_monolithic(cfg);
  for (int k = 0; k <= 3; ++k) CHECK(r.waveform[k].norm() == 0.0);
  for (const auto& c : r.final_cells) CHECK(c.alpha.norm() == 0.0);
  for (int n : r.newton_counts) CHECK(n == 1);
  for (double p : r.qoi.losses) CHECK(p == 0.0);
  CHECK(audit_costs(r).discrepancy() == 0);
}

TEST_CASE("Brauer tiny instance: Newton counts, positivity, audit, determinism", "[monolithic]") {
  RunConfig cfg = tiny_config(10);
  cfg.t_end = 2e-5;
  const Problem p = build_problem(cfg);
  CHECK(p.macro->n_gauss() >= 16);
  const MonolithicRunReport r = run_monolithic(p);
  for (int n : r.newton_counts) CHECK(n <= 5);
  for (double v : r.qoi.losses) CHECK(v >= 0.0);
  CHECK(*std::max_element(r.qoi.losses.begin(), r.qoi.losses.end()) > 0.0);
  CHECK(audit_costs(r).discrepancy() == 0);
  const MonolithicRunReport again = run_monolithic(p);
  for (int k = 0; k <= cfg.n_steps_macro; ++k) CHECK(again.waveform[k] == r.waveform[k]);
  CHECK(again.qoi.losses == r.qoi.losses);
}

TEST_CASE("mismatched grids are rejected", "[monolithic]") {
  RunConfig cfg = tiny_config(2);
  cfg.n_steps_meso = 4;
  CHECK_THROWS_AS(run_monolithic(cfg), ConfigError);
}

TEST_CASE("coupled Newton: linear instance matches the monolithic run", "[fullnewton]") {
  RunConfig cfg = tiny_config(2);
  cfg.grains = 1;
  cfg.geometry.macro_div = 1;
  cfg.cell_n = 4;
  cfg.source.j_s0 = 1e9;
  const Problem p = linear_homogeneous_problem(cfg, 600.0);
  const FullNewtonReport f = run_monolithic_fullnewton(p);
  const MonolithicRunReport m = run_monolithic(p);
  CHECK(rel_diff(f.waveform, m.waveform) <= 1e-10);
}

TEST_CASE("coupled Newton: Schur and assembled updates agree", "[fullnewton]") {
  RunConfig cfg = tiny_config(2);
  cfg.grains = 1;
  cfg.geometry.macro_div = 1;
  cfg.cell_n = 4;
  cfg.newton_tol = 1e-6;
  cfg.cell_newton_tol = 1e-8;
  const Problem p = build_problem(cfg);
  CHECK(p.macro->n_gauss() <= 6);
  CHECK(p.cell->n_elements() <= 50);
  const FullNewtonReport f = run_monolithic_fullnewton(p);
  REQUIRE(!f.schur_discrepancy.empty());
  for (double d : f.schur_discrepancy) CHECK(d <= 1e-9);
  // Advancing with the reduced update converges to the same root.
  const FullNewtonReport s = run_monolithic_fullnewton(p, FullNewtonOptions{true, true});
  CHECK(rel_diff(s.waveform, f.waveform) <= 1e-6);
  // And so does the monolithic scheme with its finite-difference tangent.
  const MonolithicRunReport m = run_monolithic(p);
  CHECK(rel_diff(m.waveform, f.waveform) <= 1e-6);
}

TEST_CASE("coupled Newton: budget guard", "[fullnewton]") {
  RunConfig cfg = tiny_config(2);
  cfg.fullnewton_dof_budget = 10;
  CHECK_THROWS_AS(run_monolithic_fullnewton(build_problem(cfg)), BudgetExceeded);
}
