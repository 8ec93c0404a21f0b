// mqshmm: command line front end.
//
//   mqshmm run <config-file> [--mode monolithic|wr|reference|compare|cost] [--out DIR]

#include <CLI11.hpp>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "mqshmm/analysis.hpp"
#include "mqshmm/config.hpp"
#include "mqshmm/cost.hpp"
#include "mqshmm/driver_monolithic.hpp"
#include "mqshmm/driver_wr.hpp"
#include "mqshmm/errors.hpp"
#include "mqshmm/io.hpp"
#include "mqshmm/kernels.hpp"
#include "mqshmm/reference.hpp"

namespace {

using namespace mqshmm;
namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_series(const std::string& dir, const LossSeries& s) {
  write_losses_csv(join(dir, "losses.csv"), s);
  write_energy_csv(join(dir, "energy.csv"), s);
}

void write_macro_fields(const std::string& dir, const MacroModel& model, const Waveform& wf) {
  for (int k = 0; k < wf.n_samples(); ++k)
    write_fields_csv(join(dir, fields_file_name(wf.time(k))), model.mesh(), model.dofs(), wf[k]);
}

// WR convergence rows; global-quantity errors against `target` if given,
// otherwise against the previous iterate.
std::vector<WrConvergenceRow> convergence_rows(const WrRunReport& wr, const LossSeries* target) {
  std::vector<WrConvergenceRow> rows;
  const WrIterationRecord* prev = nullptr;
  for (const auto& it : wr.iterations) {
    WrConvergenceRow r{it.window, it.l, NAN, NAN, it.err_b, it.err_dta};
    const LossSeries* ref = target ? target : (prev && prev->window == it.window ? &prev->qoi : nullptr);
    if (ref) {
      try {
        r.err_losses = relative_error(it.qoi.t, it.qoi.losses, ref->t, ref->losses);
        r.err_energy = relative_error(it.qoi.t, it.qoi.energy, ref->t, ref->energy);
      } catch (const UndefinedNorm&) {
      }
    }
    rows.push_back(r);
    prev = &it;
  }
  return rows;
}

void report_monolithic(const MonolithicRunReport& r) {
  const CostAudit a = audit_costs(r);
  std::cout << "monolithic: " << r.newton_counts.size() << " steps, " << r.counters.meso_solves
            << " cell solves, audit discrepancy " << a.discrepancy() << ", " << r.timings.total << " s\n";
}

void report_wr(const WrRunReport& r) {
  const CostAudit a = audit_costs(r);
  std::cout << "wr: " << r.iterations_per_window.size() << " window(s), iterations:";
  for (int n : r.iterations_per_window) std::cout << ' ' << n;
  std::cout << (r.converged() ? " (converged)" : " (NOT converged)") << ", " << r.counters.meso_solves
            << " cell solves, audit discrepancy " << a.discrepancy() << ", " << r.timings.total << " s\n";
}

int run(const std::string& config_path, const std::string& mode_override, const std::string& out_override) {
  RunConfig cfg = load_config(config_path);
  if (!mode_override.empty()) cfg.mode = mode_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (!valid_mode(cfg.mode)) throw ConfigError("unknown run mode '" + cfg.mode + "'");
  ensure_directory(cfg.out_dir);
  {
    std::ofstream used(join(cfg.out_dir, "config_used.ini"));
    write_config(used, cfg);
  }
  std::cout << "mode " << cfg.mode << ", kernels " << kernels::to_string(kernels::active_isa()) << ", output "
            << cfg.out_dir << '\n';
  const std::string& out = cfg.out_dir;

  if (cfg.mode == "monolithic") {
    const Problem p = build_problem(cfg);
    const MonolithicRunReport r = run_monolithic(p);
    report_monolithic(r);
    write_series(out, r.qoi);
    write_macro_fields(out, *p.macro, r.waveform);
  } else if (cfg.mode == "wr") {
    const Problem p = build_problem(cfg);
    const WrRunReport r = run_wr(p, WindowPlan::from_config(cfg));
    report_wr(r);
    write_series(out, r.qoi);
    write_wr_convergence_csv(join(out, "wr_convergence.csv"), convergence_rows(r, nullptr));
    write_macro_fields(out, *p.macro, r.waveform);
  } else if (cfg.mode == "reference") {
    const ReferenceRun r = run_reference(cfg);
    std::cout << "reference: " << r.mesh.num_triangles() << " triangles, " << r.n_grains << " grains\n";
    write_series(out, r.qoi);
    for (int k = 0; k < r.waveform.n_samples(); ++k)
      write_fields_csv(join(out, fields_file_name(r.waveform.time(k))), r.mesh, r.dofs, r.waveform[k]);
  } else if (cfg.mode == "compare") {
    const Problem p = build_problem(cfg);
    RunConfig mono_cfg = cfg;
    mono_cfg.n_steps_meso = cfg.n_steps_macro;
    const MonolithicRunReport mono = run_monolithic(Problem{mono_cfg, p.macro, p.cell});
    report_monolithic(mono);
    const WrRunReport wr = run_wr(p, WindowPlan::from_config(cfg));
    report_wr(wr);
    const ReferenceRun ref = run_reference(cfg);
    std::cout << "reference: " << ref.mesh.num_triangles() << " triangles\n";
    for (const auto& [name, s] : {std::pair<std::string, const LossSeries*>{"monolithic", &mono.qoi},
                                  {"wr", &wr.qoi},
                                  {"reference", &ref.qoi}}) {
      ensure_directory(join(out, name));
      write_series(join(out, name), *s);
    }
    write_wr_convergence_csv(join(out, "wr_convergence.csv"), convergence_rows(wr, &mono.qoi));
    const SeriesErrors mr = relative_errors(mono.qoi, ref.qoi);
    const SeriesErrors wm = relative_errors(wr.qoi, mono.qoi);
    const SeriesErrors wf = relative_errors(wr.qoi, ref.qoi);
    write_key_value_csv(join(out, "errors.csv"), {{"losses_mono_vs_ref", mr.losses},
                                                  {"energy_mono_vs_ref", mr.energy},
                                                  {"losses_wr_vs_mono", wm.losses},
                                                  {"energy_wr_vs_mono", wm.energy},
                                                  {"losses_wr_vs_ref", wf.losses},
                                                  {"energy_wr_vs_ref", wf.energy}});
    std::cout << "losses error mono vs ref " << mr.losses << ", wr vs mono " << wm.losses << '\n';
  } else {  // cost
    const Problem p = build_problem(cfg);
    RunConfig mono_cfg = cfg;
    mono_cfg.n_steps_meso = cfg.n_steps_macro;
    const MonolithicRunReport mono = run_monolithic(Problem{mono_cfg, p.macro, p.cell});
    report_monolithic(mono);
    const WrRunReport wr = run_wr(p, WindowPlan::from_config(cfg));
    report_wr(wr);
    CostParams cp = calibrate_costs(p, realized_params(mono, wr, cfg.n_windows));
    cp.kappa = std::min(cost_model(cp).kappa_implied, 0.999);
    const CostReport c = cost_model(cp);
    const CostAudit am = audit_costs(mono), aw = audit_costs(wr);
    write_key_value_csv(join(out, "cost.csv"),
                        {{"N_TS", cp.N_TS},
                         {"N_TW", cp.N_TW},
                         {"N_WR", cp.N_WR},
                         {"N_NR", cp.N_NR},
                         {"N_GP", cp.N_GP},
                         {"N_dim", cp.N_dim},
                         {"C_sol_s", cp.C_sol},
                         {"C_com_s", cp.C_com},
                         {"C_jac_s", cp.C_jac},
                         {"C_ass_s", cp.C_ass},
                         {"C_Msol_s", cp.C_Msol},
                         {"kappa", cp.kappa},
                         {"C_mono_s", c.mono},
                         {"C_wr_s", c.wr},
                         {"C_mono_approx_s", c.mono_approx},
                         {"C_wr_approx_s", c.wr_approx},
                         {"speedup_model", c.speedup_approx},
                         {"speedup_predicted", c.predicted_speedup},
                         {"speedup_measured", wr.timings.total > 0 ? mono.timings.total / wr.timings.total : NAN},
                         {"wr_more_efficient", c.wr_more_efficient ? 1.0 : 0.0},
                         {"mono_time_s", mono.timings.total},
                         {"wr_time_s", wr.timings.total},
                         {"mono_solves", static_cast<double>(mono.counters.meso_solves)},
                         {"wr_solves", static_cast<double>(wr.counters.meso_solves)},
                         {"audit_mono_discrepancy", static_cast<double>(am.discrepancy())},
                         {"audit_wr_discrepancy", static_cast<double>(aw.discrepancy())}});
    std::cout << "cost model speedup " << c.speedup_approx << ", measured "
              << mono.timings.total / std::max(wr.timings.total, 1e-300) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale eddy-current homogenization: monolithic and waveform-relaxation coupling"};
  app.require_subcommand(1);
  std::string config, mode, out;
  CLI::App* run_cmd = app.add_subcommand("run", "Run the configured computation");
  run_cmd->add_option("config", config, "Configuration file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--mode", mode, "Override [run] mode")
      ->check(CLI::IsMember({"monolithic", "wr", "reference", "compare", "cost"}));
  run_cmd->add_option("--out", out, "Override [output] dir");
  CLI11_PARSE(app, argc, argv);
  try {
    return run(config, mode, out);
  } catch (const mqshmm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
