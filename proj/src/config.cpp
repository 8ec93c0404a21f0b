#include "mqshmm/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

namespace {

namespace pt = boost::property_tree;

template <class T>
T convert(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (is.fail()) throw ConfigError("invalid value '" + text + "' for " + key);
  if (!is.eof()) is >> std::ws;
  if (!is.eof()) throw ConfigError("invalid value '" + text + "' for " + key);
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const RunConfig&)>;
struct Field {
  Setter set;
  Getter get;
};

template <class T>
std::string show(const T& v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Scaled double field (file value * scale = member value).
Field real(double RunConfig::*m, double scale = 1.0) {
  return {[m, scale](RunConfig& c, const std::string& k, const std::string& v) { c.*m = convert<double>(k, v) * scale; },
          [m, scale](const RunConfig& c) { return show(c.*m / scale); }};
}
Field geo(double GeometryParams::*m, double scale) {
  return {[m, scale](RunConfig& c, const std::string& k, const std::string& v) {
            c.geometry.*m = convert<double>(k, v) * scale;
          },
          [m, scale](const RunConfig& c) { return show(c.geometry.*m / scale); }};
}
Field geo_int(int GeometryParams::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.geometry.*m = convert<int>(k, v); },
          [m](const RunConfig& c) { return show(c.geometry.*m); }};
}
Field integer(int RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = convert<int>(k, v); },
          [m](const RunConfig& c) { return show(c.*m); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    m["geometry.grains"] = integer(&RunConfig::grains);
    m["geometry.L_um"] = geo(&GeometryParams::L, 1e-6);
    m["geometry.e_i_um"] = geo(&GeometryParams::e_i, 1e-6);
    m["geometry.e_gap_um"] = geo(&GeometryParams::e_gap, 1e-6);
    m["geometry.e_a_um"] = geo(&GeometryParams::e_a, 1e-6);
    m["geometry.air_margin"] = geo(&GeometryParams::air_margin_factor, 1.0);
    m["geometry.fill"] = real(&RunConfig::cell_fill);
    m["geometry.cell_n"] = integer(&RunConfig::cell_n);
    m["geometry.macro_div"] = geo_int(&GeometryParams::macro_div);
    m["geometry.gap_div"] = geo_int(&GeometryParams::gap_div);
    m["geometry.inductor_div"] = geo_int(&GeometryParams::inductor_div);
    m["geometry.air_div"] = geo_int(&GeometryParams::air_div);
    m["geometry.ref_grain_div"] = geo_int(&GeometryParams::ref_grain_div);
    m["geometry.ref_insulation_div"] = geo_int(&GeometryParams::ref_insulation_div);
    m["geometry.ref_refinement"] = integer(&RunConfig::ref_refinement);
    m["material.alpha"] = real(&RunConfig::alpha);
    m["material.beta"] = real(&RunConfig::beta);
    m["material.gamma"] = real(&RunConfig::gamma);
    m["material.sigma_S_per_m"] = real(&RunConfig::sigma);
    m["material.mu_r_ins"] = real(&RunConfig::mu_r_ins);
    m["source.js0"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.source.j_s0 = convert<double>(k, v); },
                       [](const RunConfig& c) { return show(c.source.j_s0); }};
    m["source.f_hz"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.source.f = convert<double>(k, v); },
                        [](const RunConfig& c) { return show(c.source.f); }};
    m["time.t_end_s"] = real(&RunConfig::t_end);
    m["time.n_steps_macro"] = integer(&RunConfig::n_steps_macro);
    m["time.n_steps_meso"] = integer(&RunConfig::n_steps_meso);
    m["time.n_windows"] = integer(&RunConfig::n_windows);
    m["time.ref_steps"] = integer(&RunConfig::ref_steps);
    m["solver.newton_tol"] = real(&RunConfig::newton_tol);
    m["solver.newton_max"] = integer(&RunConfig::newton_max);
    m["solver.cell_newton_tol"] = real(&RunConfig::cell_newton_tol);
    m["solver.cell_newton_max"] = integer(&RunConfig::cell_newton_max);
    m["solver.wr_tol"] = real(&RunConfig::wr_tol);
    m["solver.wr_max"] = integer(&RunConfig::wr_max);
    m["solver.fd_delta"] = real(&RunConfig::fd_delta);
    m["solver.kappa"] = real(&RunConfig::kappa);
    m["solver.comm_delay_us"] = real(&RunConfig::comm_delay_us);
    m["solver.insulated_grains"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.insulated_grains = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.insulated_grains ? "true" : "false"); }};
    m["run.mode"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.mode = v; },
                     [](const RunConfig& c) { return c.mode; }};
    m["output.dir"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
                       [](const RunConfig& c) { return c.out_dir; }};
    return m;
  }();
  return f;
}

}  // namespace

bool valid_mode(const std::string& mode) {
  return mode == "monolithic" || mode == "wr" || mode == "reference" || mode == "compare" || mode == "cost";
}

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& section : tree) {
    if (section.second.empty() && !section.second.data().empty())
      throw ConfigError("key '" + section.first + "' outside of a section");
    for (const auto& kv : section.second) {
      const std::string key = section.first + "." + kv.first;
      auto it = fields().find(key);
      if (it == fields().end()) throw ConfigError("unknown configuration key '" + key + "'");
      it->second.set(cfg, key, kv.second.data());
    }
  }
  if (!valid_mode(cfg.mode)) throw ConfigError("unknown run mode '" + cfg.mode + "'");
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  try {
    return parse_config(in);
  } catch (...) {
    rethrow_with_context(path);
  }
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  std::string current;
  for (const auto& [key, field] : fields()) {
    const std::string section = key.substr(0, key.find('.'));
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << key.substr(key.find('.') + 1) << " = " << field.get(cfg) << '\n';
  }
}

}  // namespace mqshmm
