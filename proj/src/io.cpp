#include "mqshmm/io.hpp"

#include <filesystem>
#include <fstream>
#include <locale>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

namespace {
std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.imbue(std::locale::classic());
  out.precision(12);
  return out;
}
void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw ConfigError("error while writing '" + path + "'");
}
}  // namespace

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_losses_csv(const std::string& path, const LossSeries& s) {
  auto out = open_csv(path);
  out << "t,P\n";
  for (size_t k = 0; k < s.size(); ++k) out << s.t[k] << ',' << s.losses[k] << '\n';
  finish(out, path);
}

void write_energy_csv(const std::string& path, const LossSeries& s) {
  auto out = open_csv(path);
  out << "t,W\n";
  for (size_t k = 0; k < s.size(); ++k) out << s.t[k] << ',' << s.energy[k] << '\n';
  finish(out, path);
}

void write_wr_convergence_csv(const std::string& path, const std::vector<WrConvergenceRow>& rows) {
  auto out = open_csv(path);
  out << "window,l,err_losses,err_energy,err_b,err_dta\n";
  for (const auto& r : rows)
    out << r.window << ',' << r.l << ',' << r.err_losses << ',' << r.err_energy << ',' << r.err_b << ',' << r.err_dta
        << '\n';
  finish(out, path);
}

void write_key_value_csv(const std::string& path, const std::vector<std::pair<std::string, double>>& rows) {
  auto out = open_csv(path);
  out << "quantity,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
  finish(out, path);
}

void write_fields_csv(const std::string& path, const Mesh2D& mesh, const DofMap& dofs, const Vec& alpha) {
  auto out = open_csv(path);
  const Vec nodal = dofs.expand(alpha);
  out << "node,x,y,a_z\n";
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const Point& p = mesh.nodes[static_cast<size_t>(n)];
    out << n << ',' << p.x << ',' << p.y << ',' << nodal[n] << '\n';
  }
  finish(out, path);
}

std::string fields_file_name(double t) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(6);
  os << "fields_" << t << ".csv";
  return os.str();
}

}  // namespace mqshmm
