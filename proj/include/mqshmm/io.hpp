#pragma once
// CSV output: header row, '.' decimal separator, newline-terminated.

#include <string>
#include <utility>
#include <vector>

#include "mqshmm/fem.hpp"
#include "mqshmm/mesh.hpp"
#include "mqshmm/qoi.hpp"

namespace mqshmm {

struct WrConvergenceRow {
  int window = 0;
  int l = 0;
  double err_losses = 0.0;
  double err_energy = 0.0;
  double err_b = 0.0;
  double err_dta = 0.0;
};

// Creates the directory (and parents) if needed.
void ensure_directory(const std::string& dir);

void write_losses_csv(const std::string& path, const LossSeries& s);   // t,P
void write_energy_csv(const std::string& path, const LossSeries& s);   // t,W
void write_wr_convergence_csv(const std::string& path, const std::vector<WrConvergenceRow>& rows);
void write_key_value_csv(const std::string& path, const std::vector<std::pair<std::string, double>>& rows);
// node,x,y,a_z for all mesh nodes (constrained nodes carry their value).
void write_fields_csv(const std::string& path, const Mesh2D& mesh, const DofMap& dofs, const Vec& alpha);
// File name for a field snapshot at time t: fields_<t>.csv with t in seconds.
std::string fields_file_name(double t);

}  // namespace mqshmm
