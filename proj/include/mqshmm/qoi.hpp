#pragma once
// Time series of the global quantities of interest: eddy-current losses and
// magnetic (co-)energy per unit depth.

#include <vector>

namespace mqshmm {

struct LossSeries {
  std::vector<double> t;       // [s]
  std::vector<double> losses;  // tau P [W/m]
  std::vector<double> energy;  // W_mag [J/m]

  std::size_t size() const { return t.size(); }
  void push(double time, double p, double w) {
    t.push_back(time);
    losses.push_back(p);
    energy.push_back(w);
  }
  void append(const LossSeries& other, bool skip_first);
};

inline void LossSeries::append(const LossSeries& o, bool skip_first) {
  for (std::size_t k = skip_first ? 1 : 0; k < o.size(); ++k) push(o.t[k], o.losses[k], o.energy[k]);
}

}  // namespace mqshmm
