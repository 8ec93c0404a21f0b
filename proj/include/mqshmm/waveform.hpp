#pragma once
// Time-stamped DOF vectors on a uniform grid with piecewise-linear
// interpolation: the unit of exchange between the scales.

#include <vector>

#include "mqshmm/fem.hpp"

namespace mqshmm {

class Waveform {
 public:
  Waveform() = default;
  // n_steps+1 zero samples of dimension `dim` on [t0, t_end].
  Waveform(double t0, double t_end, int n_steps, int dim);

  int n_samples() const { return static_cast<int>(values_.size()); }
  int n_steps() const { return n_samples() - 1; }
  int dim() const { return dim_; }
  double t0() const { return t0_; }
  double t_end() const { return t_end_; }
  double dt() const { return n_steps() > 0 ? (t_end_ - t0_) / n_steps() : 0.0; }
  double time(int k) const;
  std::vector<double> times() const;

  const Vec& operator[](int k) const { return values_.at(static_cast<size_t>(k)); }
  // Replaces sample k; the dimension must match.
  void set(int k, const Vec& v);

  // Linear interpolation; throws RangeError outside [t0, t_end].
  Vec at(double t) const;
  // Index of the grid point equal to t (relative tolerance 1e-9 of dt); throws RangeError otherwise.
  int index_of(double t) const;
  bool same_grid(const Waveform& other) const;
  // True if every sample time of `coarse` is a sample time of this waveform.
  bool nests(const Waveform& coarse) const;

 private:
  double t0_ = 0.0, t_end_ = 0.0;
  int dim_ = 0;
  std::vector<Vec> values_;
};

}  // namespace mqshmm
