#include "mqshmm/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

Waveform::Waveform(double t0, double t_end, int n_steps, int dim) : t0_(t0), t_end_(t_end), dim_(dim) {
  if (n_steps < 1) throw Inconsistency("waveform needs at least one step");
  if (!(t_end > t0)) throw Inconsistency("waveform grid must be strictly increasing");
  if (dim < 0) throw Inconsistency("waveform dimension must be non-negative");
  values_.assign(static_cast<size_t>(n_steps + 1), Vec::Zero(dim));
}

double Waveform::time(int k) const {
  if (k < 0 || k > n_steps()) throw RangeError("waveform sample index out of range");
  if (k == n_steps()) return t_end_;
  return t0_ + (t_end_ - t0_) * k / n_steps();
}

std::vector<double> Waveform::times() const {
  std::vector<double> t(static_cast<size_t>(n_samples()));
  for (int k = 0; k < n_samples(); ++k) t[static_cast<size_t>(k)] = time(k);
  return t;
}

void Waveform::set(int k, const Vec& v) {
  if (v.size() != dim_) throw Inconsistency("waveform sample dimension mismatch");
  values_.at(static_cast<size_t>(k)) = v;
}

Vec Waveform::at(double t) const {
  const double h = dt();
  const double tol = 1e-9 * h;
  if (t < t0_ - tol || t > t_end_ + tol) {
    std::ostringstream os;
    os << "time " << t << " outside waveform grid [" << t0_ << ", " << t_end_ << "]";
    throw RangeError(os.str());
  }
  double s = (t - t0_) / h;
  int k = static_cast<int>(std::floor(s));
  if (k < 0) k = 0;
  if (k >= n_steps()) k = n_steps() - 1;
  double w = s - k;
  if (std::abs(w) < 1e-9) return values_[static_cast<size_t>(k)];
  if (std::abs(w - 1.0) < 1e-9) return values_[static_cast<size_t>(k + 1)];
  w = std::clamp(w, 0.0, 1.0);
  return (1.0 - w) * values_[static_cast<size_t>(k)] + w * values_[static_cast<size_t>(k + 1)];
}

int Waveform::index_of(double t) const {
  const double s = (t - t0_) / dt();
  const long k = std::lround(s);
  if (k < 0 || k > n_steps() || std::abs(s - static_cast<double>(k)) > 1e-9) {
    std::ostringstream os;
    os << "time " << t << " is not a grid point";
    throw RangeError(os.str());
  }
  return static_cast<int>(k);
}

bool Waveform::same_grid(const Waveform& o) const {
  const double tol = 1e-12 * std::max(std::abs(t_end_ - t0_), 1e-300);
  return n_steps() == o.n_steps() && std::abs(t0_ - o.t0_) <= tol && std::abs(t_end_ - o.t_end_) <= tol;
}

bool Waveform::nests(const Waveform& coarse) const {
  const double tol = 1e-12 * std::max(std::abs(t_end_ - t0_), 1e-300);
  if (std::abs(t0_ - coarse.t0_) > tol || std::abs(t_end_ - coarse.t_end_) > tol) return false;
  return coarse.n_steps() > 0 && n_steps() % coarse.n_steps() == 0;
}

}  // namespace mqshmm
