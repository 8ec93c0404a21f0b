#include "mqshmm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

namespace {
Vec3 nodal(const Mesh2D& mesh, const DofMap& dofs, const Vec& a, int t) {
  const auto& tri = mesh.triangles[static_cast<size_t>(t)];
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    const int n = tri[static_cast<size_t>(k)];
    const int d = dofs.dof(n);
    v[k] = d >= 0 ? a[d] : dofs.constrained_value(n);
  }
  return v;
}
}  // namespace

double resolved_joule_losses(const Mesh2D& mesh, const DofMap& dofs, const std::vector<double>& element_sigma,
                             const Vec& a_prev, const Vec& a, double dt, const std::vector<int>* grain_of_element) {
  if (!(dt > 0.0)) throw NumericDomain("time step must be positive");
  const int nt = mesh.num_triangles();
  if (static_cast<int>(element_sigma.size()) != nt) throw Inconsistency("conductivity table does not match the mesh");
  if (grain_of_element && static_cast<int>(grain_of_element->size()) != nt)
    throw Inconsistency("grain table does not match the mesh");
  std::vector<Vec3> rate(static_cast<size_t>(nt));
  std::vector<double> area(static_cast<size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    rate[static_cast<size_t>(t)] = (nodal(mesh, dofs, a, t) - nodal(mesh, dofs, a_prev, t)) / dt;
    area[static_cast<size_t>(t)] = std::abs(mesh.signed_area(t));
  }
  std::vector<double> mean;
  if (grain_of_element) {
    int ngr = 0;
    for (int g : *grain_of_element) ngr = std::max(ngr, g + 1);
    std::vector<double> num(static_cast<size_t>(ngr), 0.0), den(static_cast<size_t>(ngr), 0.0);
    for (int t = 0; t < nt; ++t) {
      const int g = (*grain_of_element)[static_cast<size_t>(t)];
      if (g < 0) continue;
      const double s = element_sigma[static_cast<size_t>(t)] * area[static_cast<size_t>(t)];
      num[static_cast<size_t>(g)] += s * rate[static_cast<size_t>(t)].mean();
      den[static_cast<size_t>(g)] += s;
    }
    mean.resize(static_cast<size_t>(ngr));
    for (int g = 0; g < ngr; ++g)
      mean[static_cast<size_t>(g)] = den[static_cast<size_t>(g)] > 0.0 ? num[static_cast<size_t>(g)] / den[static_cast<size_t>(g)] : 0.0;
  }
  double p = 0.0;
  for (int t = 0; t < nt; ++t) {
    const double s = element_sigma[static_cast<size_t>(t)];
    if (s == 0.0) continue;
    Vec3 v = rate[static_cast<size_t>(t)];
    if (grain_of_element) {
      const int g = (*grain_of_element)[static_cast<size_t>(t)];
      if (g >= 0) v.array() -= mean[static_cast<size_t>(g)];
    }
    p += s * area[static_cast<size_t>(t)] / 12.0 * (v.squaredNorm() + v.sum() * v.sum());
  }
  return p;
}

double resolved_energy(const Mesh2D& mesh, const DofMap& dofs, const MaterialSet& laws, const Vec& a) {
  double w = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry g = element_geometry(triangle_points(mesh, t));
    const Vec2 b = g.curl() * nodal(mesh, dofs, a, t);
    w += g.area * coenergy_density(laws.law(mesh.regions[static_cast<size_t>(t)]), b);
  }
  return w;
}

double interpolate_series(const std::vector<double>& t, const std::vector<double>& v, double tq) {
  if (t.empty() || t.size() != v.size()) throw Inconsistency("malformed time series");
  const double span = t.back() - t.front();
  const double tol = 1e-9 * (span > 0.0 ? span / static_cast<double>(t.size()) : 1.0);
  if (tq < t.front() - tol || tq > t.back() + tol) {
    std::ostringstream os;
    os << "time " << tq << " outside the series [" << t.front() << ", " << t.back() << "]";
    throw RangeError(os.str());
  }
  if (t.size() == 1) return v.front();
  auto it = std::lower_bound(t.begin(), t.end(), tq);
  size_t k = static_cast<size_t>(it - t.begin());
  if (k < t.size() && std::abs(t[k] - tq) <= tol) return v[k];
  if (k > 0 && std::abs(t[k - 1] - tq) <= tol) return v[k - 1];
  k = std::clamp<size_t>(k, 1, t.size() - 1);
  const double w = (tq - t[k - 1]) / (t[k] - t[k - 1]);
  return (1.0 - w) * v[k - 1] + w * v[k];
}

double eddy_losses(const LossSeries& s, double t) { return interpolate_series(s.t, s.losses, t); }
double magnetic_energy(const LossSeries& s, double t) { return interpolate_series(s.t, s.energy, t); }

double relative_error(const std::vector<double>& tv, const std::vector<double>& v, const std::vector<double>& tw,
                      const std::vector<double>& w) {
  if (tv.size() != v.size() || tw.size() != w.size() || tv.empty() || tw.empty())
    throw Inconsistency("malformed time series");
  const std::vector<double>& grid = tv.size() <= tw.size() ? tv : tw;
  double num = 0.0, den = 0.0;
  for (double t : grid) {
    const double wv = interpolate_series(tw, w, t);
    num = std::max(num, std::abs(interpolate_series(tv, v, t) - wv));
    den = std::max(den, std::abs(wv));
  }
  if (!(den > 0.0)) throw UndefinedNorm("relative error: the reference series vanishes");
  return num / den;
}

SeriesErrors relative_errors(const LossSeries& a, const LossSeries& b) {
  return {relative_error(a.t, a.losses, b.t, b.losses), relative_error(a.t, a.energy, b.t, b.energy)};
}

double observed_order(const std::vector<double>& e) {
  if (e.size() < 2) throw Inconsistency("observed order needs at least two errors");
  const double n = static_cast<double>(e.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < e.size(); ++i) {
    if (!(e[i] > 0.0)) throw UndefinedNorm("observed order needs positive errors");
    const double x = static_cast<double>(i), y = std::log2(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mqshmm
