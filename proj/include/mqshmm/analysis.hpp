#pragma once
// Quantities of interest and error metrics: Joule losses and magnetic
// co-energy of resolved fields, interpolation of loss/energy series, and the
// relative L-infinity-in-time error between two series.

#include <vector>

#include "mqshmm/fem.hpp"
#include "mqshmm/material.hpp"
#include "mqshmm/mesh.hpp"
#include "mqshmm/qoi.hpp"

namespace mqshmm {

// sum_T sigma_T int_T |v|^2 with v = (a - a_prev)/dt at the nodes (P1 mass
// integration). With `grain_of_element`, the conductivity-weighted mean of v
// over each grain is removed first (electric field of an insulated grain).
double resolved_joule_losses(const Mesh2D& mesh, const DofMap& dofs, const std::vector<double>& element_sigma,
                             const Vec& a_prev, const Vec& a, double dt,
                             const std::vector<int>* grain_of_element = nullptr);
// sum_T |T| w(b_T) with the region laws of `laws`.
double resolved_energy(const Mesh2D& mesh, const DofMap& dofs, const MaterialSet& laws, const Vec& a);

// Series evaluation by linear interpolation; RangeError outside the samples.
double eddy_losses(const LossSeries& series, double t);
double magnetic_energy(const LossSeries& series, double t);
// Piecewise-linear interpolation of (t, v) at t_query.
double interpolate_series(const std::vector<double>& t, const std::vector<double>& v, double t_query);

// ||v - w||_inf / ||w||_inf over the sample times of the coarser series; the
// finer series is interpolated (it must cover the coarse samples). Throws
// UndefinedNorm if ||w||_inf = 0.
double relative_error(const std::vector<double>& tv, const std::vector<double>& v, const std::vector<double>& tw,
                      const std::vector<double>& w);

struct SeriesErrors {
  double losses = 0.0;
  double energy = 0.0;
};
SeriesErrors relative_errors(const LossSeries& a, const LossSeries& b);

// Observed convergence order from errors on successively halved steps:
// least-squares slope of log2(error) against the level index (negated).
double observed_order(const std::vector<double>& errors);

}  // namespace mqshmm
