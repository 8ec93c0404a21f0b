#include <cmath>

#include "mqshmm/kernels.hpp"
#include "mqshmm/material.hpp"

namespace mqshmm::kernels::scalar {

void evaluate_law(const FluxBatch& b, const LawParams& p, const LawOutputs& out) {
  for (std::size_t i = 0; i < b.n; ++i) {
    const double bx = b.bx[i] + b.shift_x, by = b.by[i] + b.shift_y;
    const double b2 = bx * bx + by * by;
    const double x = p.gamma[i] * b2;
    const double e = std::exp(x);
    const double nu = p.alpha[i] + p.beta[i] * e;
    if (out.hx) out.hx[i] = nu * bx;
    if (out.hy) out.hy[i] = nu * by;
    const double c = 2.0 * p.beta[i] * p.gamma[i] * e;
    if (out.d11) out.d11[i] = nu + c * bx * bx;
    if (out.d12) out.d12[i] = c * bx * by;
    if (out.d22) out.d22[i] = nu + c * by * by;
    if (out.energy) out.energy[i] = 0.5 * b2 * (p.alpha[i] + p.beta[i] * expm1_over_x(x, e));
  }
}

WeightedSums weighted_law_sums(const FluxBatch& b, const LawParams& p, const double* weight, unsigned flags) {
  WeightedSums s;
  for (std::size_t i = 0; i < b.n; ++i) {
    const double bx = b.bx[i] + b.shift_x, by = b.by[i] + b.shift_y;
    const double b2 = bx * bx + by * by;
    const double x = p.gamma[i] * b2;
    const double e = std::exp(x);
    const double nu = p.alpha[i] + p.beta[i] * e;
    const double w = weight[i];
    if (flags & kSumH) {
      s.hx += w * (nu * bx);
      s.hy += w * (nu * by);
    }
    if (flags & kSumTangent) {
      const double c = 2.0 * p.beta[i] * p.gamma[i] * e;
      s.d11 += w * (nu + c * bx * bx);
      s.d12 += w * (c * bx * by);
      s.d22 += w * (nu + c * by * by);
    }
    if (flags & kSumEnergy) s.energy += w * (0.5 * b2 * (p.alpha[i] + p.beta[i] * expm1_over_x(x, e)));
  }
  return s;
}

}  // namespace mqshmm::kernels::scalar
