#pragma once
// Batched per-element evaluation of the reluctivity law over structure-of-arrays
// inputs, plus area-weighted reductions. A scalar reference implementation and
// an AVX2/FMA implementation are provided; the active one is chosen at runtime
// (CPU detection, overridable with MQSHMM_ISA=scalar|avx2 or set_active_isa).

#include <cstddef>

namespace mqshmm::kernels {

enum class Isa { Scalar, Avx2 };
const char* to_string(Isa isa);

bool isa_available(Isa isa);
Isa active_isa();
// Throws Error if `isa` is not available on this machine/build.
void set_active_isa(Isa isa);

// Per-element law parameters: nu(|b|^2) = alpha + beta exp(gamma |b|^2).
struct LawParams {
  const double* alpha = nullptr;
  const double* beta = nullptr;
  const double* gamma = nullptr;
};

// b = (bx + shift_x, by + shift_y) per element.
struct FluxBatch {
  std::size_t n = 0;
  const double* bx = nullptr;
  const double* by = nullptr;
  double shift_x = 0.0;
  double shift_y = 0.0;
};

// Outputs; any pointer may be null to skip that quantity.
struct LawOutputs {
  double* hx = nullptr;
  double* hy = nullptr;
  double* d11 = nullptr;
  double* d12 = nullptr;
  double* d22 = nullptr;
  double* energy = nullptr;  // co-energy density
};

struct WeightedSums {
  double hx = 0.0, hy = 0.0;
  double d11 = 0.0, d12 = 0.0, d22 = 0.0;
  double energy = 0.0;
};

enum SumFlags : unsigned { kSumH = 1u, kSumTangent = 2u, kSumEnergy = 4u };

// Dispatched entry points.
void evaluate_law(const FluxBatch& b, const LawParams& p, const LawOutputs& out);
WeightedSums weighted_law_sums(const FluxBatch& b, const LawParams& p, const double* weight, unsigned flags);

// Explicit variants (used by the equivalence tests).
namespace scalar {
void evaluate_law(const FluxBatch& b, const LawParams& p, const LawOutputs& out);
WeightedSums weighted_law_sums(const FluxBatch& b, const LawParams& p, const double* weight, unsigned flags);
}  // namespace scalar
namespace avx2 {
void evaluate_law(const FluxBatch& b, const LawParams& p, const LawOutputs& out);
WeightedSums weighted_law_sums(const FluxBatch& b, const LawParams& p, const double* weight, unsigned flags);
}  // namespace avx2

}  // namespace mqshmm::kernels
