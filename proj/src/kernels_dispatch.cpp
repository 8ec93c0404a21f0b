#include <atomic>
#include <cstdlib>
#include <cstring>

#include "mqshmm/errors.hpp"
#include "mqshmm/kernels.hpp"

namespace mqshmm::kernels {

#ifndef MQSHMM_HAVE_AVX2
namespace avx2 {
void evaluate_law(const FluxBatch&, const LawParams&, const LawOutputs&) {
  throw Error("AVX2 kernels were not built");
}
WeightedSums weighted_law_sums(const FluxBatch&, const LawParams&, const double*, unsigned) {
  throw Error("AVX2 kernels were not built");
}
}  // namespace avx2
#endif

const char* to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if defined(MQSHMM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("MQSHMM_ISA")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    if (std::strcmp(env, "avx2") == 0 && isa_available(Isa::Avx2)) return Isa::Avx2;
  }
  return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) throw Error(std::string("instruction set not available: ") + to_string(isa));
  active().store(isa, std::memory_order_relaxed);
}

void evaluate_law(const FluxBatch& b, const LawParams& p, const LawOutputs& out) {
  if (active_isa() == Isa::Avx2)
    avx2::evaluate_law(b, p, out);
  else
    scalar::evaluate_law(b, p, out);
}

WeightedSums weighted_law_sums(const FluxBatch& b, const LawParams& p, const double* weight, unsigned flags) {
  if (active_isa() == Isa::Avx2) return avx2::weighted_law_sums(b, p, weight, flags);
  return scalar::weighted_law_sums(b, p, weight, flags);
}

}  // namespace mqshmm::kernels
