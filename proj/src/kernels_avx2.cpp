// AVX2/FMA variants of the law kernels. This translation unit is compiled with
// -mavx2 -mfma and is only entered after runtime CPU detection.

#include <immintrin.h>

#include <cmath>

#include "mqshmm/kernels.hpp"
#include "mqshmm/material.hpp"

namespace mqshmm::kernels::avx2 {
namespace {

inline __m256d set1(double v) { return _mm256_set1_pd(v); }

// exp(x) with Cody-Waite range reduction and a degree-13 Taylor polynomial on
// |r| <= ln2/2; the result is scaled by 2^n built directly in the exponent bits.
inline __m256d exp_pd(__m256d x) {
  x = _mm256_max_pd(_mm256_min_pd(x, set1(709.0)), set1(-708.0));
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, set1(1.4426950408889634074)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, set1(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, set1(1.90821492927058770002e-10), r);
  __m256d p = set1(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, set1(0.5));
  p = _mm256_fmadd_pd(p, r, set1(1.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0));
  const __m256d magic = set1(6755399441055744.0);  // 2^52 + 2^51
  __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
  ni = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(ni));
}

// (e^x - 1)/x with the same series/quotient split as the scalar kernel.
inline __m256d expm1_over_x_pd(__m256d x, __m256d ex) {
  __m256d s = set1(1.0 / 3628800.0);
  s = _mm256_fmadd_pd(s, x, set1(1.0 / 362880.0));
  s = _mm256_fmadd_pd(s, x, set1(1.0 / 40320.0));
  s = _mm256_fmadd_pd(s, x, set1(1.0 / 5040.0));
  s = _mm256_fmadd_pd(s, x, set1(1.0 / 720.0));
  s = _mm256_fmadd_pd(s, x, set1(1.0 / 120.0));
  s = _mm256_fmadd_pd(s, x, set1(1.0 / 24.0));
  s = _mm256_fmadd_pd(s, x, set1(1.0 / 6.0));
  s = _mm256_fmadd_pd(s, x, set1(0.5));
  s = _mm256_fmadd_pd(s, x, set1(1.0));
  const __m256d abs_x = _mm256_andnot_pd(set1(-0.0), x);
  const __m256d small = _mm256_cmp_pd(abs_x, set1(0.1), _CMP_LT_OQ);
  // Avoid 0/0 in lanes that take the series branch.
  const __m256d safe_x = _mm256_blendv_pd(x, set1(1.0), small);
  const __m256d q = _mm256_div_pd(_mm256_sub_pd(ex, set1(1.0)), safe_x);
  return _mm256_blendv_pd(q, s, small);
}

struct Lane {
  __m256d bx, by, b2, x, e, nu;
};

inline Lane load_lane(const FluxBatch& b, const LawParams& p, std::size_t i) {
  Lane l;
  l.bx = _mm256_add_pd(_mm256_loadu_pd(b.bx + i), set1(b.shift_x));
  l.by = _mm256_add_pd(_mm256_loadu_pd(b.by + i), set1(b.shift_y));
  l.b2 = _mm256_fmadd_pd(l.bx, l.bx, _mm256_mul_pd(l.by, l.by));
  l.x = _mm256_mul_pd(_mm256_loadu_pd(p.gamma + i), l.b2);
  l.e = exp_pd(l.x);
  l.nu = _mm256_fmadd_pd(_mm256_loadu_pd(p.beta + i), l.e, _mm256_loadu_pd(p.alpha + i));
  return l;
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v), hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

FluxBatch tail_of(const FluxBatch& b, std::size_t start) {
  FluxBatch t = b;
  t.n = b.n - start;
  t.bx = b.bx + start;
  t.by = b.by + start;
  return t;
}

LawParams tail_of(const LawParams& p, std::size_t start) {
  return {p.alpha + start, p.beta + start, p.gamma + start};
}

double* off(double* p, std::size_t i) { return p ? p + i : nullptr; }

}  // namespace

void evaluate_law(const FluxBatch& b, const LawParams& p, const LawOutputs& out) {
  std::size_t i = 0;
  for (; i + 4 <= b.n; i += 4) {
    const Lane l = load_lane(b, p, i);
    if (out.hx) _mm256_storeu_pd(out.hx + i, _mm256_mul_pd(l.nu, l.bx));
    if (out.hy) _mm256_storeu_pd(out.hy + i, _mm256_mul_pd(l.nu, l.by));
    if (out.d11 || out.d12 || out.d22) {
      const __m256d beta = _mm256_loadu_pd(p.beta + i), gamma = _mm256_loadu_pd(p.gamma + i);
      const __m256d c = _mm256_mul_pd(_mm256_mul_pd(set1(2.0), beta), _mm256_mul_pd(gamma, l.e));
      if (out.d11) _mm256_storeu_pd(out.d11 + i, _mm256_fmadd_pd(_mm256_mul_pd(c, l.bx), l.bx, l.nu));
      if (out.d12) _mm256_storeu_pd(out.d12 + i, _mm256_mul_pd(_mm256_mul_pd(c, l.bx), l.by));
      if (out.d22) _mm256_storeu_pd(out.d22 + i, _mm256_fmadd_pd(_mm256_mul_pd(c, l.by), l.by, l.nu));
    }
    if (out.energy) {
      const __m256d phi = expm1_over_x_pd(l.x, l.e);
      const __m256d inner = _mm256_fmadd_pd(_mm256_loadu_pd(p.beta + i), phi, _mm256_loadu_pd(p.alpha + i));
      _mm256_storeu_pd(out.energy + i, _mm256_mul_pd(_mm256_mul_pd(set1(0.5), l.b2), inner));
    }
  }
  if (i < b.n) {
    LawOutputs t{off(out.hx, i), off(out.hy, i), off(out.d11, i), off(out.d12, i), off(out.d22, i), off(out.energy, i)};
    scalar::evaluate_law(tail_of(b, i), tail_of(p, i), t);
  }
}

WeightedSums weighted_law_sums(const FluxBatch& b, const LawParams& p, const double* weight, unsigned flags) {
  __m256d shx = _mm256_setzero_pd(), shy = _mm256_setzero_pd();
  __m256d s11 = _mm256_setzero_pd(), s12 = _mm256_setzero_pd(), s22 = _mm256_setzero_pd();
  __m256d sw = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= b.n; i += 4) {
    const Lane l = load_lane(b, p, i);
    const __m256d w = _mm256_loadu_pd(weight + i);
    if (flags & kSumH) {
      shx = _mm256_fmadd_pd(w, _mm256_mul_pd(l.nu, l.bx), shx);
      shy = _mm256_fmadd_pd(w, _mm256_mul_pd(l.nu, l.by), shy);
    }
    if (flags & kSumTangent) {
      const __m256d beta = _mm256_loadu_pd(p.beta + i), gamma = _mm256_loadu_pd(p.gamma + i);
      const __m256d c = _mm256_mul_pd(_mm256_mul_pd(set1(2.0), beta), _mm256_mul_pd(gamma, l.e));
      s11 = _mm256_fmadd_pd(w, _mm256_fmadd_pd(_mm256_mul_pd(c, l.bx), l.bx, l.nu), s11);
      s12 = _mm256_fmadd_pd(w, _mm256_mul_pd(_mm256_mul_pd(c, l.bx), l.by), s12);
      s22 = _mm256_fmadd_pd(w, _mm256_fmadd_pd(_mm256_mul_pd(c, l.by), l.by, l.nu), s22);
    }
    if (flags & kSumEnergy) {
      const __m256d phi = expm1_over_x_pd(l.x, l.e);
      const __m256d inner = _mm256_fmadd_pd(_mm256_loadu_pd(p.beta + i), phi, _mm256_loadu_pd(p.alpha + i));
      sw = _mm256_fmadd_pd(w, _mm256_mul_pd(_mm256_mul_pd(set1(0.5), l.b2), inner), sw);
    }
  }
  WeightedSums s;
  s.hx = hsum(shx);
  s.hy = hsum(shy);
  s.d11 = hsum(s11);
  s.d12 = hsum(s12);
  s.d22 = hsum(s22);
  s.energy = hsum(sw);
  if (i < b.n) {
    const WeightedSums t = scalar::weighted_law_sums(tail_of(b, i), tail_of(p, i), weight + i, flags);
    s.hx += t.hx;
    s.hy += t.hy;
    s.d11 += t.d11;
    s.d12 += t.d12;
    s.d22 += t.d22;
    s.energy += t.energy;
  }
  return s;
}

}  // namespace mqshmm::kernels::avx2
