#include "mhmm/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define MHMM_X86 1
#else
#define MHMM_X86 0
#endif

#if MHMM_X86 && defined(MHMM_HAVE_AVX2_BUILD)

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <limits>

// AVX2+FMA kernels. Polynomial exp/log1p follow the usual Cephes-style
// range reduction; worst-case error is a few ulp, which the equivalence
// tests pin against the scalar reference.

namespace mhmm::kernels {
namespace {

inline __m256d vset1(double v) { return _mm256_set1_pd(v); }

// exp(x) for x <= ~709; inputs below -745.5 underflow to 0.
// Range reduction x = n*ln2 + r with two-part ln2, degree-13 Taylor on r,
// then scaling by 2^n in two multiplies so subnormal results stay exact.
inline __m256d vexp4(__m256d x) {
  const __m256d log2e = vset1(1.4426950408889634074);
  const __m256d ln2_hi = vset1(6.93145751953125e-1);
  const __m256d ln2_lo = vset1(1.42860682030941723212e-6);

  x = _mm256_min_pd(x, vset1(709.0));
  x = _mm256_max_pd(x, vset1(-745.5));

  const __m256d nf =
      _mm256_round_pd(_mm256_mul_pd(x, log2e),
                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nf, ln2_hi, x);
  r = _mm256_fnmadd_pd(nf, ln2_lo, r);

  // Taylor coefficients 1/k!
  __m256d p = vset1(1.6059043836821613e-10);   // 1/13!
  p = _mm256_fmadd_pd(p, r, vset1(2.08767569878681e-9));    // 1/12!
  p = _mm256_fmadd_pd(p, r, vset1(2.505210838544172e-8));   // 1/11!
  p = _mm256_fmadd_pd(p, r, vset1(2.7557319223985893e-7));  // 1/10!
  p = _mm256_fmadd_pd(p, r, vset1(2.755731922398589e-6));   // 1/9!
  p = _mm256_fmadd_pd(p, r, vset1(2.4801587301587302e-5));  // 1/8!
  p = _mm256_fmadd_pd(p, r, vset1(1.984126984126984e-4));   // 1/7!
  p = _mm256_fmadd_pd(p, r, vset1(1.3888888888888889e-3));  // 1/6!
  p = _mm256_fmadd_pd(p, r, vset1(8.333333333333333e-3));   // 1/5!
  p = _mm256_fmadd_pd(p, r, vset1(4.1666666666666664e-2));  // 1/4!
  p = _mm256_fmadd_pd(p, r, vset1(1.6666666666666666e-1));  // 1/3!
  p = _mm256_fmadd_pd(p, r, vset1(0.5));
  p = _mm256_fmadd_pd(p, r, vset1(1.0));
  p = _mm256_fmadd_pd(p, r, vset1(1.0));

  // 2^n = 2^(n-h) * 2^h with h = n/2 keeps both factors in normal range
  const __m128i n32 = _mm256_cvtpd_epi32(nf);
  const __m128i h32 = _mm_srai_epi32(n32, 1);
  const __m128i r32 = _mm_sub_epi32(n32, h32);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256i eh = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(h32), bias), 52);
  const __m256i er = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(r32), bias), 52);
  p = _mm256_mul_pd(p, _mm256_castsi256_pd(er));
  p = _mm256_mul_pd(p, _mm256_castsi256_pd(eh));
  return p;
}

// log(1+y) for y in [0, 1]: 2*atanh(y/(2+y)) as an odd series in t.
inline __m256d vlog1p01(__m256d y) {
  const __m256d t = _mm256_div_pd(y, _mm256_add_pd(vset1(2.0), y));
  const __m256d z = _mm256_mul_pd(t, t);
  __m256d p = vset1(1.0 / 33.0);
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 31.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 29.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 27.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 25.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 23.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 21.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0 / 3.0));
  p = _mm256_fmadd_pd(p, z, vset1(1.0));
  return _mm256_mul_pd(_mm256_add_pd(t, t), p);
}

// log(e^a + e^b); both inputs -inf yields -inf.
inline __m256d vlse2_(__m256d a, __m256d b) {
  const __m256d hi = _mm256_max_pd(a, b);
  const __m256d lo = _mm256_min_pd(a, b);
  const __m256d q = vexp4(_mm256_sub_pd(lo, hi));
  const __m256d out = _mm256_add_pd(hi, vlog1p01(q));
  // lo-hi is NaN when both are -inf; fall back to hi there
  const __m256d both_inf = _mm256_cmp_pd(a, b, _CMP_UNORD_Q);
  const __m256d neg_inf =
      _mm256_cmp_pd(hi, vset1(-std::numeric_limits<double>::infinity()),
                    _CMP_EQ_OQ);
  const __m256d bad = _mm256_or_pd(both_inf, neg_inf);
  return _mm256_blendv_pd(out, hi, bad);
}

inline __m256d vsoftplus4(__m256d x) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d ax = _mm256_max_pd(x, _mm256_sub_pd(zero, x));  // |x|
  const __m256d q = vexp4(_mm256_sub_pd(zero, ax));
  return _mm256_add_pd(_mm256_max_pd(x, zero), vlog1p01(q));
}

// --- array wrappers with scalar tails ---

inline double s_lse2(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

void a_vexp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, vexp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

void a_vsoftplus(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, vsoftplus4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) {
    const double v = x[i];
    out[i] = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
}

void a_vlse2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(
        out + i, vlse2_(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = s_lse2(a[i], b[i]);
}

void a_fwd_step2(const double* a0, const double* a1, const double* t00,
                 const double* t01, const double* t10, const double* t11,
                 const double* e0, const double* e1, double* o0, double* o1,
                 std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va0 = _mm256_loadu_pd(a0 + i);
    const __m256d va1 = _mm256_loadu_pd(a1 + i);
    const __m256d s00 = _mm256_add_pd(va0, _mm256_loadu_pd(t00 + i));
    const __m256d s10 = _mm256_add_pd(va1, _mm256_loadu_pd(t10 + i));
    const __m256d s01 = _mm256_add_pd(va0, _mm256_loadu_pd(t01 + i));
    const __m256d s11 = _mm256_add_pd(va1, _mm256_loadu_pd(t11 + i));
    _mm256_storeu_pd(
        o0 + i, _mm256_add_pd(vlse2_(s00, s10), _mm256_loadu_pd(e0 + i)));
    _mm256_storeu_pd(
        o1 + i, _mm256_add_pd(vlse2_(s01, s11), _mm256_loadu_pd(e1 + i)));
  }
  for (; i < n; ++i) {
    o0[i] = s_lse2(a0[i] + t00[i], a1[i] + t10[i]) + e0[i];
    o1[i] = s_lse2(a0[i] + t01[i], a1[i] + t11[i]) + e1[i];
  }
}

void a_bwd_step2(const double* z0, const double* z1, const double* t00,
                 const double* t01, const double* t10, const double* t11,
                 const double* e0, const double* e1, double* o0, double* o1,
                 std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d c0 =
        _mm256_add_pd(_mm256_loadu_pd(e0 + i), _mm256_loadu_pd(z0 + i));
    const __m256d c1 =
        _mm256_add_pd(_mm256_loadu_pd(e1 + i), _mm256_loadu_pd(z1 + i));
    _mm256_storeu_pd(o0 + i,
                     vlse2_(_mm256_add_pd(_mm256_loadu_pd(t00 + i), c0),
                            _mm256_add_pd(_mm256_loadu_pd(t01 + i), c1)));
    _mm256_storeu_pd(o1 + i,
                     vlse2_(_mm256_add_pd(_mm256_loadu_pd(t10 + i), c0),
                            _mm256_add_pd(_mm256_loadu_pd(t11 + i), c1)));
  }
  for (; i < n; ++i) {
    const double c0 = e0[i] + z0[i];
    const double c1 = e1[i] + z1[i];
    o0[i] = s_lse2(t00[i] + c0, t01[i] + c1);
    o1[i] = s_lse2(t10[i] + c0, t11[i] + c1);
  }
}

double a_logsumexp2v(const double* a, const double* b, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, a[i] + b[i]);
  if (n == 0 || !std::isfinite(hi)) return hi;
  const __m256d vhi = vset1(hi);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d s = _mm256_sub_pd(
        _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)), vhi);
    acc = _mm256_add_pd(acc, vexp4(s));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) s += std::exp(a[i] + b[i] - hi);
  return hi + std::log(s);
}

const Kernels kAvx2 = {
    "avx2",       a_vexp,      a_vsoftplus,     a_vlse2,
    a_fwd_step2,  a_bwd_step2, a_logsumexp2v,
};

}  // namespace

const Kernels* avx2_kernels_impl() { return &kAvx2; }

}  // namespace mhmm::kernels

#else

namespace mhmm::kernels {
const Kernels* avx2_kernels_impl() { return nullptr; }
}  // namespace mhmm::kernels

#endif
