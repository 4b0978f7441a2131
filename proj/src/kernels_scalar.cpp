#include "mhmm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// Reference kernels. Straight libm; the AVX2 variants are checked against
// these in tests/test_kernels.cpp.

namespace mhmm::kernels {
namespace {

inline double lse2(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

void s_vexp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void s_vsoftplus(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    out[i] = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
}

void s_vlse2(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = lse2(a[i], b[i]);
}

void s_fwd_step2(const double* a0, const double* a1, const double* t00,
                 const double* t01, const double* t10, const double* t11,
                 const double* e0, const double* e1, double* o0, double* o1,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    o0[i] = lse2(a0[i] + t00[i], a1[i] + t10[i]) + e0[i];
    o1[i] = lse2(a0[i] + t01[i], a1[i] + t11[i]) + e1[i];
  }
}

void s_bwd_step2(const double* z0, const double* z1, const double* t00,
                 const double* t01, const double* t10, const double* t11,
                 const double* e0, const double* e1, double* o0, double* o1,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double c0 = e0[i] + z0[i];
    const double c1 = e1[i] + z1[i];
    o0[i] = lse2(t00[i] + c0, t01[i] + c1);
    o1[i] = lse2(t10[i] + c0, t11[i] + c1);
  }
}

double s_logsumexp2v(const double* a, const double* b, std::size_t n) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, a[i] + b[i]);
  if (n == 0 || !std::isfinite(hi)) return hi;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(a[i] + b[i] - hi);
  return hi + std::log(s);
}

const Kernels kScalar = {
    "scalar",     s_vexp,      s_vsoftplus,     s_vlse2,
    s_fwd_step2,  s_bwd_step2, s_logsumexp2v,
};

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

}  // namespace mhmm::kernels
