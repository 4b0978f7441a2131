#pragma once

#include <cstddef>

// Elementwise log-domain array kernels used by the forward-backward hot path.
// Two implementations ship: a scalar reference built on libm, and an AVX2
// variant selected at runtime on x86-64 CPUs that support it. Both satisfy the
// same contracts and are equivalence-tested against each other; accumulation
// order is identical so results agree to a few ulp, not bit-exactly.
//
// Selection: MHMM_KERNELS=scalar|avx2|auto (default auto).

namespace mhmm::kernels {

struct Kernels {
  const char* name;

  // out[i] = exp(x[i])
  void (*vexp)(const double* x, double* out, std::size_t n);

  // out[i] = log(1 + exp(x[i]))
  void (*vsoftplus)(const double* x, double* out, std::size_t n);

  // out[i] = log(exp(a[i]) + exp(b[i]))
  void (*vlse2)(const double* a, const double* b, double* out, std::size_t n);

  // One log-space forward step of a two-state chain, vectorized across
  // independent random-effect nodes:
  //   o0[i] = lse(a0[i]+t00[i], a1[i]+t10[i]) + e0[i]
  //   o1[i] = lse(a0[i]+t01[i], a1[i]+t11[i]) + e1[i]
  // t_lm is the log transition probability from state l to state m.
  // Output may not alias input.
  void (*fwd_step2)(const double* a0, const double* a1, const double* t00,
                    const double* t01, const double* t10, const double* t11,
                    const double* e0, const double* e1, double* o0, double* o1,
                    std::size_t n);

  // One log-space backward step, vectorized across nodes:
  //   o0[i] = lse(t00[i]+e0[i]+z0[i], t01[i]+e1[i]+z1[i])
  //   o1[i] = lse(t10[i]+e0[i]+z0[i], t11[i]+e1[i]+z1[i])
  // where e, z are the emission and backward vectors at step j+1.
  void (*bwd_step2)(const double* z0, const double* z1, const double* t00,
                    const double* t01, const double* t10, const double* t11,
                    const double* e0, const double* e1, double* o0, double* o1,
                    std::size_t n);

  // log sum_i exp(a[i] + b[i]); returns -inf for n == 0.
  double (*logsumexp2v)(const double* a, const double* b, std::size_t n);
};

const Kernels& scalar_kernels();

// nullptr when the build or the CPU lacks AVX2+FMA support.
const Kernels* avx2_kernels();

// The runtime-selected implementation (cached after first call).
const Kernels& active_kernels();

}  // namespace mhmm::kernels
