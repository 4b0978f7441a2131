#pragma once

#include <cstdint>
#include <vector>

#include "mhmm/model.hpp"

// Forward-backward recursions for the two-state chain, conditional on the
// random effect. Everything runs in log space; the raw forward products
// underflow around forty observations, so the recursions carry log
// quantities with a log-sum-exp at every step.
//
// The hot path evaluates one subject at a whole batch of random-effect
// values (quadrature nodes) at once; the per-node recursions are independent
// and vectorize across the node dimension (see mhmm/kernels.hpp).

namespace mhmm::fb {

struct FBResult {
  int n = 0;
  // [j*2 + m] layout; log_backward empty unless the backward half was run
  std::vector<double> log_forward;
  std::vector<double> log_backward;
  double cond_loglik = 0.0;
};

FBResult forward_pass(const ModelParams& p, const SubjectSeries& s, double u);
// returns the n*2 log backward matrix; final row is exactly {0, 0}
std::vector<double> backward_pass(const ModelParams& p, const SubjectSeries& s,
                                  double u);
FBResult forward_backward(const ModelParams& p, const SubjectSeries& s,
                          double u);

// Smoothed Pr(b_j = m | series, u), rows normalized; [j*2 + m]
std::vector<double> state_posterior_given_u(const ModelParams& p,
                                            const SubjectSeries& s, double u);

// Most probable state path given u; ties broken toward state 0.
std::vector<int> viterbi_given_u(const ModelParams& p, const SubjectSeries& s,
                                 double u);

// ---- batch evaluation over random-effect nodes ----

// Derived per-subject constants, data only.
struct SubjectData {
  int n = 0;
  std::vector<double> log_miles;
  std::vector<double> lgamma_x1;
  std::vector<int> y, x, t;

  static SubjectData from(const SubjectSeries& s);
};

// Full forward/backward state at q nodes. Strides: la[(j*2 + m)*qpad + k].
struct BatchFB {
  int n = 0, q = 0, qpad = 0;
  std::vector<double> la;    // log forward
  std::vector<double> lz;    // log backward (want_backward only)
  std::vector<double> cond;  // per-node conditional log likelihood, length q
};

// cond[k] = log L(subject | u = us[k]) for k < q.
void cond_loglik_batch(const ModelParams& p, const SubjectData& sd,
                       const double* us, int q, double* cond);

void forward_backward_batch(const ModelParams& p, const SubjectData& sd,
                            const double* us, int q, bool want_backward,
                            BatchFB& out);

// ---- generic K-state core (no random effect) ----

// Caller-assembled log-domain inputs for one subject.
struct GenericHmm {
  int n = 0, K = 0;
  std::vector<double> log_init;   // K
  std::vector<double> log_trans;  // (n-1)*K*K, [(j-1)*K*K + from*K + to]
  std::vector<double> log_emit;   // n*K
};

// Returns the log likelihood; optionally stores the n*K log forward matrix.
double generic_forward(const GenericHmm& h, std::vector<double>* la = nullptr);

// Per-step state update counter (thread local); exists so tests can assert
// the linear-in-n operation count.
std::uint64_t step_ops();
void reset_step_ops();

}  // namespace mhmm::fb
