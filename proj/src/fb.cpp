#include "mhmm/fb.hpp"

#include <algorithm>
#include <cmath>

#include "mhmm/kernels.hpp"

namespace mhmm::fb {

namespace {

thread_local std::uint64_t g_step_ops = 0;

inline int pad4(int q) { return std::max(4, (q + 3) & ~3); }

// Scratch for one batch evaluation; reused across calls per thread.
struct Workspace {
  std::vector<double> u, a2u, xlin, exp_b3u, tr, arg, sp, tmp;
  std::vector<double> em;  // (n*2)*qpad emission log likelihoods

  void resize(int n, int qpad) {
    u.assign(qpad, 0.0);
    a2u.resize(qpad);
    xlin.resize(qpad);
    exp_b3u.resize(qpad);
    tr.resize(8 * qpad);
    arg.resize(qpad);
    sp.resize(qpad);
    tmp.resize(qpad);
    em.resize(static_cast<std::size_t>(n) * 2 * qpad);
  }
};

thread_local Workspace tls_ws;
thread_local BatchFB tls_fb;

// log transition entries for lagged outcome yprev, cell c in
// {0->0, 0->1, 1->0, 1->1}
inline double* tr_row(Workspace& ws, int yprev, int cell, int qpad) {
  return ws.tr.data() + (static_cast<std::size_t>(yprev) * 4 + cell) * qpad;
}

void fill_node_arrays(const ModelParams& p, const double* us, int q, int qpad,
                      Workspace& ws) {
  const auto& k = kernels::active_kernels();
  std::fill(ws.u.begin(), ws.u.end(), 0.0);
  std::copy(us, us + q, ws.u.begin());

  for (int i = 0; i < qpad; ++i) ws.a2u[i] = p.alpha2 * ws.u[i];
  for (int i = 0; i < qpad; ++i) ws.xlin[i] = p.beta3 * ws.u[i];
  k.vexp(ws.xlin.data(), ws.exp_b3u.data(), qpad);

  // logit p01 = gamma01 + delta1*yprev + u
  // logit p10 = gamma10 + delta2*yprev + delta_star*u
  for (int yprev = 0; yprev < 2; ++yprev) {
    const double c01 = p.gamma01 + p.delta1 * yprev;
    const double c10 = p.gamma10 + p.delta2 * yprev;
    double* t00 = tr_row(ws, yprev, 0, qpad);
    double* t01 = tr_row(ws, yprev, 1, qpad);
    double* t10 = tr_row(ws, yprev, 2, qpad);
    double* t11 = tr_row(ws, yprev, 3, qpad);

    for (int i = 0; i < qpad; ++i) ws.arg[i] = c01 + ws.u[i];
    k.vsoftplus(ws.arg.data(), ws.sp.data(), qpad);
    for (int i = 0; i < qpad; ++i) t00[i] = -ws.sp[i];  // log(1-p01)
    for (int i = 0; i < qpad; ++i) ws.arg[i] = -(c01 + ws.u[i]);
    k.vsoftplus(ws.arg.data(), ws.sp.data(), qpad);
    for (int i = 0; i < qpad; ++i) t01[i] = -ws.sp[i];  // log p01

    for (int i = 0; i < qpad; ++i) ws.arg[i] = c10 + p.delta_star * ws.u[i];
    k.vsoftplus(ws.arg.data(), ws.sp.data(), qpad);
    for (int i = 0; i < qpad; ++i) t11[i] = -ws.sp[i];  // log(1-p10)
    for (int i = 0; i < qpad; ++i) ws.arg[i] = -(c10 + p.delta_star * ws.u[i]);
    k.vsoftplus(ws.arg.data(), ws.sp.data(), qpad);
    for (int i = 0; i < qpad; ++i) t10[i] = -ws.sp[i];  // log p10
  }
}

void fill_emissions(const ModelParams& p, const SubjectData& sd, int qpad,
                    Workspace& ws) {
  const auto& k = kernels::active_kernels();
  for (int j = 0; j < sd.n; ++j) {
    const double lm = sd.log_miles[j];
    for (int m = 0; m < 2; ++m) {
      // Bernoulli part: y*eta - softplus(eta) with eta = c1 + alpha2*u
      const double c1 = lm + p.alpha0 + p.alpha1 * m;
      const double sgn = sd.y[j] == 1 ? -1.0 : 1.0;
      for (int i = 0; i < qpad; ++i) ws.arg[i] = sgn * (c1 + ws.a2u[i]);
      k.vsoftplus(ws.arg.data(), ws.sp.data(), qpad);

      // Poisson part: x*eta2 - exp(eta2) - lgamma(x+1); exp splits into a
      // scalar factor and the per-node exp(beta3*u) computed once
      const double c2 = lm + p.beta0 + p.beta1 * m + p.beta2 * sd.t[j];
      const double ec2 = std::exp(c2);
      const double xj = sd.x[j];
      const double base = xj * c2 - sd.lgamma_x1[j];

      double* e = ws.em.data() + (static_cast<std::size_t>(j) * 2 + m) * qpad;
      for (int i = 0; i < qpad; ++i)
        e[i] = -ws.sp[i] + base + xj * ws.xlin[i] - ec2 * ws.exp_b3u[i];
    }
  }
}

}  // namespace

SubjectData SubjectData::from(const SubjectSeries& s) {
  SubjectData sd;
  sd.n = static_cast<int>(s.size());
  sd.log_miles.resize(sd.n);
  sd.lgamma_x1.resize(sd.n);
  sd.y = s.y;
  sd.x = s.x;
  sd.t = s.t;
  for (int j = 0; j < sd.n; ++j) {
    sd.log_miles[j] = std::log(s.miles[j]);
    sd.lgamma_x1[j] = std::lgamma(s.x[j] + 1.0);
  }
  return sd;
}

void forward_backward_batch(const ModelParams& p, const SubjectData& sd,
                            const double* us, int q, bool want_backward,
                            BatchFB& out) {
  const auto& k = kernels::active_kernels();
  const int n = sd.n;
  const int qpad = pad4(q);
  Workspace& ws = tls_ws;
  ws.resize(n, qpad);

  fill_node_arrays(p, us, q, qpad, ws);
  fill_emissions(p, sd, qpad, ws);

  out.n = n;
  out.q = q;
  out.qpad = qpad;
  out.la.resize(static_cast<std::size_t>(n) * 2 * qpad);
  out.cond.resize(q);

  const auto row = [qpad](std::vector<double>& buf, int j, int m) {
    return buf.data() + (static_cast<std::size_t>(j) * 2 + m) * qpad;
  };
  const auto erow = [&](int j, int m) {
    return ws.em.data() + (static_cast<std::size_t>(j) * 2 + m) * qpad;
  };

  const auto r = initial_dist(p);
  const double lr0 = std::log(r[0]), lr1 = std::log(r[1]);
  {
    double* a0 = row(out.la, 0, 0);
    double* a1 = row(out.la, 0, 1);
    const double* e0 = erow(0, 0);
    const double* e1 = erow(0, 1);
    for (int i = 0; i < qpad; ++i) a0[i] = lr0 + e0[i];
    for (int i = 0; i < qpad; ++i) a1[i] = lr1 + e1[i];
  }
  for (int j = 1; j < n; ++j) {
    const int yprev = sd.y[j - 1];
    k.fwd_step2(row(out.la, j - 1, 0), row(out.la, j - 1, 1),
                tr_row(ws, yprev, 0, qpad), tr_row(ws, yprev, 1, qpad),
                tr_row(ws, yprev, 2, qpad), tr_row(ws, yprev, 3, qpad),
                erow(j, 0), erow(j, 1), row(out.la, j, 0), row(out.la, j, 1),
                qpad);
    g_step_ops += 4u * static_cast<std::uint64_t>(q);
  }

  k.vlse2(row(out.la, n - 1, 0), row(out.la, n - 1, 1), ws.tmp.data(), qpad);
  std::copy(ws.tmp.begin(), ws.tmp.begin() + q, out.cond.begin());

  if (!want_backward) {
    out.lz.clear();
    return;
  }

  out.lz.assign(static_cast<std::size_t>(n) * 2 * qpad, 0.0);
  for (int j = n - 2; j >= 0; --j) {
    const int ylag = sd.y[j];  // transition j -> j+1 is driven by y_j
    k.bwd_step2(row(out.lz, j + 1, 0), row(out.lz, j + 1, 1),
                tr_row(ws, ylag, 0, qpad), tr_row(ws, ylag, 1, qpad),
                tr_row(ws, ylag, 2, qpad), tr_row(ws, ylag, 3, qpad),
                erow(j + 1, 0), erow(j + 1, 1), row(out.lz, j, 0),
                row(out.lz, j, 1), qpad);
    g_step_ops += 4u * static_cast<std::uint64_t>(q);
  }
}

namespace {

// Plain scalar forward pass for a single u; the mode search in the
// adaptation step calls this thousands of times per fit, where the batch
// machinery is all overhead.
double cond_loglik_single(const ModelParams& p, const SubjectData& sd,
                          double u) {
  const double a2u = p.alpha2 * u;
  const double b3u = p.beta3 * u;
  const double exp_b3u = std::exp(b3u);

  double lt[2][4];
  for (int yprev = 0; yprev < 2; ++yprev) {
    const double z01 = p.gamma01 + p.delta1 * yprev + u;
    const double z10 = p.gamma10 + p.delta2 * yprev + p.delta_star * u;
    lt[yprev][0] = -softplus(z01);   // log(1-p01)
    lt[yprev][1] = -softplus(-z01);  // log p01
    lt[yprev][2] = -softplus(-z10);  // log p10
    lt[yprev][3] = -softplus(z10);   // log(1-p10)
  }

  const auto emit = [&](int j, int m) {
    const double lm = sd.log_miles[j];
    const double eta_y = lm + p.alpha0 + p.alpha1 * m + a2u;
    const double c2 = lm + p.beta0 + p.beta1 * m + p.beta2 * sd.t[j];
    return (sd.y[j] == 1 ? -softplus(-eta_y) : -softplus(eta_y)) +
           sd.x[j] * (c2 + b3u) - std::exp(c2) * exp_b3u - sd.lgamma_x1[j];
  };

  const auto r = initial_dist(p);
  double la0 = std::log(r[0]) + emit(0, 0);
  double la1 = std::log(r[1]) + emit(0, 1);
  for (int j = 1; j < sd.n; ++j) {
    const double* t = lt[sd.y[j - 1]];
    const double n0 = logsumexp2(la0 + t[0], la1 + t[2]) + emit(j, 0);
    const double n1 = logsumexp2(la0 + t[1], la1 + t[3]) + emit(j, 1);
    la0 = n0;
    la1 = n1;
  }
  g_step_ops += 4u * static_cast<std::uint64_t>(sd.n - 1);
  return logsumexp2(la0, la1);
}

}  // namespace

void cond_loglik_batch(const ModelParams& p, const SubjectData& sd,
                       const double* us, int q, double* cond) {
  if (q == 1) {
    cond[0] = cond_loglik_single(p, sd, us[0]);
    return;
  }
  forward_backward_batch(p, sd, us, q, false, tls_fb);
  std::copy(tls_fb.cond.begin(), tls_fb.cond.end(), cond);
}

FBResult forward_pass(const ModelParams& p, const SubjectSeries& s, double u) {
  s.validate();
  const SubjectData sd = SubjectData::from(s);
  BatchFB fb;
  forward_backward_batch(p, sd, &u, 1, false, fb);
  FBResult res;
  res.n = sd.n;
  res.log_forward.resize(static_cast<std::size_t>(sd.n) * 2);
  for (int j = 0; j < sd.n; ++j)
    for (int m = 0; m < 2; ++m)
      res.log_forward[j * 2 + m] =
          fb.la[(static_cast<std::size_t>(j) * 2 + m) * fb.qpad];
  res.cond_loglik = fb.cond[0];
  return res;
}

std::vector<double> backward_pass(const ModelParams& p, const SubjectSeries& s,
                                  double u) {
  s.validate();
  const SubjectData sd = SubjectData::from(s);
  BatchFB fb;
  forward_backward_batch(p, sd, &u, 1, true, fb);
  std::vector<double> lz(static_cast<std::size_t>(sd.n) * 2);
  for (int j = 0; j < sd.n; ++j)
    for (int m = 0; m < 2; ++m)
      lz[j * 2 + m] = fb.lz[(static_cast<std::size_t>(j) * 2 + m) * fb.qpad];
  return lz;
}

FBResult forward_backward(const ModelParams& p, const SubjectSeries& s,
                          double u) {
  FBResult res = forward_pass(p, s, u);
  res.log_backward = backward_pass(p, s, u);
  return res;
}

std::vector<double> state_posterior_given_u(const ModelParams& p,
                                            const SubjectSeries& s, double u) {
  const FBResult fb = forward_backward(p, s, u);
  std::vector<double> post(static_cast<std::size_t>(fb.n) * 2);
  for (int j = 0; j < fb.n; ++j) {
    const double s0 = fb.log_forward[j * 2] + fb.log_backward[j * 2];
    const double s1 = fb.log_forward[j * 2 + 1] + fb.log_backward[j * 2 + 1];
    const double norm = logsumexp2(s0, s1);
    post[j * 2] = std::exp(s0 - norm);
    post[j * 2 + 1] = std::exp(s1 - norm);
  }
  return post;
}

std::vector<int> viterbi_given_u(const ModelParams& p, const SubjectSeries& s,
                                 double u) {
  s.validate();
  const int n = static_cast<int>(s.size());
  std::vector<double> dp(2), ndp(2);
  std::vector<int> bp(static_cast<std::size_t>(n) * 2, 0);

  const auto r = initial_dist(p);
  for (int m = 0; m < 2; ++m)
    dp[m] = std::log(r[m]) +
            emission_loglik(p, s.y[0], s.x[0], s.miles[0], s.t[0], m, u);

  for (int j = 1; j < n; ++j) {
    const auto P = transition_probs(p, u, s.y[j - 1]);
    for (int m = 0; m < 2; ++m) {
      const double from0 = dp[0] + std::log(P[0][m]);
      const double from1 = dp[1] + std::log(P[1][m]);
      const int best = from0 >= from1 ? 0 : 1;  // tie -> state 0
      bp[j * 2 + m] = best;
      ndp[m] = std::max(from0, from1) +
               emission_loglik(p, s.y[j], s.x[j], s.miles[j], s.t[j], m, u);
    }
    dp = ndp;
  }

  std::vector<int> path(n);
  path[n - 1] = dp[0] >= dp[1] ? 0 : 1;
  for (int j = n - 1; j > 0; --j) path[j - 1] = bp[j * 2 + path[j]];
  return path;
}

double generic_forward(const GenericHmm& h, std::vector<double>* la_out) {
  const int K = h.K, n = h.n;
  std::vector<double> cur(h.log_init), nxt(K);
  for (int m = 0; m < K; ++m) cur[m] += h.log_emit[m];
  if (la_out) {
    la_out->assign(static_cast<std::size_t>(n) * K, 0.0);
    std::copy(cur.begin(), cur.end(), la_out->begin());
  }
  for (int j = 1; j < n; ++j) {
    const double* lt = h.log_trans.data() + static_cast<std::size_t>(j - 1) * K * K;
    for (int m = 0; m < K; ++m) {
      double acc = cur[0] + lt[m];
      for (int l = 1; l < K; ++l) acc = logsumexp2(acc, cur[l] + lt[l * K + m]);
      nxt[m] = acc + h.log_emit[static_cast<std::size_t>(j) * K + m];
    }
    g_step_ops += static_cast<std::uint64_t>(K) * K;
    cur.swap(nxt);
    if (la_out)
      std::copy(cur.begin(), cur.end(),
                la_out->begin() + static_cast<std::size_t>(j) * K);
  }
  double total = cur[0];
  for (int m = 1; m < K; ++m) total = logsumexp2(total, cur[m]);
  return total;
}

std::uint64_t step_ops() { return g_step_ops; }
void reset_step_ops() { g_step_ops = 0; }

}  // namespace mhmm::fb
