#include "mhmm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mhmm/kernels.hpp"
#include "mhmm/optimize.hpp"

namespace mhmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<int> free_indices(const std::array<bool, kNumParams>& mask) {
  std::vector<int> idx;
  for (int i = 0; i < kNumParams; ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

std::vector<double> extract(const ModelParams& p, const std::vector<int>& idx) {
  const auto a = to_array(p);
  std::vector<double> th(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) th[i] = a[idx[i]];
  return th;
}

ModelParams embed(const ModelParams& base, const std::vector<int>& idx,
                  const std::vector<double>& th) {
  auto a = to_array(base);
  for (std::size_t i = 0; i < idx.size(); ++i) a[idx[i]] = th[i];
  return params_from_array(a);
}

// Moment-based starting values; the fixed-effect pre-fit refines them.
ModelParams heuristic_start(const Dataset& d) {
  double sy = 0.0, sx = 0.0, smiles = 0.0;
  std::size_t n = 0;
  for (const auto& s : d.subjects) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      sy += s.y[j];
      sx += s.x[j];
      smiles += s.miles[j];
      ++n;
    }
  }
  const double ybar = std::clamp(sy / n, 0.02, 0.98);
  const double xbar = std::max(sx / n, 0.05);
  const double mbar = smiles / n;

  ModelParams p;
  p.alpha0 = std::log(ybar / (1.0 - ybar)) - std::log(mbar);
  p.alpha1 = 1.0;
  p.beta0 = std::log(xbar) - std::log(mbar);
  p.beta1 = 1.0;
  p.gamma01 = -2.0;
  p.gamma10 = -1.0;
  p.pi1 = 0.0;
  return p;
}

// FD Hessian with the function evaluations fanned out over threads.
std::vector<double> parallel_fd_hessian(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double rel_step, int threads) {
  const int k = static_cast<int>(x.size());
  std::vector<double> h(k);
  for (int i = 0; i < k; ++i) h[i] = rel_step * std::max(1.0, std::abs(x[i]));

  std::vector<std::vector<double>> pts;
  pts.push_back(x);
  for (int i = 0; i < k; ++i) {
    auto xp = x;
    xp[i] = x[i] + h[i];
    pts.push_back(xp);
    xp[i] = x[i] - h[i];
    pts.push_back(xp);
  }
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      for (int si = -1; si <= 1; si += 2)
        for (int sj = -1; sj <= 1; sj += 2) {
          auto xp = x;
          xp[i] = x[i] + si * h[i];
          xp[j] = x[j] + sj * h[j];
          pts.push_back(xp);
        }

  std::vector<double> vals(pts.size());
  parallel_for(pts.size(), threads,
               [&](std::size_t i) { vals[i] = f(pts[i]); });

  std::vector<double> H(static_cast<std::size_t>(k) * k, 0.0);
  const double f0 = vals[0];
  for (int i = 0; i < k; ++i) {
    const double fp = vals[1 + 2 * i], fm = vals[2 + 2 * i];
    H[i * k + i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  std::size_t pos = 1 + 2 * static_cast<std::size_t>(k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      // order pushed above: (-,-), (-,+), (+,-), (+,+)
      const double fmm = vals[pos], fmp = vals[pos + 1], fpm = vals[pos + 2],
                   fpp = vals[pos + 3];
      pos += 4;
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
      H[i * k + j] = v;
      H[j * k + i] = v;
    }
  return H;
}

}  // namespace

std::string Variant::to_string() const {
  switch (kind) {
    case VariantKind::mixed2:
      return "mixed2";
    case VariantKind::fixed2:
      return "fixed2";
    case VariantKind::fixedK:
      return "fixedK:" + std::to_string(K);
  }
  return "mixed2";
}

Variant Variant::parse(const std::string& text) {
  Variant v;
  if (text == "mixed2") {
    v.kind = VariantKind::mixed2;
  } else if (text == "fixed2") {
    v.kind = VariantKind::fixed2;
  } else if (text.rfind("fixedK:", 0) == 0) {
    v.kind = VariantKind::fixedK;
    v.K = std::stoi(text.substr(7));
    if (v.K < 2) throw ValidationError("variant fixedK needs K >= 2");
  } else {
    throw ValidationError("unknown variant '" + text + "'");
  }
  return v;
}

void FitConfig::validate() const {
  if (q < 1 || q > 64) throw ValidationError("fit: q must be in [1, 64]");
  if (max_outer_iters < 1 || max_inner_iters < 1)
    throw ValidationError("fit: iteration caps must be positive");
  if (!(outer_tol_loglik > 0.0) || !(outer_tol_param > 0.0) ||
      !(optimizer_tol > 0.0))
    throw ValidationError("fit: tolerances must be positive");
  if (variant.kind == VariantKind::fixedK && variant.K < 2)
    throw ValidationError("fit: fixedK needs K >= 2");
  if (init && !init->all_finite())
    throw ValidationError("fit: init parameters must be finite");
}

// ---------------------------------------------------------------------------
// MarginalEvaluator

MarginalEvaluator::MarginalEvaluator(const Dataset& d, int q)
    : base_(gh_rule(q)) {
  // canonical subject_id order fixes the summation order, so the value is
  // invariant to permutations of the input
  std::vector<const SubjectSeries*> ordered;
  ordered.reserve(d.subjects.size());
  for (const auto& s : d.subjects) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const SubjectSeries* a, const SubjectSeries* b) {
              return a->subject_id < b->subject_id;
            });
  subjects_.reserve(ordered.size());
  ids_.reserve(ordered.size());
  for (const auto* s : ordered) {
    subjects_.push_back(fb::SubjectData::from(*s));
    ids_.push_back(s->subject_id);
  }
  adapts_.assign(subjects_.size(), Adaptation{});
}

double MarginalEvaluator::cond_loglik(const ModelParams& p, int subject,
                                      double u) const {
  double out;
  fb::cond_loglik_batch(p, subjects_[subject], &u, 1, &out);
  return out;
}

void MarginalEvaluator::adapt_all(const ModelParams& p, int threads) {
  lambda_at_adapt_ = p.lambda;
  parallel_for(subjects_.size(), threads, [&](std::size_t i) {
    adapts_[i] = find_adaptation(
        [&](double u) { return cond_loglik(p, static_cast<int>(i), u); },
        p.lambda);
  });
}

double MarginalEvaluator::subject_loglik(const ModelParams& p, int i) const {
  const int q = base_.order();
  thread_local std::vector<double> nodes, logw, cond;
  nodes.resize(q);
  logw.resize(q);
  cond.resize(q);

  const Adaptation& a = adapts_[i];
  for (int k = 0; k < q; ++k) nodes[k] = a.center + a.scale * base_.nodes[k];
  adapted_log_weights(base_, a.center, a.scale, p.lambda, logw.data());
  fb::cond_loglik_batch(p, subjects_[i], nodes.data(), q, cond.data());
  return kernels::active_kernels().logsumexp2v(logw.data(), cond.data(), q);
}

double MarginalEvaluator::loglik(const ModelParams& p, int threads,
                                 int* bad_subject) const {
  if (bad_subject) *bad_subject = -1;
  if (std::abs(p.lambda - lambda_at_adapt_) > kLambdaTrustRadius)
    return kNegInf;
  const std::size_t n = subjects_.size();
  thread_local std::vector<double> terms;
  std::vector<double> terms_local;
  std::vector<double>& t = threads > 1 ? terms_local : terms;
  t.assign(n, 0.0);
  parallel_for(n, threads,
               [&](std::size_t i) { t[i] = subject_loglik(p, static_cast<int>(i)); });
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(t[i])) {
      if (bad_subject) *bad_subject = static_cast<int>(i);
      return kNegInf;
    }
    total += t[i];
  }
  return total;
}

double marginal_loglik(const ModelParams& p, const Dataset& d, int q,
                       int threads) {
  d.validate();
  if (!p.all_finite())
    throw ValidationError("marginal_loglik: parameters must be finite");
  MarginalEvaluator ev(d, q);
  ev.adapt_all(p, threads);
  int bad = -1;
  const double ll = ev.loglik(p, threads, &bad);
  if (!std::isfinite(ll))
    throw NumericalError(
        "marginal_loglik: non-finite likelihood for subject " +
        (bad >= 0 ? ev.subject_ids()[bad] : std::string("?")));
  return ll;
}

double random_effect_mode(const ModelParams& p, const SubjectSeries& s,
                          int q) {
  (void)q;  // mode does not depend on the rule order
  s.validate();
  const auto sd = fb::SubjectData::from(s);
  const auto f = [&](double u) {
    double out;
    fb::cond_loglik_batch(p, sd, &u, 1, &out);
    return out;
  };
  return find_adaptation(f, p.lambda).center;
}

// ---------------------------------------------------------------------------
// fixed-effect two-state likelihood (no random effect, u identically 0)

namespace {

double fixed2_loglik(const ModelParams& p,
                     const std::vector<fb::SubjectData>& subjects) {
  double total = 0.0;
  const double u0 = 0.0;
  for (const auto& sd : subjects) {
    double cond;
    fb::cond_loglik_batch(p, sd, &u0, 1, &cond);
    if (!std::isfinite(cond)) return kNegInf;
    total += cond;
  }
  return total;
}

// ---------------------------------------------------------------------------
// fixed-effect K-state comparison model: full (K^2-K)-logit transition set,
// K-1 initial logits, per-state emission shifts, no lagged-outcome terms.

struct FixedKLayout {
  int K = 0;
  int n_params() const { return 3 + 2 * (K - 1) + K * (K - 1) + (K - 1); }
  int idx_alpha0() const { return 0; }
  int idx_alpha1(int m) const { return 1 + (m - 1); }  // m in 1..K-1
  int idx_beta0() const { return K; }
  int idx_beta1(int m) const { return K + 1 + (m - 1); }
  int idx_beta2() const { return 2 * K; }
  // row l, column m (m != l), columns ordered skipping the diagonal
  int idx_eta(int l, int m) const {
    const int col = m > l ? m - 1 : m;
    return 2 * K + 1 + l * (K - 1) + col;
  }
  int idx_init(int m) const {  // m in 1..K-1
    return 2 * K + 1 + K * (K - 1) + (m - 1);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out(n_params());
    out[idx_alpha0()] = "alpha0";
    for (int m = 1; m < K; ++m) out[idx_alpha1(m)] = "alpha1_" + std::to_string(m);
    out[idx_beta0()] = "beta0";
    for (int m = 1; m < K; ++m) out[idx_beta1(m)] = "beta1_" + std::to_string(m);
    out[idx_beta2()] = "beta2";
    for (int l = 0; l < K; ++l)
      for (int m = 0; m < K; ++m)
        if (m != l)
          out[idx_eta(l, m)] =
              "eta_" + std::to_string(l) + std::to_string(m);
    for (int m = 1; m < K; ++m) out[idx_init(m)] = "pi_" + std::to_string(m);
    return out;
  }
};

double fixedk_loglik(const std::vector<double>& th, const FixedKLayout& lay,
                     const std::vector<fb::SubjectData>& subjects) {
  const int K = lay.K;

  // log initial distribution and a single log transition matrix (shared by
  // every step; this variant has no lagged-outcome terms)
  std::vector<double> linit(K), ltrans(static_cast<std::size_t>(K) * K);
  {
    std::vector<double> logits(K, 0.0);
    for (int m = 1; m < K; ++m) logits[m] = th[lay.idx_init(m)];
    const double norm = logsumexp(logits);
    for (int m = 0; m < K; ++m) linit[m] = logits[m] - norm;
  }
  for (int l = 0; l < K; ++l) {
    std::vector<double> logits(K, 0.0);
    for (int m = 0; m < K; ++m)
      if (m != l) logits[m] = th[lay.idx_eta(l, m)];
    const double norm = logsumexp(logits);
    for (int m = 0; m < K; ++m) ltrans[l * K + m] = logits[m] - norm;
  }

  double total = 0.0;
  fb::GenericHmm h;
  for (const auto& sd : subjects) {
    h.n = sd.n;
    h.K = K;
    h.log_init = linit;
    h.log_trans.resize(static_cast<std::size_t>(sd.n - 1) * K * K);
    for (int j = 0; j + 1 < sd.n; ++j)
      std::copy(ltrans.begin(), ltrans.end(),
                h.log_trans.begin() + static_cast<std::size_t>(j) * K * K);
    h.log_emit.resize(static_cast<std::size_t>(sd.n) * K);
    for (int j = 0; j < sd.n; ++j) {
      const double lm = sd.log_miles[j];
      for (int m = 0; m < K; ++m) {
        const double a1 = m == 0 ? 0.0 : th[lay.idx_alpha1(m)];
        const double b1 = m == 0 ? 0.0 : th[lay.idx_beta1(m)];
        const double eta_y = lm + th[lay.idx_alpha0()] + a1;
        const double eta_x =
            lm + th[lay.idx_beta0()] + b1 + th[lay.idx_beta2()] * sd.t[j];
        h.log_emit[static_cast<std::size_t>(j) * K + m] =
            sd.y[j] * eta_y - softplus(eta_y) + sd.x[j] * eta_x -
            std::exp(eta_x) - sd.lgamma_x1[j];
      }
    }
    const double cond = fb::generic_forward(h);
    if (!std::isfinite(cond)) return kNegInf;
    total += cond;
  }
  return total;
}

FitResult fit_fixedk(const Dataset& d, const FitConfig& cfg) {
  FixedKLayout lay{cfg.variant.K};
  std::vector<fb::SubjectData> subjects;
  for (const auto& s : d.subjects) subjects.push_back(fb::SubjectData::from(s));

  std::vector<double> th(lay.n_params(), 0.0);
  {
    const ModelParams h = heuristic_start(d);
    th[lay.idx_alpha0()] = h.alpha0;
    th[lay.idx_beta0()] = h.beta0;
    for (int m = 1; m < lay.K; ++m) {
      th[lay.idx_alpha1(m)] = 0.5 * m;
      th[lay.idx_beta1(m)] = 0.5 * m;
    }
    for (int l = 0; l < lay.K; ++l)
      for (int m = 0; m < lay.K; ++m)
        if (m != l) th[lay.idx_eta(l, m)] = -1.0;
  }

  long evals = 0;
  const auto obj = [&](const std::vector<double>& t) {
    ++evals;
    return -fixedk_loglik(t, lay, subjects);
  };

  optim::BfgsOptions bo;
  bo.max_iters = cfg.max_inner_iters;
  bo.grad_tol = cfg.optimizer_tol;
  const auto r = optim::bfgs_minimize(obj, th, bo);

  FitResult res;
  res.variant = cfg.variant;
  res.theta = r.x;
  res.names = lay.names();
  res.loglik = -r.f;
  res.aic = aic(res.loglik, lay.n_params());
  res.converged = r.converged;
  res.outer_iters = 1;
  res.n_loglik_evals = evals;
  res.loglik_trace = {res.loglik};
  for (const auto& s : d.subjects) res.subject_ids.push_back(s.subject_id);

  if (cfg.compute_se) {
    const auto H = parallel_fd_hessian(obj, r.x, 1e-2, cfg.threads);
    std::vector<double> vcov;
    auto Hp = H;
    res.vcov_projected = optim::project_psd(Hp, lay.n_params());
    if (optim::invert_spd(Hp, lay.n_params(), vcov)) {
      res.vcov = vcov;
      res.se.resize(lay.n_params());
      for (int i = 0; i < lay.n_params(); ++i)
        res.se[i] = std::sqrt(std::max(0.0, vcov[i * lay.n_params() + i]));
      res.se_available = true;
    }
  }
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// std_errors

StdErrors std_errors(const Dataset& d, const ModelParams& p_hat, int q,
                     const std::array<bool, kNumParams>& free_mask,
                     int threads) {
  d.validate();
  MarginalEvaluator ev(d, q);
  // Adaptation is computed once at p_hat and frozen across the perturbed
  // evaluations; at the orders used here the adaptation shift contributes
  // only beyond the finite-difference error.
  ev.adapt_all(p_hat, threads);

  const auto idx = free_indices(free_mask);
  const int k = static_cast<int>(idx.size());
  const auto f = [&](const std::vector<double>& th) {
    return -ev.loglik(embed(p_hat, idx, th), 1, nullptr);
  };

  StdErrors out;
  const auto H = parallel_fd_hessian(f, extract(p_hat, idx), 1e-2, threads);
  auto Hp = H;
  out.projected = optim::project_psd(Hp, k);
  if (!optim::invert_spd(Hp, k, out.vcov)) return out;
  out.se.resize(k);
  for (int i = 0; i < k; ++i)
    out.se[i] = std::sqrt(std::max(0.0, out.vcov[i * k + i]));
  out.available = true;
  return out;
}

// ---------------------------------------------------------------------------
// fit

FitResult fit(const Dataset& d_in, const FitConfig& cfg) {
  cfg.validate();
  d_in.validate();
  if (d_in.subjects.empty()) throw ValidationError("fit: dataset is empty");

  Dataset d = d_in;  // canonical subject order
  d.sort_by_id();

  if (cfg.variant.kind == VariantKind::fixedK) return fit_fixedk(d, cfg);

  const bool mixed = cfg.variant.kind == VariantKind::mixed2;

  auto mask = cfg.free;
  if (!mixed) {
    // no random effect: loadings and variance are out of the model
    mask[param_index("alpha2")] = false;
    mask[param_index("beta3")] = false;
    mask[param_index("delta_star")] = false;
    mask[param_index("lambda")] = false;
  }
  const auto idx = free_indices(mask);
  if (idx.empty()) throw ValidationError("fit: no free parameters");

  std::vector<fb::SubjectData> subjects;
  for (const auto& s : d.subjects) subjects.push_back(fb::SubjectData::from(s));

  FitResult res;
  res.variant = cfg.variant;
  for (const auto& s : d.subjects) res.subject_ids.push_back(s.subject_id);

  long evals = 0;

  // ---- starting point ----
  ModelParams p0;
  if (cfg.init) {
    p0 = *cfg.init;
    if (!mixed) {
      p0.alpha2 = 0.0;
      p0.beta3 = 0.0;
      p0.delta_star = 0.0;
      p0.lambda = 0.0;
    }
  } else {
    // stage 1: fixed-effect pre-fit for the shared parameters
    FitConfig pre = cfg;
    pre.variant.kind = VariantKind::fixed2;
    pre.init = heuristic_start(d);
    pre.compute_se = false;
    pre.free = all_free();
    const FitResult prefit = fit(d, pre);
    evals += prefit.n_loglik_evals;
    p0 = prefit.estimates;
    p0.alpha2 = 0.0;
    p0.beta3 = 0.0;
    p0.delta_star = 0.0;
    p0.lambda = 0.0;
  }

  MarginalEvaluator ev(d, cfg.q);

  if (mixed && !cfg.init) {
    // stage 2: grid over the random-effect loadings
    const std::vector<double> grid = {0.25, 0.75, 1.25};
    const std::vector<double> lgrid = {-1.0, 0.0};
    double best = kNegInf;
    ModelParams best_p = p0;
    for (const double b3 : grid)
      for (const double ds : grid)
        for (const double lm : lgrid) {
          ModelParams cand = p0;
          cand.beta3 = b3;
          cand.delta_star = ds;
          cand.lambda = lm;
          ev.adapt_all(cand, cfg.threads);
          const double ll = ev.loglik(cand, 1, nullptr);
          ++evals;
          if (ll > best) {
            best = ll;
            best_p = cand;
          }
        }
    if (!std::isfinite(best))
      throw NumericalError("fit: no finite likelihood on the starting grid");
    p0 = best_p;
  }

  // ---- objective ----
  optim::BfgsOptions bo;
  bo.max_iters = cfg.max_inner_iters;
  bo.grad_tol = cfg.optimizer_tol;

  ModelParams p = p0;
  double ll_prev = kNegInf;

  if (!mixed) {
    const auto obj = [&](const std::vector<double>& th) {
      ++evals;
      return -fixed2_loglik(embed(p0, idx, th), subjects);
    };
    const auto r = optim::bfgs_minimize(obj, extract(p0, idx), bo);
    p = embed(p0, idx, r.x);
    res.converged = r.converged;
    res.outer_iters = 1;
    res.loglik = -r.f;
    res.loglik_trace = {res.loglik};
  } else {
    ev.adapt_all(p, cfg.threads);
    const auto obj = [&](const std::vector<double>& th) {
      ++evals;
      return -ev.loglik(embed(p0, idx, th), 1, nullptr);
    };

    // curvature carries across outer rounds; re-adaptation perturbs the
    // objective only slightly, so the previous inverse Hessian is a good
    // preconditioner for the next inner maximization
    std::vector<double> H_carry;
    bo.H_io = &H_carry;

    // Estimates can orbit the fixed point at a scale below any useful
    // accuracy because each re-adaptation nudges the objective. Once the
    // parameters stop moving materially, the adaptation is left alone so
    // the alternation contracts instead of cycling.
    ModelParams p_adapt = p;
    const double readapt_threshold = 10.0 * cfg.outer_tol_param;

    for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
      res.outer_iters = outer + 1;
      // inexact inner solves early, tight late: the outer parameter
      // tolerance needs the final rounds solved below its own scale
      bo.grad_tol = std::max(cfg.optimizer_tol * std::pow(0.3, outer),
                             std::max(1e-7, 1e-3 * cfg.optimizer_tol));
      const auto r = optim::bfgs_minimize(obj, extract(p, idx), bo);
      const ModelParams p_new = embed(p0, idx, r.x);
      const double ll_new = -r.f;
      res.loglik_trace.push_back(ll_new);

      const auto rel_change = [&](const ModelParams& a_p, const ModelParams& b_p) {
        const auto a = to_array(a_p), b = to_array(b_p);
        double dmax = 0.0;
        for (int i : idx)
          dmax = std::max(
              std::abs(b[i] - a[i]) / std::max(1.0, std::abs(a[i])), dmax);
        return dmax;
      };
      const double dparam = rel_change(p, p_new);
      const double dll =
          std::abs(ll_new - ll_prev) / std::max(1.0, std::abs(ll_new));

      p = p_new;
      if (rel_change(p_adapt, p) > readapt_threshold) {
        ev.adapt_all(p, cfg.threads);  // Table-2 step 2 for the next round
        p_adapt = p;
      }

      if (outer > 0 && dll < cfg.outer_tol_loglik &&
          dparam < cfg.outer_tol_param) {
        res.converged = true;
        break;
      }
      ll_prev = ll_new;
    }
    // final value under the freshly re-adapted rule
    res.loglik = ev.loglik(p, 1, nullptr);
    ++evals;
    if (!std::isfinite(res.loglik)) {
      int bad = -1;
      ev.loglik(p, 1, &bad);
      throw NumericalError("fit: non-finite likelihood at the optimum for subject " +
                           (bad >= 0 ? ev.subject_ids()[bad] : std::string("?")));
    }
    res.re_modes.reserve(ev.n_subjects());
    for (const auto& a : ev.adaptations()) res.re_modes.push_back(a.center);
  }

  res.estimates = p;
  res.theta = extract(p, idx);
  {
    const auto& all = param_names();
    for (int i : idx) res.names.push_back(all[i]);
  }
  res.aic = aic(res.loglik, static_cast<int>(idx.size()));
  res.n_loglik_evals = evals;

  if (cfg.compute_se) {
    StdErrors se;
    if (mixed) {
      se = std_errors(d, p, cfg.q, mask, cfg.threads);
    } else {
      const auto f = [&](const std::vector<double>& th) {
        return -fixed2_loglik(embed(p, idx, th), subjects);
      };
      const auto H =
          parallel_fd_hessian(f, extract(p, idx), 1e-2, cfg.threads);
      auto Hp = H;
      se.projected = optim::project_psd(Hp, static_cast<int>(idx.size()));
      if (optim::invert_spd(Hp, static_cast<int>(idx.size()), se.vcov)) {
        se.se.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
          se.se[i] =
              std::sqrt(std::max(0.0, se.vcov[i * idx.size() + i]));
        se.available = true;
      }
    }
    res.se = se.se;
    res.vcov = se.vcov;
    res.se_available = se.available;
    res.vcov_projected = se.projected;
  }
  return res;
}

}  // namespace mhmm
