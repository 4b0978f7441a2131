#include "mhmm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mhmm/fb.hpp"
#include "mhmm/kernels.hpp"
#include "mhmm/quadrature.hpp"

namespace mhmm {

namespace {

// history series may be shorter than the 2-observation minimum of a full one
void validate_history(const SubjectSeries& s) {
  const std::size_t n = s.t.size();
  if (n < 1) throw ValidationError("one_step_ahead: history is empty");
  if (s.miles.size() != n || s.y.size() != n || s.x.size() != n)
    throw ValidationError("one_step_ahead: history vectors differ in length");
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0 && s.t[j] != s.t[j - 1] + 1)
      throw ValidationError("one_step_ahead: history months not contiguous");
    if (!(s.miles[j] > 0.0))
      throw ValidationError("one_step_ahead: non-positive miles in history");
    if (s.y[j] != 0 && s.y[j] != 1)
      throw ValidationError("one_step_ahead: y must be 0/1");
    if (s.x[j] < 0) throw ValidationError("one_step_ahead: negative count");
  }
}

struct AdaptedNodes {
  std::vector<double> nodes, logw;
};

AdaptedNodes subject_nodes(const ModelParams& p, const fb::SubjectData& sd,
                           int q) {
  const QuadratureRule base = gh_rule(q);
  const auto f = [&](double u) {
    double out;
    fb::cond_loglik_batch(p, sd, &u, 1, &out);
    return out;
  };
  const Adaptation a = find_adaptation(f, p.lambda);
  AdaptedNodes an;
  an.nodes.resize(q);
  an.logw.resize(q);
  for (int k = 0; k < q; ++k) an.nodes[k] = a.center + a.scale * base.nodes[k];
  adapted_log_weights(base, a.center, a.scale, p.lambda, an.logw.data());
  return an;
}

}  // namespace

std::vector<double> posterior_state(const ModelParams& p,
                                    const SubjectSeries& s, int q) {
  s.validate();
  const auto sd = fb::SubjectData::from(s);
  const auto an = subject_nodes(p, sd, q);

  fb::BatchFB batch;
  fb::forward_backward_batch(p, sd, an.nodes.data(), q, true, batch);

  const auto& kk = kernels::active_kernels();
  const double log_den =
      kk.logsumexp2v(an.logw.data(), batch.cond.data(), q);
  if (!std::isfinite(log_den))
    throw NumericalError("posterior_state: non-finite likelihood for subject " +
                         s.subject_id);

  std::vector<double> tmp(q), out(sd.n);
  for (int j = 0; j < sd.n; ++j) {
    const double* la1 =
        batch.la.data() + (static_cast<std::size_t>(j) * 2 + 1) * batch.qpad;
    const double* lz1 =
        batch.lz.data() + (static_cast<std::size_t>(j) * 2 + 1) * batch.qpad;
    for (int k = 0; k < q; ++k) tmp[k] = la1[k] + lz1[k];
    const double log_num = kk.logsumexp2v(an.logw.data(), tmp.data(), q);
    out[j] = std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
  }
  return out;
}

std::vector<double> posterior_state(const FitResult& fit,
                                    const SubjectSeries& s, int q) {
  return posterior_state(fit.estimates, s, q);
}

double one_step_ahead(const ModelParams& p, const SubjectSeries& history,
                      double miles_next, int t_next, int q) {
  (void)t_next;
  validate_history(history);
  if (!(miles_next > 0.0))
    throw std::domain_error("one_step_ahead: miles_next must be positive");

  const auto sd = fb::SubjectData::from(history);
  const auto an = subject_nodes(p, sd, q);

  fb::BatchFB batch;
  fb::forward_backward_batch(p, sd, an.nodes.data(), q, false, batch);

  const int n = sd.n;
  const int ylag = sd.y[n - 1];
  std::vector<double> num(q);
  for (int k = 0; k < q; ++k) {
    const double u = an.nodes[k];
    const double la0 =
        batch.la[(static_cast<std::size_t>(n - 1) * 2 + 0) * batch.qpad + k];
    const double la1 =
        batch.la[(static_cast<std::size_t>(n - 1) * 2 + 1) * batch.qpad + k];
    const auto P = transition_probs(p, u, ylag);
    const double lp0 = logsumexp2(la0 + std::log(P[0][0]), la1 + std::log(P[1][0]));
    const double lp1 = logsumexp2(la0 + std::log(P[0][1]), la1 + std::log(P[1][1]));
    num[k] = logsumexp2(lp0 + std::log(cnc_prob(p, 0, u, miles_next)),
                        lp1 + std::log(cnc_prob(p, 1, u, miles_next)));
  }

  const auto& kk = kernels::active_kernels();
  const double log_num = kk.logsumexp2v(an.logw.data(), num.data(), q);
  const double log_den = kk.logsumexp2v(an.logw.data(), batch.cond.data(), q);
  if (!std::isfinite(log_num) || !std::isfinite(log_den))
    throw NumericalError("one_step_ahead: non-finite integrals for subject " +
                         history.subject_id);
  return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ValidationError("roc: scores and labels must have equal nonzero size");
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ValidationError("roc: non-finite score");
    if (labels[i] == 1)
      ++n_pos;
    else if (labels[i] == 0)
      ++n_neg;
    else
      throw ValidationError("roc: labels must be 0/1");
  }
  if (n_pos == 0 || n_neg == 0)
    throw ValidationError("roc: need at least one positive and one negative label");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.points.push_back(
      {0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0, i = 0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // consume the whole tie group in one step
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1)
        ++tp;
      else
        ++fp;
      ++i;
    }
    const double fpr = static_cast<double>(fp) / n_neg;
    const double tpr = static_cast<double>(tp) / n_pos;
    curve.points.push_back({fpr, tpr, s});
    curve.auc += (fpr - prev_fpr) * 0.5 * (tpr + prev_tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  return curve;
}

LosoResult loso_cv(const Dataset& d, const FitConfig& cfg) {
  d.validate();
  if (d.subjects.size() < 3)
    throw ValidationError("loso_cv: need at least 3 subjects");

  FitConfig full_cfg = cfg;
  full_cfg.compute_se = false;
  const FitResult full = fit(d, full_cfg);

  const std::size_t n_sub = d.subjects.size();
  struct Fold {
    bool diverged = false;
    bool converged = true;
    std::vector<LosoPrediction> preds;
  };
  std::vector<Fold> folds(n_sub);

  parallel_for(n_sub, cfg.threads, [&](std::size_t i) {
    Dataset rest;
    rest.subjects.reserve(n_sub - 1);
    for (std::size_t j = 0; j < n_sub; ++j)
      if (j != i) rest.subjects.push_back(d.subjects[j]);

    FitConfig fold_cfg = cfg;
    fold_cfg.compute_se = false;
    fold_cfg.init = full.estimates;  // warm start
    fold_cfg.threads = 1;

    ModelParams est;
    try {
      const FitResult fr = fit(rest, fold_cfg);
      est = fr.estimates;
      folds[i].converged = fr.converged;
    } catch (const NumericalError&) {
      folds[i].diverged = true;
      return;
    }

    const SubjectSeries& held = d.subjects[i];
    SubjectSeries prefix;
    prefix.subject_id = held.subject_id;
    for (std::size_t j = 1; j < held.size(); ++j) {
      prefix.t.assign(held.t.begin(), held.t.begin() + j);
      prefix.miles.assign(held.miles.begin(), held.miles.begin() + j);
      prefix.y.assign(held.y.begin(), held.y.begin() + j);
      prefix.x.assign(held.x.begin(), held.x.begin() + j);
      const double score =
          one_step_ahead(est, prefix, held.miles[j], held.t[j], cfg.q);
      folds[i].preds.push_back(
          {held.subject_id, held.t[j], score, held.y[j]});
    }
  });

  LosoResult res;
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n_sub; ++i) {
    if (folds[i].diverged) {
      res.excluded_subjects.push_back(d.subjects[i].subject_id);
      continue;
    }
    if (!folds[i].converged) ++res.n_nonconverged_folds;
    for (const auto& pr : folds[i].preds) {
      res.predictions.push_back(pr);
      scores.push_back(pr.score);
      labels.push_back(pr.label);
    }
  }
  res.curve = roc(scores, labels);
  return res;
}

}  // namespace mhmm
