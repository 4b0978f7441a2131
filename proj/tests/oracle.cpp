#include "oracle.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

using mhmm::ModelParams;
using mhmm::SubjectSeries;

double emission_density(const ModelParams& p, int y, int x, double miles,
                        int t, int b, double u) {
  const double py = 1.0 / (1.0 + std::exp(-(std::log(miles) + p.alpha0 +
                                            p.alpha1 * b + p.alpha2 * u)));
  const double bern = y == 1 ? py : 1.0 - py;
  const double mu = miles * std::exp(p.beta0 + p.beta1 * b + p.beta2 * t +
                                     p.beta3 * u);
  double fact = 1.0;
  for (int k = 2; k <= x; ++k) fact *= k;
  const double pois = std::pow(mu, x) * std::exp(-mu) / fact;
  return bern * pois;
}

namespace {

// joint probability of (path, data) given u
double path_joint(const ModelParams& p, const SubjectSeries& s, double u,
                  unsigned path) {
  const int n = static_cast<int>(s.size());
  const auto r = mhmm::initial_dist(p);
  double prob = r[path & 1u];
  int prev = path & 1u;
  prob *= emission_density(p, s.y[0], s.x[0], s.miles[0], s.t[0], prev, u);
  for (int j = 1; j < n; ++j) {
    const int b = (path >> j) & 1u;
    const auto P = mhmm::transition_probs(p, u, s.y[j - 1]);
    prob *= P[prev][b];
    prob *= emission_density(p, s.y[j], s.x[j], s.miles[j], s.t[j], b, u);
    prev = b;
  }
  return prob;
}

}  // namespace

double path_likelihood(const ModelParams& p, const SubjectSeries& s,
                       double u) {
  const int n = static_cast<int>(s.size());
  if (n > 20) throw std::runtime_error("path_likelihood: series too long");
  long double total = 0.0L;
  for (unsigned path = 0; path < (1u << n); ++path)
    total += path_joint(p, s, u, path);
  return static_cast<double>(total);
}

std::vector<double> path_posterior(const ModelParams& p,
                                   const SubjectSeries& s, double u) {
  const int n = static_cast<int>(s.size());
  std::vector<long double> num(n, 0.0L);
  long double den = 0.0L;
  for (unsigned path = 0; path < (1u << n); ++path) {
    const long double pr = path_joint(p, s, u, path);
    den += pr;
    for (int j = 0; j < n; ++j)
      if ((path >> j) & 1u) num[j] += pr;
  }
  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) out[j] = static_cast<double>(num[j] / den);
  return out;
}

std::vector<int> path_viterbi(const ModelParams& p, const SubjectSeries& s,
                              double u) {
  const int n = static_cast<int>(s.size());
  double best = -1.0;
  unsigned best_path = 0;
  for (unsigned path = 0; path < (1u << n); ++path) {
    const double pr = path_joint(p, s, u, path);
    if (pr > best) {
      best = pr;
      best_path = path;
    }
  }
  std::vector<int> out(n);
  for (int j = 0; j < n; ++j) out[j] = (best_path >> j) & 1u;
  return out;
}

double trapezoid_expectation(const std::function<double(double)>& f,
                             double var, double center, int n_points) {
  const double sd = std::sqrt(var);
  const double lo = center - 8.0 * sd, hi = center + 8.0 * sd;
  const double h = (hi - lo) / (n_points - 1);
  long double sum = 0.0L;
  for (int i = 0; i < n_points; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n_points - 1) ? 0.5 : 1.0;
    sum += w * f(x) *
           std::exp(-0.5 * (x - 0.0) * (x - 0.0) / var) /
           std::sqrt(2.0 * M_PI * var);
  }
  return static_cast<double>(sum * h);
}

double trapezoid_marginal(const ModelParams& p, const SubjectSeries& s,
                          int n_points) {
  return trapezoid_expectation(
      [&](double u) { return path_likelihood(p, s, u); }, p.re_variance(), 0.0,
      n_points);
}

std::vector<double> trapezoid_posterior(const ModelParams& p,
                                        const SubjectSeries& s, int n_points) {
  const int n = static_cast<int>(s.size());
  std::vector<double> out(n);
  const double den = trapezoid_marginal(p, s, n_points);
  for (int j = 0; j < n; ++j) {
    const double num = trapezoid_expectation(
        [&](double u) {
          // joint probability restricted to paths with b_j = 1
          long double acc = 0.0L;
          for (unsigned path = 0; path < (1u << n); ++path)
            if ((path >> j) & 1u) acc += path_joint(p, s, u, path);
          return static_cast<double>(acc);
        },
        p.re_variance(), 0.0, n_points);
    out[j] = num / den;
  }
  return out;
}

double trapezoid_one_step(const ModelParams& p, const SubjectSeries& history,
                          double miles_next, int n_points) {
  const int n = static_cast<int>(history.size());
  const auto extend = [&](double u) {
    // sum over paths of history joint times transition into the next state
    // times the event probability at the next month
    long double acc = 0.0L;
    for (unsigned path = 0; path < (1u << n); ++path) {
      const long double pr = path_joint(p, history, u, path);
      const int last = (path >> (n - 1)) & 1u;
      const auto P = mhmm::transition_probs(p, u, history.y[n - 1]);
      for (int b = 0; b < 2; ++b)
        acc += pr * P[last][b] * mhmm::cnc_prob(p, b, u, miles_next);
    }
    return static_cast<double>(acc);
  };
  const double num =
      trapezoid_expectation(extend, p.re_variance(), 0.0, n_points);
  const double den = trapezoid_marginal(p, history, n_points);
  return num / den;
}

double mann_whitney_auc(const std::vector<double>& scores,
                        const std::vector<int>& labels) {
  double u = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++n_pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j])
        u += 1.0;
      else if (scores[i] == scores[j])
        u += 0.5;
    }
  }
  for (int l : labels)
    if (l == 0) ++n_neg;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace oracle
