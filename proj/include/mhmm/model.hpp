#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mhmm/common.hpp"

// Two-state mixed hidden Markov model for a joint longitudinal binary
// outcome (monthly crash/near-crash indicator) and count outcome (elevated
// g-force events), tied together by the hidden state and a shared Gaussian
// random effect u ~ N(0, e^lambda).
//
// State 0 is the good driving state, state 1 the poor one. Exposure (miles
// driven) enters both linear predictors as a log offset.

namespace mhmm {

struct ModelParams {
  // binary outcome: logit Pr(y=1) = log(miles) + alpha0 + alpha1*b + alpha2*u
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  // count outcome: log mean = log(miles) + beta0 + beta1*b + beta2*t + beta3*u
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  // transitions: logit p01 = gamma01 + delta1*y_prev + u
  //              logit p10 = gamma10 + delta2*y_prev + delta_star*u
  double gamma01 = 0.0;
  double gamma10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta_star = 0.0;
  // random-effect log variance and initial-state logit
  double lambda = 0.0;
  double pi1 = 0.0;

  double re_variance() const { return std::exp(lambda); }
  double re_sd() const { return std::exp(0.5 * lambda); }

  bool all_finite() const;
};

inline constexpr int kNumParams = 14;

// Canonical flattening order used by the optimizer, serialization and reports.
std::array<double, kNumParams> to_array(const ModelParams& p);
ModelParams params_from_array(const std::array<double, kNumParams>& a);
const std::array<std::string, kNumParams>& param_names();
int param_index(const std::string& name);  // -1 if unknown

// One subject's aligned monthly series. Months are contiguous; miles must be
// strictly positive so the log offset exists.
struct SubjectSeries {
  std::string subject_id;
  std::vector<int> t;       // month index, strictly increasing, unit spacing
  std::vector<double> miles;
  std::vector<int> y;       // binary crash/near-crash indicator
  std::vector<int> x;       // kinematic event count

  std::size_t size() const { return t.size(); }
  void validate() const;    // throws ValidationError
};

struct Dataset {
  std::vector<SubjectSeries> subjects;  // sorted by subject_id

  std::size_t n_subjects() const { return subjects.size(); }
  std::size_t n_observations() const;
  void validate() const;
  void sort_by_id();
};

// Pr(y=1 | state b, random effect u, exposure)
double cnc_prob(const ModelParams& p, int b, double u, double miles);

// Poisson mean for the count outcome
double count_mean(const ModelParams& p, int b, double u, double miles, int t);

// Row-stochastic 2x2 transition matrix given u and the lagged binary outcome;
// [from][to] indexing.
std::array<std::array<double, 2>, 2> transition_probs(const ModelParams& p,
                                                      double u, int y_prev);

// {Pr(b=0), Pr(b=1)} at the first observation
std::array<double, 2> initial_dist(const ModelParams& p);

// log Bernoulli(y; cnc_prob) + log Poisson(x; count_mean); the two outcomes
// are conditionally independent given (b, u).
double emission_loglik(const ModelParams& p, int y, int x, double miles, int t,
                       int b, double u);

}  // namespace mhmm
