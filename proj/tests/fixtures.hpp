#pragma once

#include <random>

#include "mhmm/model.hpp"

// Shared parameter fixtures and random-case generators for the tests.

namespace fixtures {

// Simulation-study truth (recovery scenario).
inline mhmm::ModelParams recovery_truth() {
  mhmm::ModelParams p;
  p.alpha0 = -1.0;
  p.alpha1 = 2.0;
  p.alpha2 = 1.5;
  p.beta0 = -1.0;
  p.beta1 = 2.0;
  p.beta2 = 0.0;  // no time trend in the recovery scenario
  p.beta3 = 0.25;
  p.gamma01 = -0.62;
  p.gamma10 = 0.4;
  p.delta1 = 1.0;
  p.delta2 = 3.0;
  p.delta_star = 2.0;
  p.lambda = 0.0;
  p.pi1 = -0.8;
  return p;
}

// Estimates from the published application (the teen-driving fit).
inline mhmm::ModelParams application_estimates() {
  mhmm::ModelParams p;
  p.alpha0 = -7.48;
  p.alpha1 = 1.49;
  p.alpha2 = 0.03;
  p.beta0 = -5.97;
  p.beta1 = 1.31;
  p.beta2 = 0.007;
  p.beta3 = 1.10;
  p.gamma01 = -3.47;
  p.gamma10 = -2.13;
  p.delta1 = 1.75;
  p.delta2 = -2.17;
  p.delta_star = 1.25;
  p.lambda = -0.18;
  p.pi1 = -0.83;
  return p;
}

inline mhmm::ModelParams random_params(std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  mhmm::ModelParams p;
  p.alpha0 = d(rng);
  p.alpha1 = d(rng);
  p.alpha2 = d(rng);
  p.beta0 = d(rng);
  p.beta1 = d(rng);
  p.beta2 = 0.1 * d(rng);
  p.beta3 = d(rng);
  p.gamma01 = d(rng);
  p.gamma10 = d(rng);
  p.delta1 = d(rng);
  p.delta2 = d(rng);
  p.delta_star = d(rng);
  p.lambda = std::uniform_real_distribution<double>(-1.0, 0.5)(rng);
  p.pi1 = d(rng);
  return p;
}

inline mhmm::SubjectSeries random_series(std::mt19937& rng, int n,
                                         const std::string& id = "S1") {
  std::uniform_real_distribution<double> miles_d(0.5, 3.0);
  std::uniform_int_distribution<int> y_d(0, 1);
  std::uniform_int_distribution<int> x_d(0, 6);
  mhmm::SubjectSeries s;
  s.subject_id = id;
  for (int j = 0; j < n; ++j) {
    s.t.push_back(j + 1);
    s.miles.push_back(miles_d(rng));
    s.y.push_back(y_d(rng));
    s.x.push_back(x_d(rng));
  }
  return s;
}

}  // namespace fixtures
