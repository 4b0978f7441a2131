#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/estimation.hpp"
#include "mhmm/model.hpp"
#include "mhmm/rng.hpp"

// Synthetic data generation from the shared-random-effect model, the
// correlated-random-effects misspecification model, and replication studies
// over simulate -> fit -> collect.

namespace mhmm {

// Exposure generator. The default (constant 1) makes the offset vanish so
// parameter-recovery studies target the coefficient values directly; the
// lognormal option produces naturalistic monthly mileage.
struct MilesGen {
  enum class Kind { constant, lognormal } kind = Kind::constant;
  double value = 1.0;      // constant
  double mean = 358.1;     // lognormal mean on the natural scale
  double sigma_log = 0.5;  // lognormal log-sd

  double draw(rng::RandomStream& s) const;
};

// Simulate N subjects with n monthly observations each from the shared
// model: u ~ N(0, e^lambda), initial state from expit(pi1), transitions with
// the lagged observed binary outcome, Bernoulli/Poisson emissions. Months
// run 1..n. subject_offset shifts the RNG subject coordinate so replications
// draw disjoint streams.
Dataset simulate_shared(const ModelParams& truth, int n_subjects, int n_obs,
                        const MilesGen& miles, std::uint64_t seed,
                        std::uint32_t subject_offset = 0);

struct CorrelatedTruth {
  double gamma01 = 0.0;
  double gamma10 = 0.0;
  std::array<double, 4> sigma = {1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  double rho = 0.0;      // must equal sigma01/sqrt(sigma00*sigma11)
  ModelParams emissions;  // alpha*, beta*, pi1 used; transition fields ignored

  // which random effect, if any, drives the emission loadings
  enum class EmissionRe { none, u1, u2 } emission_re = EmissionRe::none;

  void validate() const;
};

// (u1, u2) bivariate normal; u1 enters the 0->1 logit, u2 the 1->0 logit.
// No lagged-outcome terms in the hidden process.
Dataset simulate_correlated(const CorrelatedTruth& truth, int n_subjects,
                            int n_obs, const MilesGen& miles,
                            std::uint64_t seed,
                            std::uint32_t subject_offset = 0);

struct SimStudyConfig {
  int replications = 200;
  int n_subjects = 60;
  int n_obs = 20;
  std::uint64_t seed = 1;
  int q = 11;
  int threads = 1;
  ModelParams truth;                         // shared-model truth
  std::optional<CorrelatedTruth> correlated;  // simulate from this instead
  std::array<bool, kNumParams> free = all_free();
  MilesGen miles;
  int max_outer_iters = 30;
  int max_inner_iters = 300;
  bool compute_se = true;

  void validate() const;
};

struct StudyRow {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double mean_se = 0.0;
};

struct StudyReport {
  std::vector<StudyRow> rows;  // free parameters, canonical order
  int replications = 0;
  int n_failed = 0;       // diverged or non-converged fits, excluded
  int q = 0;
  std::uint64_t seed = 0;
  int n_subjects = 0;
  int n_obs = 0;
};

// For a correlated config, the reference truth the fitted shared model is
// judged against: delta_star = sigma2/sigma1, lambda = log(sigma1^2).
ModelParams study_truth_params(const SimStudyConfig& cfg);

StudyReport run_study(const SimStudyConfig& cfg);

}  // namespace mhmm
