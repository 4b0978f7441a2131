#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "mhmm/fb.hpp"
#include "oracle.hpp"

using namespace mhmm;

namespace {

// independent tail-sum: Pr(obs after j | b_j = m, u), recursive product
double suffix_prob(const ModelParams& p, const SubjectSeries& s, double u,
                   int j, int m) {
  const int n = static_cast<int>(s.size());
  if (j == n - 1) return 1.0;
  const auto P = transition_probs(p, u, s.y[j]);
  double acc = 0.0;
  for (int l = 0; l < 2; ++l)
    acc += P[m][l] *
           oracle::emission_density(p, s.y[j + 1], s.x[j + 1], s.miles[j + 1],
                                    s.t[j + 1], l, u) *
           suffix_prob(p, s, u, j + 1, l);
  return acc;
}

}  // namespace

TEST_CASE("two-step forward expansion matches the closed form") {
  std::mt19937 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const ModelParams p = fixtures::random_params(rng);
    const SubjectSeries s = fixtures::random_series(rng, 2);
    const double u = 0.4 * (rep - 10);

    const auto r = initial_dist(p);
    const auto P = transition_probs(p, u, s.y[0]);
    double want = 0.0;
    for (int l = 0; l < 2; ++l)
      for (int m = 0; m < 2; ++m)
        want += r[l] *
                std::exp(emission_loglik(p, s.y[0], s.x[0], s.miles[0], s.t[0],
                                         l, u)) *
                P[l][m] *
                std::exp(emission_loglik(p, s.y[1], s.x[1], s.miles[1], s.t[1],
                                         m, u));
    const auto fb = fb::forward_pass(p, s, u);
    CHECK(std::exp(fb.cond_loglik) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("forward pass equals exhaustive path enumeration") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ud(-2.0, 2.0);
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 2 + rep % 7;  // up to 8
    const ModelParams p = fixtures::random_params(rng);
    const SubjectSeries s = fixtures::random_series(rng, n);
    const double u = ud(rng);
    const double want = oracle::path_likelihood(p, s, u);
    const auto fb = fb::forward_pass(p, s, u);
    CHECK(std::abs(std::exp(fb.cond_loglik) / want - 1.0) < 1e-10);
  }
}

TEST_CASE("state-free model collapses to plain emission sums") {
  std::mt19937 rng(17);
  ModelParams p = fixtures::random_params(rng);
  p.alpha1 = 0.0;
  p.beta1 = 0.0;
  p.delta1 = 0.0;
  p.delta2 = 0.0;
  const SubjectSeries s = fixtures::random_series(rng, 12);
  const double u = 0.6;
  double want = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j)
    want += emission_loglik(p, s.y[j], s.x[j], s.miles[j], s.t[j], 0, u);
  const auto fb = fb::forward_pass(p, s, u);
  CHECK(fb.cond_loglik == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("backward pass: final row, tail sums, forward-backward identity") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> ud(-1.5, 1.5);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 2 + rep % 7;
    const ModelParams p = fixtures::random_params(rng);
    const SubjectSeries s = fixtures::random_series(rng, n);
    const double u = ud(rng);

    const auto lz = fb::backward_pass(p, s, u);
    CHECK(lz[(n - 1) * 2] == 0.0);
    CHECK(lz[(n - 1) * 2 + 1] == 0.0);

    for (int j = 0; j < n; ++j)
      for (int m = 0; m < 2; ++m) {
        const double want = suffix_prob(p, s, u, j, m);
        CHECK(std::exp(lz[j * 2 + m]) == doctest::Approx(want).epsilon(1e-10));
      }

    // sum_m a_m(j) z_m(j) identical across j (equals the likelihood)
    const auto fb = fb::forward_backward(p, s, u);
    for (int j = 0; j < n; ++j) {
      const double v = logsumexp2(fb.log_forward[j * 2] + lz[j * 2],
                                  fb.log_forward[j * 2 + 1] + lz[j * 2 + 1]);
      CHECK(v == doctest::Approx(fb.cond_loglik).epsilon(1e-10));
    }
  }
}

TEST_CASE("forward alone determines the conditional likelihood") {
  std::mt19937 rng(29);
  const ModelParams p = fixtures::random_params(rng);
  const SubjectSeries s = fixtures::random_series(rng, 9);
  const auto fwd_only = fb::forward_pass(p, s, 0.3);
  const auto both = fb::forward_backward(p, s, 0.3);
  CHECK(fwd_only.cond_loglik == both.cond_loglik);
}

TEST_CASE("posterior given u: normalization and enumeration oracle") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> ud(-1.5, 1.5);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 2 + rep % 7;
    const ModelParams p = fixtures::random_params(rng);
    const SubjectSeries s = fixtures::random_series(rng, n);
    const double u = ud(rng);
    const auto post = fb::state_posterior_given_u(p, s, u);
    const auto want = oracle::path_posterior(p, s, u);
    for (int j = 0; j < n; ++j) {
      CHECK(std::abs(post[j * 2] + post[j * 2 + 1] - 1.0) <= 1e-12);
      CHECK(post[j * 2 + 1] == doctest::Approx(want[j]).epsilon(1e-9));
    }
  }
}

TEST_CASE("posterior saturates under extreme emission coefficients") {
  // alpha1 = 50 makes the y channel decisive; beta1 = 3 puts the state-1
  // count mean at e^2, so a count of 40 is overwhelming state-1 evidence
  ModelParams p = fixtures::recovery_truth();
  p.alpha1 = 50.0;
  p.beta1 = 3.0;
  SubjectSeries s;
  s.subject_id = "S1";
  s.t = {1, 2, 3, 4};
  s.miles = {1.0, 1.0, 1.0, 1.0};
  s.y = {0, 0, 1, 0};
  s.x = {0, 0, 40, 0};
  const auto post = fb::state_posterior_given_u(p, s, 0.0);
  CHECK(post[2 * 2 + 1] > 0.999999);
  const auto want = oracle::path_posterior(p, s, 0.0);
  CHECK(post[2 * 2 + 1] == doctest::Approx(want[2]).epsilon(1e-9));
}

TEST_CASE("posterior at the start reacts to the last observation") {
  const ModelParams p = fixtures::recovery_truth();
  std::mt19937 rng(37);
  SubjectSeries s = fixtures::random_series(rng, 8);
  s.y.back() = 0;
  const auto post0 = fb::state_posterior_given_u(p, s, 0.2);
  s.y.back() = 1;
  const auto post1 = fb::state_posterior_given_u(p, s, 0.2);
  CHECK(std::abs(post0[1] - post1[1]) > 1e-8);
}

TEST_CASE("viterbi equals exhaustive argmax and saturates correctly") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> ud(-1.5, 1.5);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 2 + rep % 7;
    const ModelParams p = fixtures::random_params(rng);
    const SubjectSeries s = fixtures::random_series(rng, n);
    const double u = ud(rng);
    CHECK(fb::viterbi_given_u(p, s, u) == oracle::path_viterbi(p, s, u));
  }

  // overwhelming emissions pin a constant path
  ModelParams p = fixtures::recovery_truth();
  p.alpha1 = 50.0;
  p.beta1 = 3.0;
  SubjectSeries s;
  s.subject_id = "S1";
  s.t = {1, 2, 3};
  s.miles = {1.0, 1.0, 1.0};
  s.y = {1, 1, 1};
  s.x = {12, 9, 14};
  CHECK(fb::viterbi_given_u(p, s, 0.0) == std::vector<int>{1, 1, 1});
}

TEST_CASE("viterbi ties break toward state 0") {
  // symmetric model: every path has identical probability
  ModelParams p;  // all zeros: transitions 0.5, emissions state-free
  SubjectSeries s;
  s.subject_id = "S1";
  s.t = {1, 2, 3, 4};
  s.miles = {1.0, 1.0, 1.0, 1.0};
  s.y = {0, 1, 0, 1};
  s.x = {1, 0, 2, 1};
  CHECK(fb::viterbi_given_u(p, s, 0.0) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("operation count grows linearly in the series length") {
  std::mt19937 rng(43);
  const ModelParams p = fixtures::recovery_truth();
  const auto ops_for = [&](int n) {
    const SubjectSeries s = fixtures::random_series(rng, n);
    fb::reset_step_ops();
    fb::forward_pass(p, s, 0.1);
    return fb::step_ops();
  };
  const auto o10 = ops_for(10);
  const auto o100 = ops_for(100);
  const auto o1000 = ops_for(1000);
  CHECK(o100 - o10 == 4u * 90u);
  CHECK(o1000 - o100 == 4u * 900u);
}

TEST_CASE("generic K-state core agrees with the two-state engine at K=2") {
  std::mt19937 rng(47);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + rep % 6;
    const ModelParams p = fixtures::random_params(rng);
    const SubjectSeries s = fixtures::random_series(rng, n);
    const double u = 0.3;

    fb::GenericHmm h;
    h.n = n;
    h.K = 2;
    const auto r = initial_dist(p);
    h.log_init = {std::log(r[0]), std::log(r[1])};
    h.log_trans.resize((n - 1) * 4);
    for (int j = 1; j < n; ++j) {
      const auto P = transition_probs(p, u, s.y[j - 1]);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          h.log_trans[(j - 1) * 4 + a * 2 + b] = std::log(P[a][b]);
    }
    h.log_emit.resize(n * 2);
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < 2; ++m)
        h.log_emit[j * 2 + m] =
            emission_loglik(p, s.y[j], s.x[j], s.miles[j], s.t[j], m, u);

    const double want = fb::forward_pass(p, s, u).cond_loglik;
    CHECK(fb::generic_forward(h) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("batch evaluation matches per-node scalar evaluation") {
  std::mt19937 rng(53);
  for (int rep = 0; rep < 10; ++rep) {
    const ModelParams p = fixtures::random_params(rng);
    const SubjectSeries s = fixtures::random_series(rng, 14);
    const auto sd = fb::SubjectData::from(s);
    std::vector<double> us = {-2.1, -0.7, 0.0, 0.4, 1.9, 2.6, -1.2};
    std::vector<double> cond(us.size());
    fb::cond_loglik_batch(p, sd, us.data(), static_cast<int>(us.size()),
                          cond.data());
    for (std::size_t k = 0; k < us.size(); ++k) {
      const auto fbr = fb::forward_pass(p, s, us[k]);
      CHECK(cond[k] == doctest::Approx(fbr.cond_loglik).epsilon(1e-11));
    }
  }
}

TEST_CASE("invalid series is rejected with a structured error") {
  const ModelParams p;
  SubjectSeries s;
  s.subject_id = "bad";
  s.t = {1, 3};
  s.miles = {1.0, 1.0};
  s.y = {0, 0};
  s.x = {0, 0};
  CHECK_THROWS_AS(fb::forward_pass(p, s, 0.0), ValidationError);
}
