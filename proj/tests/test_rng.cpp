#include <doctest.h>

#include <cmath>
#include <vector>

#include "mhmm/rng.hpp"

using namespace mhmm::rng;

TEST_CASE("philox4x32-10 matches the published test vectors") {
  // Random123 known-answer vectors
  {
    const auto r = philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(r[0] == 0x6627e8d5u);
    CHECK(r[1] == 0xe169c58du);
    CHECK(r[2] == 0xbc57ac4cu);
    CHECK(r[3] == 0x9b00dbd8u);
  }
  {
    const auto r = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu,
                               0xffffffffu},
                              {0xffffffffu, 0xffffffffu});
    CHECK(r[0] == 0x408f276du);
    CHECK(r[1] == 0x41c83b0eu);
    CHECK(r[2] == 0xa20bc7c6u);
    CHECK(r[3] == 0x6d5451fdu);
  }
  {
    const auto r = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu,
                               0x03707344u},
                              {0xa4093822u, 0x299f31d0u});
    CHECK(r[0] == 0xd16cfe09u);
    CHECK(r[1] == 0x94fdccebu);
    CHECK(r[2] == 0x5001e420u);
    CHECK(r[3] == 0x24126ea1u);
  }
}

TEST_CASE("streams are deterministic and decorrelated by coordinates") {
  RandomStream a(42, 7, 3, 1), b(42, 7, 3, 1);
  for (int i = 0; i < 100; ++i) CHECK(a.u01() == b.u01());

  RandomStream c(42, 7, 3, 2), d(43, 7, 3, 1), e(42, 8, 3, 1);
  RandomStream a2(42, 7, 3, 1);
  bool all_same_c = true, all_same_d = true, all_same_e = true;
  for (int i = 0; i < 20; ++i) {
    const double v = a2.u01();
    all_same_c &= (v == c.u01());
    all_same_d &= (v == d.u01());
    all_same_e &= (v == e.u01());
  }
  CHECK(!all_same_c);
  CHECK(!all_same_d);
  CHECK(!all_same_e);
}

TEST_CASE("u01 lies strictly inside the unit interval") {
  RandomStream s(1, 0, 0, 0);
  for (int i = 0; i < 100000; ++i) {
    const double v = s.u01();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("normal_icdf inverts the gaussian cdf") {
  CHECK(normal_icdf(0.5) == 0.0);
  CHECK(normal_icdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_icdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));

  // round trip against an independent Phi from erfc
  const auto phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  for (double p = 1e-12; p < 1.0; p = p < 0.5 ? p * 3.7 : 1.0 - (1.0 - p) / 3.7) {
    const double x = normal_icdf(p);
    CHECK(std::abs(phi(x) - p) <= 1e-8 * std::max(p, 1.0 - p));
    // antisymmetry where 1-p is still exactly representable
    if (p >= 1e-5 && p <= 1.0 - 1e-5)
      CHECK(normal_icdf(1.0 - p) == doctest::Approx(-x).epsilon(1e-9));
  }
}

TEST_CASE("normal draws have the right first moments") {
  RandomStream s(99, 0, 0, 0);
  const int n = 200000;
  double sum = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    ss += z * z;
  }
  const double mean = sum / n, var = ss / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("poisson sampling is exact across both regimes") {
  // moments and a few pmf values against the analytic distribution
  for (const double mu : {0.5, 3.0, 20.0, 35.0, 80.0}) {
    RandomStream s(7, 0, 0, static_cast<std::uint32_t>(mu * 10));
    const int n = 50000;
    double sum = 0.0, ss = 0.0;
    std::vector<int> counts(400, 0);
    for (int i = 0; i < n; ++i) {
      const long k = s.poisson(mu);
      CHECK(k >= 0);
      sum += static_cast<double>(k);
      ss += static_cast<double>(k) * static_cast<double>(k);
      if (k < 400) ++counts[k];
    }
    const double mean = sum / n, var = ss / n - mean * mean;
    // 5-sigma bounds on the sample mean and a loose bound on the variance
    CHECK(std::abs(mean - mu) < 5.0 * std::sqrt(mu / n));
    CHECK(std::abs(var - mu) < 0.08 * mu + 0.1);

    for (int k = static_cast<int>(mu) - 1; k <= static_cast<int>(mu) + 1; ++k) {
      if (k < 0) continue;
      const double pmf =
          std::exp(k * std::log(mu) - mu - std::lgamma(k + 1.0));
      CHECK(std::abs(counts[k] / static_cast<double>(n) - pmf) < 0.01);
    }
  }

  RandomStream z(7, 0, 0, 0);
  CHECK(z.poisson(0.0) == 0);
}

TEST_CASE("lognormal mean matches the requested natural-scale mean") {
  RandomStream s(5, 0, 0, 0);
  const double meanlog = std::log(358.1) - 0.5 * 0.25;
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += s.lognormal(meanlog, 0.5);
  CHECK(sum / n == doctest::Approx(358.1).epsilon(0.01));
}
