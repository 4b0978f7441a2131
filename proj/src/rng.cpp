#include "mhmm/rng.hpp"

#include <cmath>

namespace mhmm::rng {

namespace {
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;
constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const std::array<std::uint32_t, 4> next = {
        static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
        static_cast<std::uint32_t>(p1),
        static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
        static_cast<std::uint32_t>(p0)};
    c = next;
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

double RandomStream::u01() {
  if (have_ == 0) {
    const auto r = philox4x32({idx_++, subject_, month_, stream_}, key_);
    const auto to_u01 = [](std::uint32_t hi, std::uint32_t lo) {
      const std::uint64_t bits =
          (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
      return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    };
    buf_[0] = to_u01(r[0], r[1]);
    buf_[1] = to_u01(r[2], r[3]);
    have_ = 2;
  }
  return buf_[2 - have_--];
}

double RandomStream::normal() { return normal_icdf(u01()); }

long RandomStream::poisson(double mu) {
  if (!(mu > 0.0)) return 0;

  if (mu < 30.0) {
    // sequential inversion on a single uniform
    const double u = u01();
    double p = std::exp(-mu);
    double cdf = p;
    long k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mu / k;
      cdf += p;
    }
    return k;
  }

  // Hormann (1993) PTRS transformed rejection
  const double b = 0.931 + 2.53 * std::sqrt(mu);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double lmu = std::log(mu);

  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double U = u01() - 0.5;
    const double V = u01();
    const double us = 0.5 - std::abs(U);
    const double kf = std::floor((2.0 * a / us + b) * U + mu + 0.43);
    if (us >= 0.07 && V <= v_r) return static_cast<long>(kf);
    if (kf < 0.0 || (us < 0.013 && V > us)) continue;
    const double k = kf;
    if (std::log(V * inv_alpha / (a / (us * us) + b)) <=
        k * lmu - mu - std::lgamma(k + 1.0))
      return static_cast<long>(kf);
  }
  return static_cast<long>(mu);  // unreachable in practice
}

double normal_icdf(double p) {
  // Wichura's algorithm AS 241, PPND16.
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  if (!(r > 0.0)) return q < 0.0 ? -38.5 : 38.5;  // saturate at the extremes
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

}  // namespace mhmm::rng
