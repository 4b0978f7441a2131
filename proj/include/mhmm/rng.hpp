#pragma once

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based random numbers (Philox4x32-10). Every simulated variate gets
// its own stream keyed by (seed, subject, month, purpose), so datasets are
// bit-identical for a given seed no matter how replications are scheduled
// across threads.

namespace mhmm::rng {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Purpose tags for the stream field.
enum Stream : std::uint32_t {
  kSubjectEffect = 0,   // u_i (month 0)
  kSecondEffect = 1,    // u2 in the correlated simulator (month 0)
  kMiles = 2,
  kInitialState = 3,
  kTransition = 4,
  kBinaryOutcome = 5,
  kCountOutcome = 6,
};

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t subject, std::uint32_t month,
               std::uint32_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        subject_(subject),
        month_(month),
        stream_(stream) {}

  // uniform on (0, 1), 53-bit resolution
  double u01();

  // standard normal via the inverse CDF (Wichura's PPND16)
  double normal();

  int bernoulli(double p) { return u01() < p ? 1 : 0; }

  // exact Poisson: sequential inversion for small means, transformed
  // rejection (PTRS) for large ones
  long poisson(double mu);

  double lognormal(double meanlog, double sdlog) {
    return std::exp(meanlog + sdlog * normal());
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t subject_, month_, stream_;
  std::uint32_t idx_ = 0;
  double buf_[2] = {0, 0};
  int have_ = 0;
};

// Inverse standard normal CDF, accurate to ~1e-15 over (0, 1).
double normal_icdf(double p);

}  // namespace mhmm::rng
