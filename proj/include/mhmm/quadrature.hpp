#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mhmm/common.hpp"

// Gauss-Hermite quadrature against the standard normal kernel, plus the
// per-subject adaptive recentering used when integrating sharply peaked
// random-effect likelihoods against N(0, e^lambda).

namespace mhmm {

struct Adaptation {
  double center = 0.0;
  double scale = 1.0;
  bool fallback = false;  // curvature was unusable; scale fell back to the prior sd
};

struct QuadratureRule {
  std::vector<double> nodes;        // ascending
  std::vector<double> log_weights;
  std::optional<Adaptation> adaptation;

  int order() const { return static_cast<int>(nodes.size()); }
};

// Probabilists' Gauss-Hermite rule of order q, normalized so that
// sum_k w_k f(n_k) ~= integral of f(u) N(u; 0, 1) du. Exact for polynomials
// up to degree 2q-1. Requires 1 <= q <= 64.
QuadratureRule gh_rule(int q);

// Recenter/rescale an unadapted rule so it targets integrals of g(u) against
// N(u; 0, e^lambda) for integrands peaked near `center` with curvature scale
// `scale`: nodes' = center + scale*nodes, weights corrected by the Jacobian
// and the prior-to-kernel density ratio.
QuadratureRule adapt(const QuadratureRule& rule, double center, double scale,
                     double lambda);

// Weight computation of adapt() exposed separately so a frozen (center, scale)
// pair can be re-weighted as lambda moves during optimization.
void adapted_log_weights(const QuadratureRule& base, double center,
                         double scale, double lambda, double* out);

// Locate the peak of log_f(u) + log N(u; 0, e^lambda) by safeguarded Newton
// search with finite-difference derivatives, and the Gaussian scale implied
// by the curvature at the peak. Non-finite or non-negative curvature falls
// back to scale = exp(lambda/2) with the fallback flag set.
Adaptation find_adaptation(const std::function<double(double)>& log_f,
                           double lambda);

}  // namespace mhmm
