#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/fb.hpp"
#include "mhmm/model.hpp"
#include "mhmm/quadrature.hpp"

// Maximum likelihood estimation. The fitting loop alternates two phases
// until the estimates settle: recompute each subject's quadrature
// adaptation at the current parameters, then run a quasi-Newton
// maximization of the marginal log likelihood with the adaptation frozen.
// Gradients are central finite differences.

namespace mhmm {

enum class VariantKind { mixed2, fixed2, fixedK };

struct Variant {
  VariantKind kind = VariantKind::mixed2;
  int K = 2;  // fixedK only

  std::string to_string() const;
  static Variant parse(const std::string& text);  // "mixed2", "fixed2", "fixedK:3"
};

inline std::array<bool, kNumParams> all_free() {
  std::array<bool, kNumParams> m;
  m.fill(true);
  return m;
}

struct FitConfig {
  int q = 11;
  int max_outer_iters = 50;
  double outer_tol_loglik = 1e-7;  // relative log-likelihood change
  double outer_tol_param = 1e-5;   // max relative parameter change
  double optimizer_tol = 1e-4;     // quasi-Newton gradient infinity norm
  int max_inner_iters = 300;
  Variant variant;
  // Starting point. When absent, the initialization strategy runs: fit the
  // fixed-effect variant for shared parameters, then grid-search the
  // random-effect loadings (beta3, delta_star in {0.25, 0.75, 1.25},
  // lambda in {-1, 0}).
  std::optional<ModelParams> init;
  // Parameters with free = false are excluded from optimization, standard
  // errors and the AIC count (mixed2/fixed2 only). They are held at the
  // init value, or at zero when no init is given.
  std::array<bool, kNumParams> free = all_free();
  int threads = 1;
  bool compute_se = true;

  void validate() const;
};

struct FitResult {
  Variant variant;
  ModelParams estimates;            // mixed2 / fixed2
  std::vector<double> theta;        // free-parameter values (all variants)
  std::vector<std::string> names;   // per theta entry
  std::vector<double> se;           // per theta entry; empty if unavailable
  std::vector<double> vcov;         // k*k row-major; empty if unavailable
  bool se_available = false;
  bool vcov_projected = false;      // nearest-PSD projection was required
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
  int outer_iters = 0;
  long n_loglik_evals = 0;
  std::vector<double> loglik_trace;  // best objective per outer iteration
  std::vector<double> re_modes;      // per-subject posterior mode of u (mixed2)
  std::vector<std::string> subject_ids;

  int n_free() const { return static_cast<int>(theta.size()); }
};

// Marginal log likelihood: sum over subjects of
// log integral exp(cond_loglik_i(u)) N(u; 0, e^lambda) du, each integral via
// a subject-adapted Gauss-Hermite rule of order q. Throws NumericalError
// naming the subject when a term is non-finite.
double marginal_loglik(const ModelParams& p, const Dataset& d, int q,
                       int threads = 1);

FitResult fit(const Dataset& d, const FitConfig& cfg);

struct StdErrors {
  std::vector<double> se;    // sqrt of vcov diagonal
  std::vector<double> vcov;  // k*k
  bool available = false;
  bool projected = false;    // Hessian needed the nearest-PSD projection
};

// Observed-information standard errors at p_hat: central finite-difference
// Hessian of the negative marginal log likelihood over the free parameters.
StdErrors std_errors(const Dataset& d, const ModelParams& p_hat, int q,
                     const std::array<bool, kNumParams>& free_mask = all_free(),
                     int threads = 1);

inline double aic(double loglik, int n_free_params) {
  return -2.0 * loglik + 2.0 * n_free_params;
}

// argmax_u of cond_loglik(u) + log N(u; 0, e^lambda)
double random_effect_mode(const ModelParams& p, const SubjectSeries& s, int q);

// Shared machinery for evaluating the marginal likelihood against frozen
// per-subject adaptations; fit() drives this, tests poke at it directly.
class MarginalEvaluator {
 public:
  MarginalEvaluator(const Dataset& d, int q);

  // Table-2 step 2: recompute per-subject adaptation at p.
  void adapt_all(const ModelParams& p, int threads = 1);

  // Frozen-adaptation marginal log likelihood; -inf instead of throwing on
  // numerical failure (bad_subject reports the first offender when not null).
  // The frozen rule is only meaningful near the lambda it was adapted at;
  // points beyond the trust radius evaluate to -inf so the inner optimizer
  // cannot exploit stale weights.
  double loglik(const ModelParams& p, int threads = 1,
                int* bad_subject = nullptr) const;

  static constexpr double kLambdaTrustRadius = 2.0;

  // Conditional log likelihood of one subject at a single u.
  double cond_loglik(const ModelParams& p, int subject, double u) const;

  const std::vector<Adaptation>& adaptations() const { return adapts_; }
  const std::vector<std::string>& subject_ids() const { return ids_; }
  int q() const { return base_.order(); }
  std::size_t n_subjects() const { return subjects_.size(); }
  const fb::SubjectData& subject(int i) const { return subjects_[i]; }
  const QuadratureRule& base_rule() const { return base_; }

 private:
  double subject_loglik(const ModelParams& p, int i) const;

  QuadratureRule base_;
  std::vector<fb::SubjectData> subjects_;
  std::vector<std::string> ids_;
  std::vector<Adaptation> adapts_;
  double lambda_at_adapt_ = 0.0;
};

}  // namespace mhmm
