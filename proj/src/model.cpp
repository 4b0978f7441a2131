#include "mhmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mhmm {

bool ModelParams::all_finite() const {
  for (double v : to_array(*this))
    if (!std::isfinite(v)) return false;
  return true;
}

std::array<double, kNumParams> to_array(const ModelParams& p) {
  return {p.alpha0, p.alpha1, p.alpha2,  p.beta0,  p.beta1,
          p.beta2,  p.beta3,  p.gamma01, p.gamma10, p.delta1,
          p.delta2, p.delta_star, p.lambda, p.pi1};
}

ModelParams params_from_array(const std::array<double, kNumParams>& a) {
  ModelParams p;
  p.alpha0 = a[0];
  p.alpha1 = a[1];
  p.alpha2 = a[2];
  p.beta0 = a[3];
  p.beta1 = a[4];
  p.beta2 = a[5];
  p.beta3 = a[6];
  p.gamma01 = a[7];
  p.gamma10 = a[8];
  p.delta1 = a[9];
  p.delta2 = a[10];
  p.delta_star = a[11];
  p.lambda = a[12];
  p.pi1 = a[13];
  return p;
}

const std::array<std::string, kNumParams>& param_names() {
  static const std::array<std::string, kNumParams> names = {
      "alpha0", "alpha1", "alpha2", "beta0",  "beta1",
      "beta2",  "beta3",  "gamma01", "gamma10", "delta1",
      "delta2", "delta_star", "lambda", "pi1"};
  return names;
}

int param_index(const std::string& name) {
  const auto& names = param_names();
  for (int i = 0; i < kNumParams; ++i)
    if (names[i] == name) return i;
  return -1;
}

void SubjectSeries::validate() const {
  const std::size_t n = t.size();
  if (n < 2)
    throw ValidationError("subject " + subject_id +
                          ": series needs at least 2 observations");
  if (miles.size() != n || y.size() != n || x.size() != n)
    throw ValidationError("subject " + subject_id +
                          ": t/miles/y/x lengths differ");
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0 && t[j] != t[j - 1] + 1)
      throw ValidationError("subject " + subject_id +
                            ": months not contiguous at index " +
                            std::to_string(j));
    if (!(miles[j] > 0.0) || !std::isfinite(miles[j]))
      throw ValidationError("subject " + subject_id +
                            ": non-positive miles at month " +
                            std::to_string(t[j]));
    if (y[j] != 0 && y[j] != 1)
      throw ValidationError("subject " + subject_id + ": y must be 0/1");
    if (x[j] < 0)
      throw ValidationError("subject " + subject_id + ": negative count");
  }
}

std::size_t Dataset::n_observations() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.size();
  return n;
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    s.validate();
    if (!ids.insert(s.subject_id).second)
      throw ValidationError("duplicate subject_id " + s.subject_id);
  }
}

void Dataset::sort_by_id() {
  std::sort(subjects.begin(), subjects.end(),
            [](const SubjectSeries& a, const SubjectSeries& b) {
              return a.subject_id < b.subject_id;
            });
}

double cnc_prob(const ModelParams& p, int b, double u, double miles) {
  if (!(miles > 0.0))
    throw std::domain_error("cnc_prob: miles must be positive");
  return expit(std::log(miles) + p.alpha0 + p.alpha1 * b + p.alpha2 * u);
}

double count_mean(const ModelParams& p, int b, double u, double miles, int t) {
  if (!(miles > 0.0))
    throw std::domain_error("count_mean: miles must be positive");
  return std::exp(std::log(miles) + p.beta0 + p.beta1 * b + p.beta2 * t +
                  p.beta3 * u);
}

std::array<std::array<double, 2>, 2> transition_probs(const ModelParams& p,
                                                      double u, int y_prev) {
  const double p01 = expit(p.gamma01 + p.delta1 * y_prev + u);
  const double p10 = expit(p.gamma10 + p.delta2 * y_prev + p.delta_star * u);
  return {{{1.0 - p01, p01}, {p10, 1.0 - p10}}};
}

std::array<double, 2> initial_dist(const ModelParams& p) {
  const double r1 = expit(p.pi1);
  return {1.0 - r1, r1};
}

double emission_loglik(const ModelParams& p, int y, int x, double miles, int t,
                       int b, double u) {
  if (!(miles > 0.0))
    throw std::domain_error("emission_loglik: miles must be positive");
  const double lm = std::log(miles);
  const double eta_y = lm + p.alpha0 + p.alpha1 * b + p.alpha2 * u;
  const double eta_x = lm + p.beta0 + p.beta1 * b + p.beta2 * t + p.beta3 * u;
  const double ll_y = y * eta_y - softplus(eta_y);
  const double ll_x = x * eta_x - std::exp(eta_x) - std::lgamma(x + 1.0);
  return ll_y + ll_x;
}

}  // namespace mhmm
