#pragma once

#include <string>
#include <vector>

#include "mhmm/estimation.hpp"
#include "mhmm/model.hpp"

// Posterior hidden-state probabilities marginal over the random effect,
// one-step-ahead event prediction, ROC construction, and leave-one-subject-out
// cross-validation.

namespace mhmm {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // monotone from (0,0) to (1,1)
  double auc = 0.0;
};

// Pr(b_j = 1 | whole series), the smoothed posterior integrated over the
// subject-adapted quadrature rule. Values in [0, 1].
std::vector<double> posterior_state(const ModelParams& p,
                                    const SubjectSeries& s, int q);
std::vector<double> posterior_state(const FitResult& fit,
                                    const SubjectSeries& s, int q);

// Pr(y = 1 at the next month | both outcome histories, known next-month
// exposure). history needs at least one observation; only data through the
// previous month enters. t_next is reserved for future covariates.
double one_step_ahead(const ModelParams& p, const SubjectSeries& history,
                      double miles_next, int t_next, int q);

// Empirical ROC with thresholds at distinct score values (ties grouped into a
// single step) and trapezoidal AUC. Needs at least one positive and one
// negative label.
RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels);

struct LosoPrediction {
  std::string subject_id;
  int month = 0;
  double score = 0.0;
  int label = 0;
};

struct LosoResult {
  std::vector<LosoPrediction> predictions;  // pooled across folds
  RocCurve curve;
  int n_nonconverged_folds = 0;           // included but flagged
  std::vector<std::string> excluded_subjects;  // folds whose fit diverged
};

// For each subject: fit on the remaining subjects (warm-started from a fit on
// the full data), then score every month >= 2 of the held-out subject from
// its own history. Predictions pool into a single curve.
LosoResult loso_cv(const Dataset& d, const FitConfig& cfg);

}  // namespace mhmm
