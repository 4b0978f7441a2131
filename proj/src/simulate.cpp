#include "mhmm/simulate.hpp"

#include <cmath>
#include <cstdio>

#include "mhmm/rng.hpp"

namespace mhmm {

namespace {

std::string subject_label(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%05d", i + 1);
  return buf;
}

// One subject's trajectory given its random effects (u_trans2 feeds the
// 1->0 logit; the shared model passes delta_star*u there).
SubjectSeries simulate_subject(const ModelParams& p, double u_em,
                               double u_trans01, double u_trans10, int n_obs,
                               const MilesGen& miles, std::uint64_t seed,
                               std::uint32_t gsub, bool lagged_y) {
  SubjectSeries s;
  s.t.resize(n_obs);
  s.miles.resize(n_obs);
  s.y.resize(n_obs);
  s.x.resize(n_obs);

  int b = 0;
  for (int j = 0; j < n_obs; ++j) {
    const std::uint32_t month = static_cast<std::uint32_t>(j + 1);
    s.t[j] = j + 1;
    {
      rng::RandomStream st(seed, gsub, month, rng::kMiles);
      s.miles[j] = miles.draw(st);
    }
    if (j == 0) {
      rng::RandomStream st(seed, gsub, month, rng::kInitialState);
      b = st.bernoulli(expit(p.pi1));
    } else {
      const double ylag = lagged_y ? s.y[j - 1] : 0.0;
      const double p01 = expit(p.gamma01 + p.delta1 * ylag + u_trans01);
      const double p10 = expit(p.gamma10 + p.delta2 * ylag + u_trans10);
      rng::RandomStream st(seed, gsub, month, rng::kTransition);
      const double u = st.u01();
      b = b == 0 ? (u < p01 ? 1 : 0) : (u < p10 ? 0 : 1);
    }
    {
      rng::RandomStream st(seed, gsub, month, rng::kBinaryOutcome);
      s.y[j] = st.bernoulli(cnc_prob(p, b, u_em, s.miles[j]));
    }
    {
      rng::RandomStream st(seed, gsub, month, rng::kCountOutcome);
      s.x[j] = static_cast<int>(
          st.poisson(count_mean(p, b, u_em, s.miles[j], s.t[j])));
    }
  }
  return s;
}

}  // namespace

double MilesGen::draw(rng::RandomStream& s) const {
  if (kind == Kind::constant) return value;
  // mean on the natural scale: E[exp(N(m, s^2))] = exp(m + s^2/2)
  const double meanlog = std::log(mean) - 0.5 * sigma_log * sigma_log;
  return s.lognormal(meanlog, sigma_log);
}

Dataset simulate_shared(const ModelParams& truth, int n_subjects, int n_obs,
                        const MilesGen& miles, std::uint64_t seed,
                        std::uint32_t subject_offset) {
  if (n_subjects < 1 || n_obs < 2)
    throw ValidationError("simulate_shared: need n_subjects >= 1, n_obs >= 2");
  if (!truth.all_finite())
    throw ValidationError("simulate_shared: truth must be finite");

  Dataset d;
  d.subjects.reserve(n_subjects);
  for (int i = 0; i < n_subjects; ++i) {
    const std::uint32_t gsub = subject_offset + static_cast<std::uint32_t>(i);
    double u;
    {
      rng::RandomStream st(seed, gsub, 0, rng::kSubjectEffect);
      u = truth.re_sd() * st.normal();
    }
    SubjectSeries s =
        simulate_subject(truth, u, u, truth.delta_star * u, n_obs, miles,
                         seed, gsub, /*lagged_y=*/true);
    s.subject_id = subject_label(i);
    d.subjects.push_back(std::move(s));
  }
  d.sort_by_id();
  return d;
}

void CorrelatedTruth::validate() const {
  const double s00 = sigma[0], s01 = sigma[1], s10 = sigma[2], s11 = sigma[3];
  if (std::abs(s01 - s10) > 1e-12)
    throw ValidationError("correlated truth: sigma must be symmetric");
  // rho = +-1 (a degenerate, perfectly correlated pair) is a valid design
  if (!(s00 > 0.0) || !(s11 > 0.0) ||
      s00 * s11 - s01 * s01 < -1e-12 * s00 * s11)
    throw ValidationError(
        "correlated truth: sigma must be positive semi-definite");
  const double implied = s01 / std::sqrt(s00 * s11);
  if (std::abs(rho - implied) > 1e-8)
    throw ValidationError("correlated truth: rho inconsistent with sigma");
  if (!emissions.all_finite())
    throw ValidationError("correlated truth: emission parameters not finite");
}

Dataset simulate_correlated(const CorrelatedTruth& truth, int n_subjects,
                            int n_obs, const MilesGen& miles,
                            std::uint64_t seed,
                            std::uint32_t subject_offset) {
  truth.validate();
  if (n_subjects < 1 || n_obs < 2)
    throw ValidationError(
        "simulate_correlated: need n_subjects >= 1, n_obs >= 2");

  const double s1 = std::sqrt(truth.sigma[0]);
  const double s2 = std::sqrt(truth.sigma[3]);

  ModelParams p = truth.emissions;
  p.gamma01 = truth.gamma01;
  p.gamma10 = truth.gamma10;
  p.delta1 = 0.0;
  p.delta2 = 0.0;

  Dataset d;
  d.subjects.reserve(n_subjects);
  for (int i = 0; i < n_subjects; ++i) {
    const std::uint32_t gsub = subject_offset + static_cast<std::uint32_t>(i);
    double z1, z2;
    {
      rng::RandomStream st(seed, gsub, 0, rng::kSubjectEffect);
      z1 = st.normal();
    }
    {
      rng::RandomStream st(seed, gsub, 0, rng::kSecondEffect);
      z2 = st.normal();
    }
    const double u1 = s1 * z1;
    const double u2 = s2 * (truth.rho * z1 +
                           std::sqrt(std::max(0.0, 1.0 - truth.rho * truth.rho)) * z2);

    double u_em = 0.0;
    if (truth.emission_re == CorrelatedTruth::EmissionRe::u1) u_em = u1;
    if (truth.emission_re == CorrelatedTruth::EmissionRe::u2) u_em = u2;

    SubjectSeries s = simulate_subject(p, u_em, u1, u2, n_obs, miles, seed,
                                       gsub, /*lagged_y=*/false);
    s.subject_id = subject_label(i);
    d.subjects.push_back(std::move(s));
  }
  d.sort_by_id();
  return d;
}

void SimStudyConfig::validate() const {
  if (replications < 1)
    throw ValidationError("study: replications must be >= 1");
  if (n_subjects < 1 || n_obs < 2)
    throw ValidationError("study: need n_subjects >= 1, n_obs >= 2");
  if (q < 1 || q > 64) throw ValidationError("study: q must be in [1, 64]");
  if (correlated) correlated->validate();
}

ModelParams study_truth_params(const SimStudyConfig& cfg) {
  if (!cfg.correlated) return cfg.truth;
  const CorrelatedTruth& c = *cfg.correlated;
  ModelParams t = c.emissions;
  t.gamma01 = c.gamma01;
  t.gamma10 = c.gamma10;
  t.delta1 = 0.0;
  t.delta2 = 0.0;
  // shared-model image of the correlated truth
  t.delta_star = std::sqrt(c.sigma[3] / c.sigma[0]);
  t.lambda = std::log(c.sigma[0]);
  if (c.emission_re == CorrelatedTruth::EmissionRe::none) {
    t.alpha2 = 0.0;
    t.beta3 = 0.0;
  }
  return t;
}

StudyReport run_study(const SimStudyConfig& cfg) {
  cfg.validate();

  const ModelParams truth = study_truth_params(cfg);
  const int R = cfg.replications;

  struct RepResult {
    bool ok = false;
    std::vector<double> theta;
    std::vector<double> se;
  };
  std::vector<RepResult> reps(R);

  parallel_for(R, cfg.threads, [&](std::size_t r) {
    const std::uint32_t offset =
        static_cast<std::uint32_t>(r) * static_cast<std::uint32_t>(cfg.n_subjects);
    Dataset d =
        cfg.correlated
            ? simulate_correlated(*cfg.correlated, cfg.n_subjects, cfg.n_obs,
                                  cfg.miles, cfg.seed, offset)
            : simulate_shared(cfg.truth, cfg.n_subjects, cfg.n_obs, cfg.miles,
                              cfg.seed, offset);
    FitConfig fc;
    fc.q = cfg.q;
    fc.variant.kind = VariantKind::mixed2;
    fc.free = cfg.free;
    fc.init = truth;
    fc.threads = 1;
    fc.compute_se = cfg.compute_se;
    fc.max_outer_iters = cfg.max_outer_iters;
    fc.max_inner_iters = cfg.max_inner_iters;
    try {
      const FitResult fr = fit(d, fc);
      if (fr.converged) {
        reps[r].ok = true;
        reps[r].theta = fr.theta;
        if (fr.se_available) reps[r].se = fr.se;
      }
    } catch (const NumericalError&) {
      // counted below as a failed replication
    }
  });

  StudyReport report;
  report.replications = R;
  report.q = cfg.q;
  report.seed = cfg.seed;
  report.n_subjects = cfg.n_subjects;
  report.n_obs = cfg.n_obs;

  std::vector<int> idx;
  for (int i = 0; i < kNumParams; ++i)
    if (cfg.free[i]) idx.push_back(i);
  const int k = static_cast<int>(idx.size());
  const auto truth_arr = to_array(truth);

  int n_ok = 0;
  for (const auto& rr : reps)
    if (rr.ok) ++n_ok;
  report.n_failed = R - n_ok;

  for (int j = 0; j < k; ++j) {
    StudyRow row;
    row.name = param_names()[idx[j]];
    row.truth = truth_arr[idx[j]];
    double sum = 0.0, sum_se = 0.0;
    int n_se = 0;
    for (const auto& rr : reps) {
      if (!rr.ok) continue;
      sum += rr.theta[j];
      if (!rr.se.empty()) {
        sum_se += rr.se[j];
        ++n_se;
      }
    }
    const double mean = n_ok > 0 ? sum / n_ok : 0.0;
    double ss = 0.0;
    for (const auto& rr : reps)
      if (rr.ok) ss += (rr.theta[j] - mean) * (rr.theta[j] - mean);
    row.mean = mean;
    row.sd = n_ok > 1 ? std::sqrt(ss / (n_ok - 1)) : 0.0;
    row.mean_se = n_se > 0 ? sum_se / n_se : 0.0;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace mhmm
