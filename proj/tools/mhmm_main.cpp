// mhmm command line: fit, simulate, study, decode, predict, roc.
//
// Every subcommand takes --config (flat key=value file) with CLI flags
// overriding config values. Exit codes: 0 success, 2 validation error,
// 3 numerical failure, 4 fit did not converge (outputs still written).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "mhmm/common.hpp"
#include "mhmm/estimation.hpp"
#include "mhmm/fb.hpp"
#include "mhmm/io.hpp"
#include "mhmm/model.hpp"
#include "mhmm/predict.hpp"
#include "mhmm/simulate.hpp"

namespace {

using mhmm::io::KvMap;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNonConvergence = 4;

void error_line(const std::string& kind, const std::string& msg) {
  std::string m = msg;
  for (char& c : m)
    if (c == '"' || c == '\n') c = '\'';
  std::cerr << "error kind=" << kind << " msg=\"" << m << "\"" << std::endl;
}

std::string hash_str(const KvMap& kv) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(mhmm::io::config_hash(kv)));
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw mhmm::ValidationError("cannot create output dir " + dir);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::array<bool, mhmm::kNumParams> free_mask_from(const KvMap& kv) {
  auto mask = mhmm::all_free();
  for (const auto& name : split_list(mhmm::io::kv_string(kv, "fixed", ""))) {
    const int i = mhmm::param_index(name);
    if (i < 0) throw mhmm::ValidationError("config: unknown parameter '" +
                                           name + "' in fixed=");
    mask[i] = false;
  }
  return mask;
}

mhmm::FitConfig fit_config_from(const KvMap& kv) {
  mhmm::FitConfig fc;
  fc.q = static_cast<int>(mhmm::io::kv_long(kv, "q", 11));
  fc.variant = mhmm::Variant::parse(mhmm::io::kv_string(kv, "variant", "mixed2"));
  fc.max_outer_iters =
      static_cast<int>(mhmm::io::kv_long(kv, "max_outer_iters", 50));
  fc.max_inner_iters =
      static_cast<int>(mhmm::io::kv_long(kv, "max_inner_iters", 300));
  fc.outer_tol_loglik = mhmm::io::kv_double(kv, "outer_tol_loglik", 1e-7);
  fc.outer_tol_param = mhmm::io::kv_double(kv, "outer_tol_param", 1e-5);
  fc.optimizer_tol = mhmm::io::kv_double(kv, "optimizer_tol", 1e-4);
  fc.threads = static_cast<int>(
      mhmm::io::kv_long(kv, "threads", mhmm::default_threads()));
  fc.compute_se = mhmm::io::kv_bool(kv, "compute_se", true);
  fc.free = free_mask_from(kv);

  bool any_init = false;
  for (const auto& [k, v] : kv)
    if (k.rfind("init.", 0) == 0) any_init = true;
  if (any_init) fc.init = mhmm::io::kv_params(kv, "init.", mhmm::ModelParams{});
  return fc;
}

mhmm::MilesGen miles_from(const KvMap& kv) {
  mhmm::MilesGen g;
  const std::string kind = mhmm::io::kv_string(kv, "miles.kind", "constant");
  if (kind == "constant") {
    g.kind = mhmm::MilesGen::Kind::constant;
    g.value = mhmm::io::kv_double(kv, "miles.value", 1.0);
    if (!(g.value > 0.0))
      throw mhmm::ValidationError("config: miles.value must be positive");
  } else if (kind == "lognormal") {
    g.kind = mhmm::MilesGen::Kind::lognormal;
    g.mean = mhmm::io::kv_double(kv, "miles.mean", 358.1);
    g.sigma_log = mhmm::io::kv_double(kv, "miles.sigma_log", 0.5);
    if (!(g.mean > 0.0) || !(g.sigma_log >= 0.0))
      throw mhmm::ValidationError("config: bad lognormal miles settings");
  } else {
    throw mhmm::ValidationError("config: miles.kind must be constant|lognormal");
  }
  return g;
}

mhmm::CorrelatedTruth correlated_from(const KvMap& kv,
                                      const mhmm::ModelParams& emissions) {
  mhmm::CorrelatedTruth c;
  c.emissions = emissions;
  c.gamma01 = mhmm::io::kv_double(kv, "correlated.gamma01", emissions.gamma01);
  c.gamma10 = mhmm::io::kv_double(kv, "correlated.gamma10", emissions.gamma10);
  const double s1 = mhmm::io::kv_double(kv, "correlated.sigma1", 1.0);
  const double s2 = mhmm::io::kv_double(kv, "correlated.sigma2", 1.0);
  const double rho = mhmm::io::kv_double(kv, "correlated.rho", 1.0);
  c.sigma = {s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2};
  c.rho = rho;
  const std::string re =
      mhmm::io::kv_string(kv, "correlated.emission_re", "none");
  if (re == "none")
    c.emission_re = mhmm::CorrelatedTruth::EmissionRe::none;
  else if (re == "u1")
    c.emission_re = mhmm::CorrelatedTruth::EmissionRe::u1;
  else if (re == "u2")
    c.emission_re = mhmm::CorrelatedTruth::EmissionRe::u2;
  else
    throw mhmm::ValidationError(
        "config: correlated.emission_re must be none|u1|u2");
  return c;
}

// merged view of config file and explicitly passed CLI flags
struct Resolved {
  KvMap kv;

  void overlay(const CLI::Option* opt, const std::string& key,
               const std::string& value) {
    if (opt != nullptr && opt->count() > 0) kv[key] = value;
  }
};

int cmd_fit(const Resolved& r, const std::string& data,
            const std::string& out) {
  const auto fc = fit_config_from(r.kv);
  const std::string fmt = mhmm::io::kv_string(r.kv, "format", "csv");
  mhmm::io::FileMeta meta{mhmm::io::kv_string(r.kv, "seed", "0"),
                          hash_str(r.kv)};

  const auto report = mhmm::io::ingest(data);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

  const mhmm::FitResult fit = mhmm::fit(report.data, fc);
  ensure_dir(out);
  mhmm::io::write_fit(out, fit, meta, fmt == "json");
  std::cout << "loglik=" << fit.loglik << " aic=" << fit.aic
            << " converged=" << (fit.converged ? 1 : 0)
            << " outer_iters=" << fit.outer_iters << std::endl;
  if (!fit.converged) {
    error_line("nonconvergence", "fit hit the iteration cap; results written");
    return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_simulate(const Resolved& r, const std::string& out) {
  const auto seed =
      static_cast<std::uint64_t>(mhmm::io::kv_long(r.kv, "seed", 1));
  const int n_subjects =
      static_cast<int>(mhmm::io::kv_long(r.kv, "n_subjects", 60));
  const int n_obs = static_cast<int>(mhmm::io::kv_long(r.kv, "n_obs", 20));
  const auto truth =
      mhmm::io::kv_params(r.kv, "truth.", mhmm::ModelParams{});
  const auto miles = miles_from(r.kv);
  const std::string model = mhmm::io::kv_string(r.kv, "model", "shared");

  mhmm::Dataset d;
  if (model == "shared") {
    d = mhmm::simulate_shared(truth, n_subjects, n_obs, miles, seed);
  } else if (model == "correlated") {
    d = mhmm::simulate_correlated(correlated_from(r.kv, truth), n_subjects,
                                  n_obs, miles, seed);
  } else {
    throw mhmm::ValidationError("config: model must be shared|correlated");
  }

  ensure_dir(out);
  mhmm::io::FileMeta meta{std::to_string(seed), hash_str(r.kv)};
  mhmm::io::write_dataset(out + "/data.csv", d, meta);
  std::cout << "wrote " << d.n_subjects() << " subjects, "
            << d.n_observations() << " observations" << std::endl;
  return kExitOk;
}

int cmd_study(const Resolved& r, const std::string& out) {
  const std::string fmt = mhmm::io::kv_string(r.kv, "format", "csv");
  mhmm::SimStudyConfig cfg;
  cfg.replications =
      static_cast<int>(mhmm::io::kv_long(r.kv, "replications", 200));
  cfg.n_subjects = static_cast<int>(mhmm::io::kv_long(r.kv, "n_subjects", 60));
  cfg.n_obs = static_cast<int>(mhmm::io::kv_long(r.kv, "n_obs", 20));
  cfg.seed = static_cast<std::uint64_t>(mhmm::io::kv_long(r.kv, "seed", 1));
  cfg.threads = static_cast<int>(
      mhmm::io::kv_long(r.kv, "threads", mhmm::default_threads()));
  cfg.truth = mhmm::io::kv_params(r.kv, "truth.", mhmm::ModelParams{});
  cfg.free = free_mask_from(r.kv);
  cfg.miles = miles_from(r.kv);
  cfg.max_outer_iters =
      static_cast<int>(mhmm::io::kv_long(r.kv, "max_outer_iters", 30));
  cfg.max_inner_iters =
      static_cast<int>(mhmm::io::kv_long(r.kv, "max_inner_iters", 300));

  const std::string model = mhmm::io::kv_string(r.kv, "model", "shared");
  std::vector<double> rhos{0.0};
  if (model == "correlated")
    rhos.clear();
  for (const auto& s : split_list(mhmm::io::kv_string(r.kv, "rho_list", "")))
    rhos.push_back(std::stod(s));
  if (model == "correlated" && rhos.empty())
    rhos.push_back(mhmm::io::kv_double(r.kv, "correlated.rho", 1.0));

  std::vector<int> qs;
  for (const auto& s : split_list(mhmm::io::kv_string(r.kv, "q_list", "5,11")))
    qs.push_back(std::stoi(s));

  ensure_dir(out);
  mhmm::io::FileMeta meta{std::to_string(cfg.seed), hash_str(r.kv)};

  for (const double rho : rhos) {
    if (model == "correlated") {
      KvMap kv2 = r.kv;
      kv2["correlated.rho"] = std::to_string(rho);
      cfg.correlated = correlated_from(kv2, cfg.truth);
    }
    for (const int q : qs) {
      cfg.q = q;
      const mhmm::StudyReport rep = mhmm::run_study(cfg);
      std::string name = out + "/study";
      if (model == "correlated") {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "_rho%g", rho);
        name += buf;
      }
      name += "_q" + std::to_string(q) + (fmt == "json" ? ".json" : ".csv");
      mhmm::io::write_study(name, rep, meta, fmt == "json");
      std::cout << "wrote " << name << " (failed " << rep.n_failed << "/"
                << rep.replications << ")" << std::endl;
    }
  }
  return kExitOk;
}

int cmd_decode(const Resolved& r, const std::string& data,
               const std::string& params, const std::string& out) {
  const int q = static_cast<int>(mhmm::io::kv_long(r.kv, "q", 11));
  const std::string fmt = mhmm::io::kv_string(r.kv, "format", "csv");
  const auto p = mhmm::io::read_params(params);
  const auto report = mhmm::io::ingest(data);

  std::vector<mhmm::io::DecodeRow> rows;
  for (const auto& s : report.data.subjects) {
    const auto post = mhmm::posterior_state(p, s, q);
    const double mode = mhmm::random_effect_mode(p, s, q);
    const auto path = mhmm::fb::viterbi_given_u(p, s, mode);
    for (std::size_t j = 0; j < s.size(); ++j)
      rows.push_back({s.subject_id, s.t[j], post[j], path[j]});
  }

  ensure_dir(out);
  mhmm::io::FileMeta meta{mhmm::io::kv_string(r.kv, "seed", "0"),
                          hash_str(r.kv)};
  mhmm::io::write_decode(out + (fmt == "json" ? "/decode.json" : "/decode.csv"),
                         rows, meta, fmt == "json");
  std::cout << "decoded " << report.data.n_subjects() << " subjects"
            << std::endl;
  return kExitOk;
}

int cmd_predict(const Resolved& r, const std::string& data,
                const std::string& params, const std::string& folds,
                const std::string& out) {
  const int q = static_cast<int>(mhmm::io::kv_long(r.kv, "q", 11));
  const std::string fmt = mhmm::io::kv_string(r.kv, "format", "csv");
  const auto report = mhmm::io::ingest(data);
  ensure_dir(out);
  mhmm::io::FileMeta meta{mhmm::io::kv_string(r.kv, "seed", "0"),
                          hash_str(r.kv)};

  std::vector<mhmm::LosoPrediction> preds;
  int exit_code = kExitOk;

  if (folds == "loso") {
    auto fc = fit_config_from(r.kv);
    const auto res = mhmm::loso_cv(report.data, fc);
    preds = res.predictions;
    mhmm::io::write_roc(out + (fmt == "json" ? "/roc.json" : "/roc.csv"),
                        res.curve, meta, fmt == "json");
    std::cout << "auc=" << res.curve.auc
              << " nonconverged_folds=" << res.n_nonconverged_folds
              << " excluded_folds=" << res.excluded_subjects.size()
              << std::endl;
  } else if (!folds.empty()) {
    throw mhmm::ValidationError("--folds supports only 'loso'");
  } else {
    if (params.empty())
      throw mhmm::ValidationError("predict needs --params or --folds loso");
    const auto p = mhmm::io::read_params(params);
    for (const auto& s : report.data.subjects) {
      mhmm::SubjectSeries prefix;
      prefix.subject_id = s.subject_id;
      for (std::size_t j = 1; j < s.size(); ++j) {
        prefix.t.assign(s.t.begin(), s.t.begin() + j);
        prefix.miles.assign(s.miles.begin(), s.miles.begin() + j);
        prefix.y.assign(s.y.begin(), s.y.begin() + j);
        prefix.x.assign(s.x.begin(), s.x.begin() + j);
        const double score =
            mhmm::one_step_ahead(p, prefix, s.miles[j], s.t[j], q);
        preds.push_back({s.subject_id, s.t[j], score, s.y[j]});
      }
    }
  }

  mhmm::io::write_predictions(
      out + (fmt == "json" ? "/pred.json" : "/pred.csv"), preds, meta,
      fmt == "json");
  std::cout << "wrote " << preds.size() << " predictions" << std::endl;
  return exit_code;
}

int cmd_roc(const Resolved& r, const std::string& pred,
            const std::string& out) {
  const std::string fmt = mhmm::io::kv_string(r.kv, "format", "csv");
  std::vector<double> scores;
  std::vector<int> labels;
  mhmm::io::read_predictions(pred, scores, labels);
  const auto curve = mhmm::roc(scores, labels);
  ensure_dir(out);
  mhmm::io::FileMeta meta{mhmm::io::kv_string(r.kv, "seed", "0"),
                          hash_str(r.kv)};
  mhmm::io::write_roc(out + (fmt == "json" ? "/roc.json" : "/roc.csv"), curve,
                      meta, fmt == "json");
  std::cout << "auc=" << curve.auc << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mhmm: mixed hidden Markov model for joint longitudinal binary "
               "and count outcomes"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_dir = ".", params_path, pred_path;
  std::string variant, format, folds;
  int quadrature = 0, threads = 0;
  long seed = 0, replications = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "csv|json");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--quadrature", quadrature, "quadrature order (default 11)");
    sub->add_option("--threads", threads, "worker threads");
  };

  auto* fit = app.add_subcommand("fit", "maximum likelihood fit");
  add_common(fit);
  fit->add_option("--data", data_path, "input CSV")->required();
  fit->add_option("--variant", variant, "mixed2|fixed2|fixedK:K");

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(simulate);

  auto* study = app.add_subcommand("study", "replication study (simulate+fit)");
  add_common(study);
  study->add_option("--replications", replications, "number of replications");

  auto* decode = app.add_subcommand("decode", "posterior and Viterbi states");
  add_common(decode);
  decode->add_option("--data", data_path, "input CSV")->required();
  decode->add_option("--params", params_path, "params.csv from fit")->required();

  auto* predict = app.add_subcommand("predict", "one-step-ahead predictions");
  add_common(predict);
  predict->add_option("--data", data_path, "input CSV")->required();
  predict->add_option("--params", params_path, "params.csv from fit");
  predict->add_option("--folds", folds, "loso for leave-one-subject-out CV");

  auto* roc = app.add_subcommand("roc", "ROC curve from predictions");
  add_common(roc);
  roc->add_option("--pred", pred_path, "pred.csv from predict")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    error_line("cli", e.what());
    return kExitValidation;
  }

  try {
    Resolved r;
    if (!config_path.empty()) r.kv = mhmm::io::read_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    r.overlay(sub->get_option_no_throw("--format"), "format", format);
    r.overlay(sub->get_option_no_throw("--seed"), "seed", std::to_string(seed));
    r.overlay(sub->get_option_no_throw("--quadrature"), "q",
              std::to_string(quadrature));
    r.overlay(sub->get_option_no_throw("--threads"), "threads",
              std::to_string(threads));
    r.overlay(sub->get_option_no_throw("--variant"), "variant", variant);
    r.overlay(sub->get_option_no_throw("--replications"), "replications",
              std::to_string(replications));

    if (sub == fit) return cmd_fit(r, data_path, out_dir);
    if (sub == simulate) return cmd_simulate(r, out_dir);
    if (sub == study) return cmd_study(r, out_dir);
    if (sub == decode) return cmd_decode(r, data_path, params_path, out_dir);
    if (sub == predict)
      return cmd_predict(r, data_path, params_path, folds, out_dir);
    if (sub == roc) return cmd_roc(r, pred_path, out_dir);
    return kExitValidation;
  } catch (const mhmm::ValidationError& e) {
    error_line("validation", e.what());
    return kExitValidation;
  } catch (const mhmm::NumericalError& e) {
    error_line("numerical", e.what());
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    error_line("validation", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    error_line("internal", e.what());
    return kExitNumerical;
  }
}
