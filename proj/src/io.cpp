#include "mhmm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mhmm::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s, int line_no, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw ValidationError("line " + std::to_string(line_no) + ": bad " +
                          what + " value '" + s + "'");
  return v;
}

long parse_long(const std::string& s, int line_no, const char* what) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw ValidationError("line " + std::to_string(line_no) + ": bad " +
                          what + " value '" + s + "'");
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open output file " + path);
  return os;
}

}  // namespace

void write_header(std::ostream& os, const FileMeta& meta) {
  os << "# mhmm " << kVersion << "\n";
  os << "# seed=" << meta.seed << " config_hash=" << meta.config_hash << "\n";
}

IngestReport ingest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open data file " + path);

  IngestReport report;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  bool per_type = false;

  struct Row {
    int line_no;
    int month;
    double miles;
    int cnc;
    int count;
  };
  std::vector<std::string> subject_order;
  std::map<std::string, std::vector<Row>> rows;

  static const std::vector<std::string> base_cols = {"subject_id", "month",
                                                     "miles", "cnc"};
  static const std::vector<std::string> type_cols = {
      "rapid_starts", "hard_stops", "hard_left", "hard_right", "yaw"};

  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = split_csv(t);
    if (!have_header) {
      if (f.size() < 5)
        throw ValidationError("line " + std::to_string(line_no) +
                              ": header needs at least 5 columns");
      for (std::size_t i = 0; i < base_cols.size(); ++i)
        if (f[i] != base_cols[i])
          throw ValidationError("line " + std::to_string(line_no) +
                                ": expected column '" + base_cols[i] +
                                "', got '" + f[i] + "'");
      if (f.size() == 5 && f[4] == "kinematic_count") {
        per_type = false;
      } else if (f.size() == 9 &&
                 std::equal(type_cols.begin(), type_cols.end(),
                            f.begin() + 4)) {
        per_type = true;
      } else {
        throw ValidationError(
            "line " + std::to_string(line_no) +
            ": expected kinematic_count or the five per-type count columns");
      }
      have_header = true;
      continue;
    }

    const std::size_t want = per_type ? 9 : 5;
    if (f.size() != want)
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(want) + " fields, got " +
                            std::to_string(f.size()));
    Row r;
    r.line_no = line_no;
    const std::string& id = f[0];
    if (id.empty())
      throw ValidationError("line " + std::to_string(line_no) +
                            ": empty subject_id");
    r.month = static_cast<int>(parse_long(f[1], line_no, "month"));
    if (r.month < 1)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": month must be >= 1");
    r.miles = parse_double(f[2], line_no, "miles");
    if (!(r.miles > 0.0))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": miles must be positive");
    const long cnc = parse_long(f[3], line_no, "cnc");
    if (cnc < 0)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": cnc must be >= 0");
    if (cnc > 1) ++report.clamped_cnc;
    r.cnc = cnc > 0 ? 1 : 0;
    long count = 0;
    if (per_type) {
      for (int c = 0; c < 5; ++c) {
        const long v = parse_long(f[4 + c], line_no, type_cols[c].c_str());
        if (v < 0)
          throw ValidationError("line " + std::to_string(line_no) +
                                ": negative count");
        count += v;
      }
    } else {
      count = parse_long(f[4], line_no, "kinematic_count");
      if (count < 0)
        throw ValidationError("line " + std::to_string(line_no) +
                              ": kinematic_count must be >= 0");
    }
    r.count = static_cast<int>(count);

    if (rows.find(id) == rows.end()) subject_order.push_back(id);
    rows[id].push_back(r);
  }
  if (!have_header) throw ValidationError("empty data file " + path);

  for (const auto& id : subject_order) {
    auto& rs = rows[id];
    std::sort(rs.begin(), rs.end(),
              [](const Row& a, const Row& b) { return a.month < b.month; });
    SubjectSeries s;
    s.subject_id = id;
    for (std::size_t j = 0; j < rs.size(); ++j) {
      if (j > 0 && rs[j].month == rs[j - 1].month)
        throw ValidationError("line " + std::to_string(rs[j].line_no) +
                              ": duplicate month " +
                              std::to_string(rs[j].month) + " for subject " +
                              id);
      if (j > 0 && rs[j].month != rs[j - 1].month + 1)
        throw ValidationError("subject " + id + ": months not contiguous (" +
                              std::to_string(rs[j - 1].month) + " -> " +
                              std::to_string(rs[j].month) + ")");
      s.t.push_back(rs[j].month);
      s.miles.push_back(rs[j].miles);
      s.y.push_back(rs[j].cnc);
      s.x.push_back(rs[j].count);
    }
    report.data.subjects.push_back(std::move(s));
  }
  report.data.sort_by_id();
  report.data.validate();
  if (report.clamped_cnc > 0)
    report.warnings.push_back("clamped " + std::to_string(report.clamped_cnc) +
                              " cnc value(s) to 1");
  return report;
}

void write_dataset(const std::string& path, const Dataset& d,
                   const FileMeta& meta) {
  auto os = open_out(path);
  write_header(os, meta);
  os << "subject_id,month,miles,cnc,kinematic_count\n";
  for (const auto& s : d.subjects)
    for (std::size_t j = 0; j < s.size(); ++j)
      os << s.subject_id << ',' << s.t[j] << ',' << fmt_double(s.miles[j])
         << ',' << s.y[j] << ',' << s.x[j] << "\n";
}

void write_fit(const std::string& dir, const FitResult& fit,
               const FileMeta& meta, bool json) {
  const bool named_params = fit.variant.kind != VariantKind::fixedK;

  if (json) {
    nlohmann::json j;
    j["tool"] = std::string("mhmm ") + kVersion;
    j["seed"] = meta.seed;
    j["config_hash"] = meta.config_hash;
    j["variant"] = fit.variant.to_string();
    j["loglik"] = fit.loglik;
    j["aic"] = fit.aic;
    j["converged"] = fit.converged;
    j["outer_iters"] = fit.outer_iters;
    j["n_loglik_evals"] = fit.n_loglik_evals;
    j["se_available"] = fit.se_available;
    j["vcov_projected"] = fit.vcov_projected;
    if (named_params) {
      nlohmann::json est;
      const auto a = to_array(fit.estimates);
      for (int i = 0; i < kNumParams; ++i) est[param_names()[i]] = a[i];
      j["estimates"] = est;
    }
    j["free_names"] = fit.names;
    j["theta"] = fit.theta;
    if (fit.se_available) j["se"] = fit.se;
    if (!fit.vcov.empty()) j["vcov"] = fit.vcov;
    if (!fit.re_modes.empty()) {
      j["re_modes"] = fit.re_modes;
      j["subject_ids"] = fit.subject_ids;
    }
    j["loglik_trace"] = fit.loglik_trace;
    auto os = open_out(dir + "/fit.json");
    os << j.dump(2) << "\n";
    return;
  }

  {
    auto os = open_out(dir + "/params.csv");
    write_header(os, meta);
    os << "parameter,estimate,se,free\n";
    if (named_params) {
      const auto a = to_array(fit.estimates);
      for (int i = 0; i < kNumParams; ++i) {
        const auto& name = param_names()[i];
        const auto it =
            std::find(fit.names.begin(), fit.names.end(), name);
        os << name << ',' << fmt_double(a[i]) << ',';
        if (it != fit.names.end() && fit.se_available)
          os << fmt_double(fit.se[it - fit.names.begin()]);
        os << ',' << (it != fit.names.end() ? 1 : 0) << "\n";
      }
    } else {
      for (std::size_t i = 0; i < fit.theta.size(); ++i) {
        os << fit.names[i] << ',' << fmt_double(fit.theta[i]) << ',';
        if (fit.se_available) os << fmt_double(fit.se[i]);
        os << ",1\n";
      }
    }
  }
  {
    auto os = open_out(dir + "/summary.csv");
    write_header(os, meta);
    os << "key,value\n";
    os << "variant," << fit.variant.to_string() << "\n";
    os << "loglik," << fmt_double(fit.loglik) << "\n";
    os << "aic," << fmt_double(fit.aic) << "\n";
    os << "converged," << (fit.converged ? 1 : 0) << "\n";
    os << "outer_iters," << fit.outer_iters << "\n";
    os << "n_free," << fit.n_free() << "\n";
    os << "n_loglik_evals," << fit.n_loglik_evals << "\n";
    os << "se_available," << (fit.se_available ? 1 : 0) << "\n";
    os << "vcov_projected," << (fit.vcov_projected ? 1 : 0) << "\n";
  }
  if (!fit.vcov.empty()) {
    auto os = open_out(dir + "/vcov.csv");
    write_header(os, meta);
    const int k = fit.n_free();
    os << "parameter";
    for (const auto& n : fit.names) os << ',' << n;
    os << "\n";
    for (int i = 0; i < k; ++i) {
      os << fit.names[i];
      for (int j = 0; j < k; ++j) os << ',' << fmt_double(fit.vcov[i * k + j]);
      os << "\n";
    }
  }
  if (!fit.re_modes.empty()) {
    auto os = open_out(dir + "/re_modes.csv");
    write_header(os, meta);
    os << "subject_id,mode\n";
    for (std::size_t i = 0; i < fit.re_modes.size(); ++i)
      os << fit.subject_ids[i] << ',' << fmt_double(fit.re_modes[i]) << "\n";
  }
}

ModelParams read_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open params file " + path);
  ModelParams p;
  auto a = to_array(p);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!have_header) {
      have_header = true;  // parameter,estimate,...
      continue;
    }
    const auto f = split_csv(t);
    if (f.size() < 2)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected parameter,estimate");
    const int i = param_index(f[0]);
    if (i >= 0) a[i] = parse_double(f[1], line_no, "estimate");
  }
  return params_from_array(a);
}

void write_decode(const std::string& path, const std::vector<DecodeRow>& rows,
                  const FileMeta& meta, bool json) {
  if (json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
      j.push_back({{"subject_id", r.subject_id},
                   {"month", r.month},
                   {"p_state1", r.p_state1},
                   {"viterbi_state", r.viterbi_state}});
    auto os = open_out(path);
    os << j.dump(2) << "\n";
    return;
  }
  auto os = open_out(path);
  write_header(os, meta);
  os << "subject_id,month,p_state1,viterbi_state\n";
  for (const auto& r : rows)
    os << r.subject_id << ',' << r.month << ',' << fmt_double(r.p_state1)
       << ',' << r.viterbi_state << "\n";
}

void write_predictions(const std::string& path,
                       const std::vector<LosoPrediction>& preds,
                       const FileMeta& meta, bool json) {
  if (json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : preds)
      j.push_back({{"subject_id", p.subject_id},
                   {"month", p.month},
                   {"score", p.score},
                   {"label", p.label}});
    auto os = open_out(path);
    os << j.dump(2) << "\n";
    return;
  }
  auto os = open_out(path);
  write_header(os, meta);
  os << "subject_id,month,score,label\n";
  for (const auto& p : preds)
    os << p.subject_id << ',' << p.month << ',' << fmt_double(p.score) << ','
       << p.label << "\n";
}

void read_predictions(const std::string& path, std::vector<double>& scores,
                      std::vector<int>& labels) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open predictions file " + path);
  scores.clear();
  labels.clear();
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!have_header) {
      have_header = true;
      continue;
    }
    const auto f = split_csv(t);
    if (f.size() < 4)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected subject_id,month,score,label");
    scores.push_back(parse_double(f[2], line_no, "score"));
    labels.push_back(static_cast<int>(parse_long(f[3], line_no, "label")));
  }
}

void write_roc(const std::string& path, const RocCurve& curve,
               const FileMeta& meta, bool json) {
  if (json) {
    nlohmann::json j;
    j["auc"] = curve.auc;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : curve.points)
      pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", p.threshold}});
    j["points"] = pts;
    auto os = open_out(path);
    os << j.dump(2) << "\n";
    return;
  }
  auto os = open_out(path);
  write_header(os, meta);
  os << "# auc=" << fmt_double(curve.auc) << "\n";
  os << "fpr,tpr,threshold\n";
  for (const auto& p : curve.points)
    os << fmt_double(p.fpr) << ',' << fmt_double(p.tpr) << ','
       << fmt_double(p.threshold) << "\n";
}

void write_study(const std::string& path, const StudyReport& report,
                 const FileMeta& meta, bool json) {
  if (json) {
    nlohmann::json j;
    j["q"] = report.q;
    j["replications"] = report.replications;
    j["n_failed"] = report.n_failed;
    j["n_subjects"] = report.n_subjects;
    j["n_obs"] = report.n_obs;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
      rows.push_back({{"parameter", r.name},
                      {"truth", r.truth},
                      {"mean", r.mean},
                      {"sd", r.sd},
                      {"mean_se", r.mean_se}});
    j["rows"] = rows;
    auto os = open_out(path);
    os << j.dump(2) << "\n";
    return;
  }
  auto os = open_out(path);
  write_header(os, meta);
  os << "# q=" << report.q << " replications=" << report.replications
     << " n_failed=" << report.n_failed << " n_subjects=" << report.n_subjects
     << " n_obs=" << report.n_obs << "\n";
  os << "parameter,truth,mean,sd,mean_se\n";
  for (const auto& r : report.rows)
    os << r.name << ',' << fmt_double(r.truth) << ',' << fmt_double(r.mean)
       << ',' << fmt_double(r.sd) << ',' << fmt_double(r.mean_se) << "\n";
}

KvMap read_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config file " + path);
  KvMap kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": empty key");
    kv[key] = value;
  }
  return kv;
}

std::uint64_t config_hash(const KvMap& kv) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  const auto mix = [&](const std::string& s) {
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
  };
  for (const auto& [k, v] : kv) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  return h;
}

double kv_double(const KvMap& kv, const std::string& key, double dflt) {
  const auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (it->second.empty() || end != it->second.c_str() + it->second.size())
    throw ValidationError("config: bad numeric value for " + key);
  return v;
}

long kv_long(const KvMap& kv, const std::string& key, long dflt) {
  const auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  char* end = nullptr;
  const long v = std::strtol(it->second.c_str(), &end, 10);
  if (it->second.empty() || end != it->second.c_str() + it->second.size())
    throw ValidationError("config: bad integer value for " + key);
  return v;
}

std::string kv_string(const KvMap& kv, const std::string& key,
                      const std::string& dflt) {
  const auto it = kv.find(key);
  return it == kv.end() ? dflt : it->second;
}

bool kv_bool(const KvMap& kv, const std::string& key, bool dflt) {
  const auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  if (it->second == "1" || it->second == "true") return true;
  if (it->second == "0" || it->second == "false") return false;
  throw ValidationError("config: bad boolean value for " + key);
}

ModelParams kv_params(const KvMap& kv, const std::string& prefix,
                      const ModelParams& base) {
  auto a = to_array(base);
  for (int i = 0; i < kNumParams; ++i)
    a[i] = kv_double(kv, prefix + param_names()[i], a[i]);
  return params_from_array(a);
}

}  // namespace mhmm::io
