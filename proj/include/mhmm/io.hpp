#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mhmm/estimation.hpp"
#include "mhmm/model.hpp"
#include "mhmm/predict.hpp"
#include "mhmm/simulate.hpp"

// Plain-text input/output: delimited files in, delimited files out, so every
// artifact diffs cleanly. Output files start with '#' comment headers
// carrying the tool version, seed and config hash; ingest skips comments, so
// simulate -> write -> ingest round-trips exactly.

namespace mhmm::io {

struct IngestReport {
  Dataset data;
  int clamped_cnc = 0;  // cnc values above 1 clamped to 1
  std::vector<std::string> warnings;
};

// CSV with header subject_id,month,miles,cnc,kinematic_count — or the five
// per-type count columns rapid_starts,hard_stops,hard_left,hard_right,yaw in
// place of kinematic_count, summed on ingestion. Duplicate (subject, month)
// pairs and month gaps are rejected with the offending line/subject named.
IngestReport ingest(const std::string& path);

struct FileMeta {
  std::string seed = "0";
  std::string config_hash = "0";
};

void write_header(std::ostream& os, const FileMeta& meta);

void write_dataset(const std::string& path, const Dataset& d,
                   const FileMeta& meta);

// fit artifacts: params.csv, summary.csv, vcov.csv, re_modes.csv under dir
// (or a single fit.json when json = true)
void write_fit(const std::string& dir, const FitResult& fit,
               const FileMeta& meta, bool json);

// reads a params.csv (parameter,estimate,...) back into ModelParams
ModelParams read_params(const std::string& path);

struct DecodeRow {
  std::string subject_id;
  int month = 0;
  double p_state1 = 0.0;
  int viterbi_state = 0;
};
void write_decode(const std::string& path, const std::vector<DecodeRow>& rows,
                  const FileMeta& meta, bool json);

void write_predictions(const std::string& path,
                       const std::vector<LosoPrediction>& preds,
                       const FileMeta& meta, bool json);
void read_predictions(const std::string& path, std::vector<double>& scores,
                      std::vector<int>& labels);

void write_roc(const std::string& path, const RocCurve& curve,
               const FileMeta& meta, bool json);

void write_study(const std::string& path, const StudyReport& report,
                 const FileMeta& meta, bool json);

// ---- flat key=value configuration ----

using KvMap = std::map<std::string, std::string>;

KvMap read_config(const std::string& path);

// FNV-1a over the sorted canonical "key=value" lines
std::uint64_t config_hash(const KvMap& kv);

// typed accessors with defaults; throw ValidationError on malformed values
double kv_double(const KvMap& kv, const std::string& key, double dflt);
long kv_long(const KvMap& kv, const std::string& key, long dflt);
std::string kv_string(const KvMap& kv, const std::string& key,
                      const std::string& dflt);
bool kv_bool(const KvMap& kv, const std::string& key, bool dflt);

// reads truth.<name> keys into ModelParams (missing keys keep `base` values)
ModelParams kv_params(const KvMap& kv, const std::string& prefix,
                      const ModelParams& base);

}  // namespace mhmm::io
