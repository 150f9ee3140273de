// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Synthetic event logs with planted signal, and synthetic activation
// matrices for the latent module.

#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "xlog/core.hpp"
#include "xlog/csv.hpp"
#include "xlog/eventlog.hpp"
#include "xlog/seqnet.hpp"

namespace xlog {

struct AgeRule {
  std::string label;        // class whose cases are older than the threshold
  int threshold = 70;
};

struct SyntheticSpec {
  std::vector<std::string> class_names = {"106", "M13", "M16"};
  std::size_t cases_per_class = 50;
  // Ordered activity tokens per class; empty means one generated motif of
  // motif_length tokens per class, disjoint across classes.
  std::vector<std::vector<std::string>> motifs;
  std::size_t motif_length = 3;
  std::size_t motif_position = 2;
  std::size_t trace_length = 8;
  std::size_t noise_vocabulary = 6;
  std::size_t departments = 3;
  std::optional<AgeRule> age_rule = AgeRule{"106", 70};
  // Two classes whose motifs are the same tokens in opposite order.
  bool order_only = false;
};

inline SyntheticSpec order_only_spec() {
  SyntheticSpec s;
  s.class_names = {"early", "late"};
  s.cases_per_class = 200;
  s.order_only = true;
  s.age_rule.reset();
  return s;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  nlohmann::json j = {{"class_names", s.class_names},
                      {"cases_per_class", s.cases_per_class},
                      {"motifs", s.motifs},
                      {"motif_length", s.motif_length},
                      {"motif_position", s.motif_position},
                      {"trace_length", s.trace_length},
                      {"noise_vocabulary", s.noise_vocabulary},
                      {"departments", s.departments},
                      {"order_only", s.order_only}};
  if (s.age_rule) j["age_rule"] = {{"label", s.age_rule->label}, {"threshold", s.age_rule->threshold}};
  return j;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  if (j.value("order_only", false)) s = order_only_spec();
  try {
    if (j.contains("class_names")) s.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("motifs")) s.motifs = j.at("motifs").get<std::vector<std::vector<std::string>>>();
    s.cases_per_class = j.value("cases_per_class", s.cases_per_class);
    s.motif_length = j.value("motif_length", s.motif_length);
    s.motif_position = j.value("motif_position", s.motif_position);
    s.trace_length = j.value("trace_length", s.trace_length);
    s.noise_vocabulary = j.value("noise_vocabulary", s.noise_vocabulary);
    s.departments = j.value("departments", s.departments);
    if (j.contains("age_rule")) {
      if (j.at("age_rule").is_null()) {
        s.age_rule.reset();
      } else {
        s.age_rule = AgeRule{j.at("age_rule").at("label").get<std::string>(), j.at("age_rule").value("threshold", 70)};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed synthetic spec: ") + e.what());
  }
  return s;
}

struct SyntheticLog {
  EventLog log;
  nlohmann::json manifest;  // planted truth
};

namespace detail {

inline std::vector<std::vector<std::string>> resolve_motifs(const SyntheticSpec& s) {
  if (!s.motifs.empty()) return s.motifs;
  std::vector<std::vector<std::string>> out;
  if (s.order_only) {
    std::vector<std::string> base;
    for (std::size_t k = 0; k < s.motif_length; ++k) base.push_back("step_" + std::string(1, static_cast<char>('a' + k)));
    out.push_back(base);
    out.emplace_back(base.rbegin(), base.rend());
    return out;
  }
  for (std::size_t c = 0; c < s.class_names.size(); ++c) {
    std::vector<std::string> m;
    for (std::size_t k = 0; k < s.motif_length; ++k) {
      m.push_back("motif_" + std::to_string(c) + "_" + std::to_string(k));
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline void validate(const SyntheticSpec& s, const std::vector<std::vector<std::string>>& motifs) {
  const std::size_t C = s.class_names.size();
  if (C < 2) throw DomainError("synthetic spec needs at least 2 classes");
  if (s.order_only && C != 2) throw DomainError("order-only spec has exactly 2 classes");
  if (std::set<std::string>(s.class_names.begin(), s.class_names.end()).size() != C) {
    throw DomainError("class names must be distinct");
  }
  if (s.cases_per_class < 4) throw DomainError("cases per class must be >= 4");
  if (s.noise_vocabulary < 1) throw DomainError("noise vocabulary must be >= 1");
  if (s.departments < 1) throw DomainError("department count must be >= 1");
  if (motifs.size() != C) throw DomainError("one motif per class required");
  for (std::size_t c = 0; c < C; ++c) {
    if (motifs[c].empty()) throw DomainError("motif of class " + s.class_names[c] + " is empty");
    if (s.motif_position + motifs[c].size() > s.trace_length) {
      throw DomainError("motif of class " + s.class_names[c] + " does not fit in a trace of length " +
                        std::to_string(s.trace_length) + " at position " + std::to_string(s.motif_position));
    }
    for (std::size_t d = 0; d < c; ++d) {
      if (motifs[c] == motifs[d]) throw DomainError("motifs must be pairwise distinct");
    }
  }
  if (s.age_rule) {
    if (std::find(s.class_names.begin(), s.class_names.end(), s.age_rule->label) == s.class_names.end()) {
      throw DomainError("age rule names unknown class " + s.age_rule->label);
    }
    if (s.age_rule->threshold < 1 || s.age_rule->threshold >= 110) throw DomainError("age threshold out of range");
  }
}

// Inverse of days_from_civil.
inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe) + static_cast<int>(era) * 400 + (m <= 2);
}

}  // namespace detail

inline std::string format_timestamp(std::int64_t seconds) {
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y;
  unsigned m, d;
  detail::civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", y, m, d, static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

// Each case of class c carries motif_c at motif_position; every other step
// draws a noise activity. Department, codes and execution counts are noise.
// Ages satisfy the age rule when one is given (rule class strictly above the
// threshold, every other class at or below it). Cases are interleaved by
// class so that case order carries no label information.
inline SyntheticLog generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  const auto motifs = detail::resolve_motifs(spec);
  detail::validate(spec, motifs);
  Rng rng(seed);
  SyntheticLog out;
  const std::int64_t epoch = detail::days_from_civil(2005, 1, 3) * 86400;
  const std::size_t C = spec.class_names.size();
  std::size_t serial = 0;
  for (std::size_t i = 0; i < spec.cases_per_class; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      Case k;
      k.case_id = "case" + std::to_string(serial);
      k.diagnosis_code = spec.class_names[c];
      if (spec.age_rule) {
        const int t = spec.age_rule->threshold;
        k.age = spec.age_rule->label == spec.class_names[c] ? t + 1 + static_cast<int>(rng.below(20))
                                                            : 20 + static_cast<int>(rng.below(static_cast<std::size_t>(t - 19)));
      } else {
        k.age = 20 + static_cast<int>(rng.below(71));
      }
      k.treatment_code = "T" + std::to_string(rng.below(3));
      k.combination_id = "DTC" + std::to_string(rng.below(4));
      std::int64_t ts = epoch + static_cast<std::int64_t>(serial) * 86400 * 7 + 8 * 3600;
      for (std::size_t t = 0; t < spec.trace_length; ++t) {
        Event e;
        if (t >= spec.motif_position && t < spec.motif_position + motifs[c].size()) {
          e.activity = motifs[c][t - spec.motif_position];
        } else {
          e.activity = "noise_" + std::to_string(rng.below(spec.noise_vocabulary));
        }
        e.department = "dept_" + std::to_string(rng.below(spec.departments));
        e.activity_code = "AC" + std::to_string(rng.below(5));
        e.producer_code = "P" + std::to_string(rng.below(4));
        e.section = "S" + std::to_string(rng.below(2));
        e.num_executions = 1 + static_cast<int>(rng.below(3));
        e.timestamp = ts;
        ts += 3600 * (1 + static_cast<std::int64_t>(rng.below(48)));
        k.events.push_back(std::move(e));
      }
      derive_years(k);
      out.log.cases.push_back(std::move(k));
      ++serial;
    }
  }
  out.log.recount();
  out.manifest = {{"seed", seed},
                  {"spec", to_json(spec)},
                  {"motifs", motifs},
                  {"motif_columns", nlohmann::json::array()},
                  {"cases", out.log.cases.size()}};
  for (std::size_t k = 0; k < motifs.front().size(); ++k) {
    out.manifest["motif_columns"].push_back("Activity Coded_" + std::to_string(spec.motif_position + k));
  }
  if (spec.age_rule) out.manifest["age_rule"] = {{"label", spec.age_rule->label}, {"threshold", spec.age_rule->threshold}};
  return out;
}

// Writes a log with the hospital column names; parse_log(.., hospital_log())
// reads it back.
inline std::string log_to_csv(const EventLog& log) {
  const Schema s = Schema::hospital_log();
  std::string out = csv::join({s.case_id, s.activity, s.timestamp, s.department, s.num_executions, s.activity_code,
                               s.producer_code, s.section, s.age, s.diagnosis_code, s.treatment_code,
                               s.combination_id}) +
                    "\n";
  for (const auto& c : log.cases) {
    for (const auto& e : c.events) {
      out += csv::join({c.case_id, e.activity, format_timestamp(e.timestamp), e.department,
                        std::to_string(e.num_executions), e.activity_code, e.producer_code, e.section,
                        std::to_string(c.age), c.diagnosis_code.value_or(""), c.treatment_code, c.combination_id}) +
             "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activation matrices

struct BlobSpec {
  std::size_t classes = 3;
  std::size_t per_class = 40;
  Eigen::Index dim = 20;
  double center_scale = 0.6;  // centers uniform in [-scale, scale]^dim
  double noise_sd = 0.05;
  bool plant_outlier = true;  // last row: class 0 drawn from class 1's blob
};

// Rows of class c cluster around a random center; predicted labels equal the
// true labels except for the planted outlier, which is predicted as its true
// class while sitting in another class's blob.
inline ActivationMatrix blob_activations(const BlobSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) throw DomainError("blob activations need at least 2 classes");
  if (spec.per_class < 1 || spec.dim < 1) throw DomainError("blob activations need rows and columns");
  Rng rng(seed);
  Matrix centers(static_cast<Eigen::Index>(spec.classes), spec.dim);
  for (Eigen::Index c = 0; c < centers.rows(); ++c)
    for (Eigen::Index j = 0; j < spec.dim; ++j) centers(c, j) = rng.uniform(-spec.center_scale, spec.center_scale);
  const std::size_t M = spec.classes * spec.per_class + (spec.plant_outlier ? 1 : 0);
  ActivationMatrix a;
  a.values.resize(static_cast<Eigen::Index>(M), spec.dim);
  for (std::size_t i = 0; i < M; ++i) {
    const bool outlier = spec.plant_outlier && i + 1 == M;
    const std::size_t label = outlier ? 0 : i % spec.classes;
    const std::size_t blob = outlier ? 1 : label;
    for (Eigen::Index j = 0; j < spec.dim; ++j) {
      a.values(static_cast<Eigen::Index>(i), j) = centers(static_cast<Eigen::Index>(blob), j) + spec.noise_sd * rng.normal();
    }
    a.true_labels.push_back(static_cast<int>(label));
    a.predicted_labels.push_back(static_cast<int>(label));
    a.case_ids.push_back(outlier ? "outlier" : "row" + std::to_string(i));
  }
  for (std::size_t c = 0; c < spec.classes; ++c) a.label_names.push_back("class" + std::to_string(c));
  return a;
}

// Rows z * A + noise with z uniform on [-1, 1]^2: a 2-D linear subspace.
inline Matrix two_factor_matrix(std::size_t rows, Eigen::Index dim, std::uint64_t seed, double noise_sd = 0.0) {
  Rng rng(seed);
  Matrix A(2, dim);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) A(i, j) = rng.uniform(-0.5, 0.5);
  Matrix out(static_cast<Eigen::Index>(rows), dim);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double z0 = rng.uniform(-1.0, 1.0), z1 = rng.uniform(-1.0, 1.0);
    for (Eigen::Index j = 0; j < dim; ++j) out(r, j) = z0 * A(0, j) + z1 * A(1, j) + noise_sd * rng.normal();
  }
  return out;
}

}  // namespace xlog
