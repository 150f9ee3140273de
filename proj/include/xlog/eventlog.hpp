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

// Case-centric event logs: ingestion from flat CSV, cleaning (label
// imputation, spread-attribute collapsing, rare-class filtering) and the
// feature correlation map.
//
// A flat CSV carries one event per row; static case attributes are repeated
// on every row. Attributes that the source system spreads over several
// columns ("Treatment code", "Treatment code:1", ...) are recognised by the
// ":<n>" suffix and their recorded values kept in order until cleaning
// collapses them.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xlog/core.hpp"
#include "xlog/csv.hpp"

namespace xlog {

inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

struct Event {
  std::string activity;
  std::string department;
  std::int64_t timestamp = 0;  // UTC seconds
  int num_executions = 1;
  std::string activity_code;
  std::string producer_code;
  std::string section;
};

struct Case {
  std::string case_id;
  std::vector<Event> events;
  int age = 0;
  std::optional<std::string> diagnosis_code;
  std::string treatment_code;
  std::string combination_id;
  double years_in_treatment = 0.0;
  // Values recorded for spread static attributes, oldest first, consecutive
  // repeats removed. Keys: "age", "diagnosis_code", "treatment_code",
  // "combination_id".
  std::map<std::string, std::vector<std::string>> recorded;
};

struct EventLog {
  std::vector<Case> cases;
  std::map<std::string, std::size_t> class_counts;
  std::size_t unparseable_rows = 0;
  std::vector<std::string> warnings;

  void recount() {
    class_counts.clear();
    for (const auto& c : cases) {
      if (c.diagnosis_code) ++class_counts[*c.diagnosis_code];
    }
  }

  std::size_t event_count() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.events.size();
    return n;
  }
};

struct CleaningReport {
  std::size_t original_cases = 0;
  std::size_t imputed_labels = 0;
  std::size_t dropped_cases = 0;  // unlabeled and not imputable
  std::vector<std::string> collapsed_features;
  std::set<std::string> kept_classes;
  std::map<std::string, std::size_t> dropped_classes;  // label -> case count
  std::size_t unparseable_rows = 0;
};

inline void to_json(nlohmann::json& j, const CleaningReport& r) {
  j = nlohmann::json{{"original_cases", r.original_cases},
                     {"imputed_labels", r.imputed_labels},
                     {"dropped_cases", r.dropped_cases},
                     {"collapsed_features", r.collapsed_features},
                     {"kept_classes", r.kept_classes},
                     {"dropped_classes", r.dropped_classes},
                     {"unparseable_rows", r.unparseable_rows}};
}

// Maps logical fields onto CSV column names. An empty name means the column
// is absent; case_id, activity and timestamp are mandatory.
struct Schema {
  std::string case_id = "case_id";
  std::string activity = "activity";
  std::string timestamp = "timestamp";
  std::string department;
  std::string num_executions;
  std::string activity_code;
  std::string producer_code;
  std::string section;
  std::string age;
  std::string diagnosis_code;
  std::string treatment_code;
  std::string combination_id;

  // Column names of the hospital log once flattened from XES.
  static Schema hospital_log() {
    Schema s;
    s.case_id = "case";
    s.activity = "Activity";
    s.timestamp = "Timestamp";
    s.department = "Department";
    s.num_executions = "Number of executions";
    s.activity_code = "Activity code";
    s.producer_code = "Producer code";
    s.section = "Section";
    s.age = "Age";
    s.diagnosis_code = "Diagnosis code";
    s.treatment_code = "Treatment code";
    s.combination_id = "Diagnosis Treatment Combination ID";
    return s;
  }

  static Schema from_json(const nlohmann::json& j) {
    Schema s;
    s.case_id.clear();
    s.activity.clear();
    s.timestamp.clear();
    const auto get = [&](const char* key, std::string& out) {
      if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    get("case_id", s.case_id);
    get("activity", s.activity);
    get("timestamp", s.timestamp);
    get("department", s.department);
    get("num_executions", s.num_executions);
    get("activity_code", s.activity_code);
    get("producer_code", s.producer_code);
    get("section", s.section);
    get("age", s.age);
    get("diagnosis_code", s.diagnosis_code);
    get("treatment_code", s.treatment_code);
    get("combination_id", s.combination_id);
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"case_id", case_id}, {"activity", activity}, {"timestamp", timestamp}};
    const auto put = [&](const char* key, const std::string& v) {
      if (!v.empty()) j[key] = v;
    };
    put("department", department);
    put("num_executions", num_executions);
    put("activity_code", activity_code);
    put("producer_code", producer_code);
    put("section", section);
    put("age", age);
    put("diagnosis_code", diagnosis_code);
    put("treatment_code", treatment_code);
    put("combination_id", combination_id);
    return j;
  }

  static Schema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file: " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("malformed schema " + path + ": " + e.what());
    }
  }
};

namespace detail {

inline int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline bool read_digits(const std::string& s, std::size_t& pos, int count, int& out) {
  if (pos + static_cast<std::size_t>(count) > s.size()) return false;
  out = 0;
  for (int i = 0; i < count; ++i) {
    const char c = s[pos + static_cast<std::size_t>(i)];
    if (c < '0' || c > '9') return false;
    out = out * 10 + (c - '0');
  }
  pos += static_cast<std::size_t>(count);
  return true;
}

}  // namespace detail

// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS" and ISO-8601 with 'T',
// optional fractional seconds and a 'Z' or +hh:mm / +hhmm offset.
inline std::optional<std::int64_t> parse_timestamp(const std::string& raw) {
  const std::string s = csv::trim(raw);
  std::size_t pos = 0;
  int year, month, day, hour = 0, minute = 0, second = 0;
  if (!detail::read_digits(s, pos, 4, year) || pos >= s.size() || s[pos++] != '-') return std::nullopt;
  if (!detail::read_digits(s, pos, 2, month) || pos >= s.size() || s[pos++] != '-') return std::nullopt;
  if (!detail::read_digits(s, pos, 2, day)) return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
    ++pos;
    if (!detail::read_digits(s, pos, 2, hour) || pos >= s.size() || s[pos++] != ':') return std::nullopt;
    if (!detail::read_digits(s, pos, 2, minute)) return std::nullopt;
    if (pos < s.size() && s[pos] == ':') {
      ++pos;
      if (!detail::read_digits(s, pos, 2, second)) return std::nullopt;
    }
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    if (pos < s.size()) {
      if (s[pos] == 'Z') {
        ++pos;
      } else if (s[pos] == '+' || s[pos] == '-') {
        const int sign = s[pos] == '+' ? 1 : -1;
        ++pos;
        int oh, om = 0;
        if (!detail::read_digits(s, pos, 2, oh)) return std::nullopt;
        if (pos < s.size() && s[pos] == ':') ++pos;
        if (pos < s.size() && !detail::read_digits(s, pos, 2, om)) return std::nullopt;
        offset = sign * (oh * 3600 + om * 60);
      }
    }
    if (pos != s.size()) return std::nullopt;
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
  }
  const std::int64_t days =
      detail::days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

inline void derive_years(Case& c) {
  if (c.events.empty()) {
    c.years_in_treatment = 0.0;
    return;
  }
  const auto span = c.events.back().timestamp - c.events.front().timestamp;
  c.years_in_treatment = static_cast<double>(span) / kSecondsPerYear;
}

namespace detail {

// Column indices for a logical field: the base column followed by its
// ":<n>" spread columns in ascending n.
inline std::vector<std::size_t> field_columns(const std::vector<std::string>& header,
                                              const std::string& base) {
  std::vector<std::size_t> cols;
  if (base.empty()) return cols;
  std::vector<std::pair<int, std::size_t>> spread;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h == base) {
      spread.emplace_back(0, i);
    } else if (h.size() > base.size() + 1 && h.compare(0, base.size(), base) == 0 &&
               h[base.size()] == ':') {
      const std::string suffix = h.substr(base.size() + 1);
      if (!suffix.empty() && std::all_of(suffix.begin(), suffix.end(), [](unsigned char ch) { return std::isdigit(ch) != 0; })) {
        spread.emplace_back(std::stoi(suffix), i);
      }
    }
  }
  std::sort(spread.begin(), spread.end());
  for (auto& [n, i] : spread) cols.push_back(i);
  return cols;
}

inline std::string first_value(const csv::Row& row, const std::vector<std::size_t>& cols) {
  for (auto c : cols) {
    if (c < row.size()) {
      std::string v = csv::trim(row[c]);
      if (!v.empty()) return v;
    }
  }
  return {};
}

inline void record(std::vector<std::string>& history, const csv::Row& row,
                   const std::vector<std::size_t>& cols) {
  for (auto c : cols) {
    if (c >= row.size()) continue;
    std::string v = csv::trim(row[c]);
    if (v.empty()) continue;
    if (history.empty() || history.back() != v) history.push_back(std::move(v));
  }
}

inline std::optional<int> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) return std::nullopt;
  return static_cast<int>(std::llround(v));
}

inline void apply_recorded(Case& c) {
  const auto last = [&](const char* key) -> const std::string* {
    auto it = c.recorded.find(key);
    if (it == c.recorded.end() || it->second.empty()) return nullptr;
    return &it->second.back();
  };
  if (auto* v = last("age")) c.age = std::max(0, parse_int(*v).value_or(0));
  if (auto* v = last("diagnosis_code")) c.diagnosis_code = *v;
  if (auto* v = last("treatment_code")) c.treatment_code = *v;
  if (auto* v = last("combination_id")) c.combination_id = *v;
}

}  // namespace detail

// Reads a flat CSV. Rows with an empty case id, an unparseable timestamp or a
// non-positive execution count are skipped and counted in unparseable_rows.
inline EventLog parse_log(std::istream& in, const Schema& schema) {
  auto header_row = csv::read_row(in);
  if (!header_row) throw EmptyLogError("empty input: no header row");
  std::vector<std::string> header;
  for (auto& h : *header_row) header.push_back(csv::trim(h));
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  const auto mandatory = [&](const std::string& name, const char* field) {
    if (name.empty()) throw SchemaError(std::string("schema names no column for ") + field);
    auto cols = detail::field_columns(header, name);
    if (cols.empty()) throw SchemaError("missing mandatory column '" + name + "' (" + field + ")");
    return cols;
  };
  const auto case_cols = mandatory(schema.case_id, "case_id");
  const auto activity_cols = mandatory(schema.activity, "activity");
  const auto time_cols = mandatory(schema.timestamp, "timestamp");
  const auto dept_cols = detail::field_columns(header, schema.department);
  const auto exec_cols = detail::field_columns(header, schema.num_executions);
  const auto acode_cols = detail::field_columns(header, schema.activity_code);
  const auto prod_cols = detail::field_columns(header, schema.producer_code);
  const auto section_cols = detail::field_columns(header, schema.section);
  const auto age_cols = detail::field_columns(header, schema.age);
  const auto diag_cols = detail::field_columns(header, schema.diagnosis_code);
  const auto treat_cols = detail::field_columns(header, schema.treatment_code);
  const auto combo_cols = detail::field_columns(header, schema.combination_id);

  EventLog log;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line = 1;
  const auto skip = [&](const std::string& why) {
    ++log.unparseable_rows;
    if (log.warnings.size() < 20) log.warnings.push_back("row " + std::to_string(line) + ": " + why);
  };
  while (auto row = csv::read_row(in)) {
    ++line;
    if (row->size() == 1 && csv::trim((*row)[0]).empty()) continue;
    const std::string case_id = detail::first_value(*row, case_cols);
    if (case_id.empty()) {
      skip("empty case id");
      continue;
    }
    const auto ts = parse_timestamp(detail::first_value(*row, time_cols));
    if (!ts) {
      skip("unparseable timestamp");
      continue;
    }
    Event e;
    e.timestamp = *ts;
    e.activity = detail::first_value(*row, activity_cols);
    e.department = detail::first_value(*row, dept_cols);
    e.activity_code = detail::first_value(*row, acode_cols);
    e.producer_code = detail::first_value(*row, prod_cols);
    e.section = detail::first_value(*row, section_cols);
    const std::string exec = detail::first_value(*row, exec_cols);
    if (!exec.empty()) {
      const auto n = detail::parse_int(exec);
      if (!n || *n < 1) {
        skip("invalid number of executions");
        continue;
      }
      e.num_executions = *n;
    }
    auto [it, inserted] = index.try_emplace(case_id, log.cases.size());
    if (inserted) {
      log.cases.emplace_back();
      log.cases.back().case_id = case_id;
    }
    Case& c = log.cases[it->second];
    c.events.push_back(std::move(e));
    detail::record(c.recorded["age"], *row, age_cols);
    detail::record(c.recorded["diagnosis_code"], *row, diag_cols);
    detail::record(c.recorded["treatment_code"], *row, treat_cols);
    detail::record(c.recorded["combination_id"], *row, combo_cols);
  }
  if (log.cases.empty()) throw EmptyLogError("no parseable rows");
  for (auto& c : log.cases) {
    std::stable_sort(c.events.begin(), c.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    for (auto it = c.recorded.begin(); it != c.recorded.end();) {
      it = it->second.empty() ? c.recorded.erase(it) : std::next(it);
    }
    detail::apply_recorded(c);
    derive_years(c);
  }
  log.recount();
  return log;
}

inline EventLog parse_log(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open log file: " + path);
  return parse_log(in, schema);
}

namespace detail {

using TokenBag = std::map<std::string, int>;

inline TokenBag similarity_bag(const Case& c) {
  TokenBag bag;
  for (const auto& e : c.events) ++bag["a:" + e.activity];
  if (!c.treatment_code.empty()) ++bag["t:" + c.treatment_code];
  return bag;
}

// Multiset Jaccard: sum of minimum counts over sum of maximum counts.
inline double jaccard(const TokenBag& a, const TokenBag& b) {
  long inter = 0, uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace detail

// Cleans a parsed log:
//   1. spread attributes collapse to their last recorded value;
//   2. years_in_treatment is re-derived from first/last timestamps;
//   3. unlabeled cases inherit the label of the most similar labeled case
//      (multiset Jaccard over activities plus treatment code; ties go to the
//      larger class, then the smaller label); zero similarity drops the case;
//   4. classes with fewer than min_class_count cases are removed.
inline std::pair<EventLog, CleaningReport> clean_log(const EventLog& log,
                                                     std::size_t min_class_count = 30) {
  if (min_class_count < 1) throw DomainError("min_class_count must be >= 1");
  EventLog out = log;
  CleaningReport report;
  report.original_cases = log.cases.size();
  report.unparseable_rows = log.unparseable_rows;

  std::set<std::string> collapsed;
  for (auto& c : out.cases) {
    for (auto& [field, history] : c.recorded) {
      if (history.size() > 1) {
        collapsed.insert(field);
        history.erase(history.begin(), history.end() - 1);
      }
    }
    detail::apply_recorded(c);
    derive_years(c);
  }
  report.collapsed_features.assign(collapsed.begin(), collapsed.end());

  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::map<std::string, std::size_t> original_counts;
  for (std::size_t i = 0; i < out.cases.size(); ++i) {
    if (out.cases[i].diagnosis_code) {
      labeled.push_back(i);
      ++original_counts[*out.cases[i].diagnosis_code];
    } else {
      unlabeled.push_back(i);
    }
  }
  if (labeled.empty()) throw DomainError("cannot impute labels: every case is unlabeled");

  if (!unlabeled.empty()) {
    std::vector<detail::TokenBag> bags(out.cases.size());
    for (std::size_t i = 0; i < out.cases.size(); ++i) bags[i] = detail::similarity_bag(out.cases[i]);
    std::vector<bool> drop(out.cases.size(), false);
    std::vector<std::optional<std::string>> assigned(out.cases.size());
    for (auto u : unlabeled) {
      double best_sim = 0.0;
      const std::string* best_label = nullptr;
      for (auto l : labeled) {
        const double sim = detail::jaccard(bags[u], bags[l]);
        const std::string& label = *out.cases[l].diagnosis_code;
        bool better = false;
        if (best_label == nullptr || sim > best_sim) {
          better = sim > 0.0 || best_label == nullptr;
        } else if (sim == best_sim) {
          const auto cb = original_counts[*best_label];
          const auto cl = original_counts[label];
          better = cl > cb || (cl == cb && label < *best_label);
        }
        if (better) {
          best_sim = sim;
          best_label = &label;
        }
      }
      if (best_sim > 0.0) {
        assigned[u] = *best_label;
      } else {
        drop[u] = true;
      }
    }
    std::vector<Case> kept;
    kept.reserve(out.cases.size());
    for (std::size_t i = 0; i < out.cases.size(); ++i) {
      if (drop[i]) {
        ++report.dropped_cases;
        continue;
      }
      if (assigned[i]) {
        out.cases[i].diagnosis_code = assigned[i];
        out.cases[i].recorded["diagnosis_code"] = {*assigned[i]};
        ++report.imputed_labels;
      }
      kept.push_back(std::move(out.cases[i]));
    }
    out.cases = std::move(kept);
  }

  out.recount();
  std::vector<Case> filtered;
  for (auto& c : out.cases) {
    if (out.class_counts[*c.diagnosis_code] >= min_class_count) filtered.push_back(std::move(c));
  }
  for (const auto& [label, count] : out.class_counts) {
    if (count >= min_class_count) {
      report.kept_classes.insert(label);
    } else {
      report.dropped_classes[label] = count;
    }
  }
  out.cases = std::move(filtered);
  out.recount();
  return {std::move(out), std::move(report)};
}

// Names accepted by correlation_matrix, with their kind.
inline const std::vector<std::pair<std::string, bool>>& correlation_features() {
  // second = categorical
  static const std::vector<std::pair<std::string, bool>> kFeatures = {
      {"activity", true},       {"department", true},     {"num_executions", false},
      {"activity_code", true},  {"producer_code", true},  {"section", true},
      {"age", false},           {"diagnosis_code", true}, {"treatment_code", true},
      {"combination_id", true}, {"years", false}};
  return kFeatures;
}

struct CorrelationResult {
  std::vector<std::string> features;
  Matrix values;
  std::vector<bool> zero_variance;
};

// Pearson correlation between features over event rows (each event joined
// with its case's static attributes). Categorical features are encoded by
// frequency rank (most frequent = 1, ties lexicographic).
inline CorrelationResult correlation_matrix(const EventLog& log,
                                            const std::vector<std::string>& features) {
  if (log.cases.size() < 2) throw DomainError("correlation needs at least 2 cases");
  const auto& known = correlation_features();
  std::vector<bool> categorical;
  for (const auto& f : features) {
    auto it = std::find_if(known.begin(), known.end(), [&](const auto& k) { return k.first == f; });
    if (it == known.end()) throw SchemaError("unknown correlation feature: " + f);
    categorical.push_back(it->second);
  }
  const auto raw = [](const Case& c, const Event& e, const std::string& f) -> std::string {
    if (f == "activity") return e.activity;
    if (f == "department") return e.department;
    if (f == "activity_code") return e.activity_code;
    if (f == "producer_code") return e.producer_code;
    if (f == "section") return e.section;
    if (f == "diagnosis_code") return c.diagnosis_code.value_or("");
    if (f == "treatment_code") return c.treatment_code;
    return c.combination_id;
  };
  const auto numeric = [](const Case& c, const Event& e, const std::string& f) -> double {
    if (f == "num_executions") return e.num_executions;
    if (f == "age") return c.age;
    return c.years_in_treatment;
  };

  const std::size_t n = log.event_count();
  const std::size_t k = features.size();
  Matrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const auto& f = features[j];
    if (categorical[j]) {
      std::map<std::string, std::size_t> freq;
      for (const auto& c : log.cases)
        for (const auto& e : c.events) ++freq[raw(c, e, f)];
      std::vector<std::pair<std::string, std::size_t>> order(freq.begin(), freq.end());
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      std::map<std::string, double> rank;
      for (std::size_t r = 0; r < order.size(); ++r) rank[order[r].first] = static_cast<double>(r + 1);
      std::size_t row = 0;
      for (const auto& c : log.cases)
        for (const auto& e : c.events) data(static_cast<Eigen::Index>(row++), static_cast<Eigen::Index>(j)) = rank[raw(c, e, f)];
    } else {
      std::size_t row = 0;
      for (const auto& c : log.cases)
        for (const auto& e : c.events) data(static_cast<Eigen::Index>(row++), static_cast<Eigen::Index>(j)) = numeric(c, e, f);
    }
  }

  CorrelationResult result;
  result.features = features;
  result.values = Matrix::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  result.zero_variance.assign(k, false);
  std::vector<Vector> centered(k);
  std::vector<double> norms(k);
  for (std::size_t j = 0; j < k; ++j) {
    Vector col = data.col(static_cast<Eigen::Index>(j));
    centered[j] = col.array() - col.mean();
    norms[j] = centered[j].norm();
    result.zero_variance[j] = norms[j] == 0.0;
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double r = 0.0;
      if (!result.zero_variance[a] && !result.zero_variance[b]) {
        r = centered[a].dot(centered[b]) / (norms[a] * norms[b]);
        r = std::clamp(r, -1.0, 1.0);
      }
      result.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
      result.values(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;
    }
  }
  return result;
}

}  // namespace xlog
