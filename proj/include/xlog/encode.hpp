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

// Machine-learning encodings of a cleaned event log.
//
// SequenceDataset is the M x T x F tensor consumed by the sequence networks;
// FlatDataset is its positional flattening, M x (F_dyn * L + F_static), for
// classical learners. Categorical tokens become vocabulary indices (0 is
// padding/unknown) and numeric features are min-max scaled.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "xlog/container.hpp"
#include "xlog/core.hpp"
#include "xlog/eventlog.hpp"

namespace xlog {

struct FieldInfo {
  std::string field;    // logical name, e.g. "activity"
  std::string display;  // column stem, e.g. "Activity Coded"
  bool dynamic;         // per event (true) or per case (false)
  bool categorical;
};

inline const std::vector<FieldInfo>& known_fields() {
  static const std::vector<FieldInfo> kFields = {
      {"activity", "Activity Coded", true, true},
      {"department", "Department Coded", true, true},
      {"activity_code", "ActivityCode Coded", true, true},
      {"producer_code", "ProducerCode Coded", true, true},
      {"section", "Section Coded", true, true},
      {"num_executions", "Number of executions", true, false},
      {"treatment_code", "Treatment Coded", false, true},
      {"combination_id", "Combination ID Coded", false, true},
      {"age", "Age", false, false},
      {"years", "years", false, false},
  };
  return kFields;
}

inline const FieldInfo& field_info(const std::string& field) {
  for (const auto& f : known_fields()) {
    if (f.field == field) return f;
  }
  throw SchemaError("unknown feature field: " + field);
}

inline std::string categorical_value(const Case& c, const Event& e, const std::string& field) {
  if (field == "activity") return e.activity;
  if (field == "department") return e.department;
  if (field == "activity_code") return e.activity_code;
  if (field == "producer_code") return e.producer_code;
  if (field == "section") return e.section;
  if (field == "treatment_code") return c.treatment_code;
  if (field == "combination_id") return c.combination_id;
  throw SchemaError("not a categorical field: " + field);
}

inline double numeric_value(const Case& c, const Event& e, const std::string& field) {
  if (field == "num_executions") return e.num_executions;
  if (field == "age") return c.age;
  if (field == "years") return c.years_in_treatment;
  throw SchemaError("not a numeric field: " + field);
}

// Per-feature token -> index maps. Index 0 is reserved for padding and
// unknown tokens.
struct Vocabulary {
  std::vector<std::string> features;
  std::vector<std::map<std::string, int>> index;
  std::vector<std::vector<std::string>> tokens;  // tokens[f][0] is ""

  std::size_t feature_position(const std::string& field) const {
    auto it = std::find(features.begin(), features.end(), field);
    if (it == features.end()) throw SchemaError("feature not in vocabulary: " + field);
    return static_cast<std::size_t>(it - features.begin());
  }

  // Index of `token`, 0 when unknown.
  int lookup(std::size_t feature, const std::string& token) const {
    auto it = index[feature].find(token);
    return it == index[feature].end() ? 0 : it->second;
  }

  const std::string& decode(std::size_t feature, int idx) const { return tokens[feature].at(static_cast<std::size_t>(idx)); }

  // Number of indices including the padding slot.
  int cardinality(std::size_t feature) const { return static_cast<int>(tokens[feature].size()); }
};

inline void to_json(nlohmann::json& j, const Vocabulary& v) {
  j = nlohmann::json::object();
  for (std::size_t f = 0; f < v.features.size(); ++f) {
    j[v.features[f]] = std::vector<std::string>(v.tokens[f].begin() + 1, v.tokens[f].end());
  }
}

inline Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  Vocabulary v;
  for (const auto& [field, list] : j.items()) {
    v.features.push_back(field);
    std::vector<std::string> toks{""};
    std::map<std::string, int> idx;
    for (const auto& t : list) {
      idx[t.get<std::string>()] = static_cast<int>(toks.size());
      toks.push_back(t.get<std::string>());
    }
    v.index.push_back(std::move(idx));
    v.tokens.push_back(std::move(toks));
  }
  return v;
}

// Indexes tokens by descending frequency, ties lexicographic. Dynamic fields
// count event occurrences; static fields count cases.
inline Vocabulary build_vocab(const EventLog& log, const std::vector<std::string>& categorical_features) {
  if (log.cases.empty()) throw EmptyLogError("cannot build a vocabulary from an empty log");
  Vocabulary vocab;
  for (const auto& field : categorical_features) {
    const FieldInfo& info = field_info(field);
    if (!info.categorical) throw SchemaError("not a categorical field: " + field);
    std::map<std::string, std::size_t> freq;
    for (const auto& c : log.cases) {
      if (info.dynamic) {
        for (const auto& e : c.events) ++freq[categorical_value(c, e, field)];
      } else if (!c.events.empty()) {
        ++freq[categorical_value(c, c.events.front(), field)];
      }
    }
    std::vector<std::pair<std::string, std::size_t>> order(freq.begin(), freq.end());
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::map<std::string, int> idx;
    std::vector<std::string> toks{""};
    for (const auto& [token, count] : order) {
      idx[token] = static_cast<int>(toks.size());
      toks.push_back(token);
    }
    vocab.features.push_back(field);
    vocab.index.push_back(std::move(idx));
    vocab.tokens.push_back(std::move(toks));
  }
  return vocab;
}

struct EncodeOptions {
  std::vector<std::string> dynamic_features = {"activity",      "department", "activity_code",
                                               "producer_code", "section",    "num_executions"};
  std::vector<std::string> static_features = {"age", "years", "treatment_code", "combination_id"};
  // Cases whose numeric ranges define the scaling; whole log when empty.
  std::vector<std::size_t> train_cases;
  // Fixed label order; derived (sorted) from the log when empty.
  std::vector<std::string> label_names;
};

struct SequenceDataset {
  std::size_t M = 0, T = 0, F = 0;
  std::vector<double> X;          // M*T*F, row-major
  std::vector<std::uint8_t> mask;  // M*T, true entries form a prefix
  Labels Y;
  std::vector<std::string> label_names;
  std::vector<std::string> feature_names;  // F display names
  std::vector<std::string> fields;         // F logical names
  std::vector<bool> categorical;           // per feature
  std::vector<int> cardinality;            // vocab size incl. padding; 0 for numeric
  std::vector<std::size_t> static_features;  // feature positions replicated per step
  std::vector<std::string> case_ids;
  std::size_t unknown_tokens = 0;

  double& at(std::size_t m, std::size_t t, std::size_t f) { return X[(m * T + t) * F + f]; }
  double at(std::size_t m, std::size_t t, std::size_t f) const { return X[(m * T + t) * F + f]; }
  const double* step(std::size_t m, std::size_t t) const { return &X[(m * T + t) * F]; }
  bool real(std::size_t m, std::size_t t) const { return mask[m * T + t] != 0; }

  std::size_t length(std::size_t m) const {
    std::size_t n = 0;
    while (n < T && real(m, n)) ++n;
    return n;
  }

  // Copy restricted to the given cases, in order.
  SequenceDataset subset(const std::vector<std::size_t>& rows) const {
    SequenceDataset out = *this;
    out.M = rows.size();
    out.X.assign(out.M * T * F, 0.0);
    out.mask.assign(out.M * T, 0);
    out.Y.clear();
    out.case_ids.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(&X[rows[i] * T * F], T * F, &out.X[i * T * F]);
      std::copy_n(&mask[rows[i] * T], T, &out.mask[i * T]);
      out.Y.push_back(Y[rows[i]]);
      out.case_ids.push_back(case_ids[rows[i]]);
    }
    return out;
  }

  // Same cases re-padded to a longer (or equal) window.
  SequenceDataset with_window(std::size_t new_t) const {
    if (new_t < T) throw ShapeError("with_window cannot shrink the window");
    SequenceDataset out = *this;
    out.T = new_t;
    out.X.assign(M * new_t * F, 0.0);
    out.mask.assign(M * new_t, 0);
    for (std::size_t m = 0; m < M; ++m) {
      std::copy_n(&X[m * T * F], T * F, &out.X[m * new_t * F]);
      std::copy_n(&mask[m * T], T, &out.mask[m * new_t]);
    }
    return out;
  }
};

struct FlatDataset {
  Matrix X;
  Labels Y;
  std::vector<std::string> feature_names;
  std::vector<bool> categorical;
  std::vector<std::string> label_names;
  std::vector<std::string> case_ids;
  std::size_t window = 0;
  std::size_t dynamic_count = 0;  // F_dyn
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

struct Range {
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  void add(double v) {
    if (!seen) {
      lo = hi = v;
      seen = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  // Zero-range features scale to 0.
  double scale(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
};

}  // namespace detail

// Encodes each case into a T x F block: dynamic features from the first T
// events, static features replicated on every real step, zero padding with
// mask=false beyond the case length.
inline SequenceDataset encode_sequences(const EventLog& log, const Vocabulary& vocab, std::size_t window,
                                        const EncodeOptions& opts = {}) {
  if (window < 1) throw DomainError("window length must be >= 1");
  SequenceDataset ds;
  ds.M = log.cases.size();
  ds.T = window;

  struct Column {
    FieldInfo info;
    std::size_t vocab_pos = 0;
  };
  std::vector<Column> columns;
  for (const auto& f : opts.dynamic_features) {
    const FieldInfo& info = field_info(f);
    if (!info.dynamic) throw SchemaError("not a dynamic field: " + f);
    columns.push_back({info, info.categorical ? vocab.feature_position(f) : 0});
  }
  for (const auto& f : opts.static_features) {
    const FieldInfo& info = field_info(f);
    if (info.dynamic) throw SchemaError("not a static field: " + f);
    ds.static_features.push_back(columns.size());
    columns.push_back({info, info.categorical ? vocab.feature_position(f) : 0});
  }
  ds.F = columns.size();
  for (const auto& col : columns) {
    ds.feature_names.push_back(col.info.display);
    ds.fields.push_back(col.info.field);
    ds.categorical.push_back(col.info.categorical);
    ds.cardinality.push_back(col.info.categorical ? vocab.cardinality(col.vocab_pos) : 0);
  }

  ds.label_names = opts.label_names;
  if (ds.label_names.empty()) {
    std::set<std::string> labels;
    for (const auto& c : log.cases) {
      if (!c.diagnosis_code) throw DomainError("case " + c.case_id + " has no label; clean the log first");
      labels.insert(*c.diagnosis_code);
    }
    ds.label_names.assign(labels.begin(), labels.end());
  }

  std::vector<detail::Range> ranges(ds.F);
  std::vector<std::size_t> stat_cases = opts.train_cases;
  if (stat_cases.empty()) {
    for (std::size_t i = 0; i < log.cases.size(); ++i) stat_cases.push_back(i);
  }
  for (auto ci : stat_cases) {
    const Case& c = log.cases.at(ci);
    const std::size_t n = std::min(window, c.events.size());
    for (std::size_t f = 0; f < ds.F; ++f) {
      if (columns[f].info.categorical) continue;
      if (columns[f].info.dynamic) {
        for (std::size_t t = 0; t < n; ++t) ranges[f].add(numeric_value(c, c.events[t], columns[f].info.field));
      } else if (n > 0) {
        ranges[f].add(numeric_value(c, c.events[0], columns[f].info.field));
      }
    }
  }

  ds.X.assign(ds.M * ds.T * ds.F, 0.0);
  ds.mask.assign(ds.M * ds.T, 0);
  for (std::size_t m = 0; m < ds.M; ++m) {
    const Case& c = log.cases[m];
    ds.case_ids.push_back(c.case_id);
    if (c.diagnosis_code) {
      auto it = std::find(ds.label_names.begin(), ds.label_names.end(), *c.diagnosis_code);
      if (it == ds.label_names.end()) throw DomainError("label not in label set: " + *c.diagnosis_code);
      ds.Y.push_back(static_cast<int>(it - ds.label_names.begin()));
    } else {
      throw DomainError("case " + c.case_id + " has no label; clean the log first");
    }
    const std::size_t n = std::min(window, c.events.size());
    for (std::size_t t = 0; t < n; ++t) {
      ds.mask[m * ds.T + t] = 1;
      const Event& e = c.events[t];
      for (std::size_t f = 0; f < ds.F; ++f) {
        const auto& col = columns[f];
        double value;
        if (col.info.categorical) {
          const int idx = vocab.lookup(col.vocab_pos, categorical_value(c, e, col.info.field));
          if (idx == 0) ++ds.unknown_tokens;
          value = idx;
        } else {
          value = ranges[f].scale(numeric_value(c, e, col.info.field));
          // Counts cannot go below the observed minimum.
          if (col.info.field == "num_executions") value = std::max(0.0, value);
        }
        ds.at(m, t, f) = value;
      }
    }
  }
  return ds;
}

// Row m = dynamic features of steps 0..T-1 concatenated step-major, then the
// static features once.
inline FlatDataset flatten(const SequenceDataset& ds) {
  FlatDataset flat;
  flat.window = ds.T;
  std::vector<std::size_t> dyn;
  for (std::size_t f = 0; f < ds.F; ++f) {
    if (std::find(ds.static_features.begin(), ds.static_features.end(), f) == ds.static_features.end()) dyn.push_back(f);
  }
  flat.dynamic_count = dyn.size();
  for (std::size_t t = 0; t < ds.T; ++t) {
    for (auto f : dyn) {
      flat.feature_names.push_back(ds.feature_names[f] + "_" + std::to_string(t));
      flat.categorical.push_back(ds.categorical[f]);
    }
  }
  for (auto f : ds.static_features) {
    flat.feature_names.push_back(ds.feature_names[f]);
    flat.categorical.push_back(ds.categorical[f]);
  }
  const auto cols = static_cast<Eigen::Index>(flat.feature_names.size());
  flat.X = Matrix::Zero(static_cast<Eigen::Index>(ds.M), cols);
  for (std::size_t m = 0; m < ds.M; ++m) {
    Eigen::Index col = 0;
    for (std::size_t t = 0; t < ds.T; ++t) {
      for (auto f : dyn) flat.X(static_cast<Eigen::Index>(m), col++) = ds.at(m, t, f);
    }
    for (auto f : ds.static_features) flat.X(static_cast<Eigen::Index>(m), col++) = ds.length(m) > 0 ? ds.at(m, 0, f) : 0.0;
  }
  flat.Y = ds.Y;
  flat.label_names = ds.label_names;
  flat.case_ids = ds.case_ids;
  return flat;
}

inline FlatDataset encode_flat(const EventLog& log, const Vocabulary& vocab, std::size_t window,
                               const EncodeOptions& opts = {}) {
  return flatten(encode_sequences(log, vocab, window, opts));
}

// Per-class shuffle; each class contributes round(fraction * n_c) test cases,
// at least 1 and at most n_c - 1. Index lists are returned ascending.
inline Split stratified_split(const Labels& y, double test_fraction, std::uint64_t seed,
                              const std::vector<std::string>& label_names = {}) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DomainError("test fraction must be in (0, 1)");
  const int classes = count_classes(y);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < y.size(); ++i) members[static_cast<std::size_t>(y[i])].push_back(i);
  for (int c = 0; c < classes; ++c) {
    if (members[static_cast<std::size_t>(c)].size() == 1) {
      const std::string name = static_cast<std::size_t>(c) < label_names.size() ? label_names[static_cast<std::size_t>(c)] : std::to_string(c);
      throw DomainError("class '" + name + "' has a single member; cannot stratify");
    }
  }
  Rng rng(seed);
  Split split;
  for (auto& group : members) {
    if (group.empty()) continue;
    rng.shuffle(group);
    const auto n = group.size();
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    split.test.insert(split.test.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), group.begin() + static_cast<std::ptrdiff_t>(n_test), group.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// Stratified k folds over the given rows: fold i's test set takes every k-th
// member of each shuffled class.
inline std::vector<Split> stratified_kfold(const Labels& y, const std::vector<std::size_t>& rows, int k,
                                           std::uint64_t seed) {
  if (k < 2) throw DomainError("k-fold needs k >= 2");
  const int classes = count_classes(y);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(classes));
  for (auto r : rows) members[static_cast<std::size_t>(y[r])].push_back(r);
  Rng rng(seed);
  std::vector<Split> folds(static_cast<std::size_t>(k));
  std::size_t offset = 0;
  for (auto& group : members) {
    rng.shuffle(group);
    for (std::size_t i = 0; i < group.size(); ++i) {
      const auto fold = (i + offset) % static_cast<std::size_t>(k);
      for (std::size_t f = 0; f < folds.size(); ++f) {
        (f == fold ? folds[f].test : folds[f].train).push_back(group[i]);
      }
    }
    offset += group.size();
  }
  for (auto& f : folds) {
    std::sort(f.train.begin(), f.train.end());
    std::sort(f.test.begin(), f.test.end());
  }
  return folds;
}

// --- persistence -----------------------------------------------------------

inline Container to_container(const SequenceDataset& ds) {
  Container c;
  Tensor x{{ds.M, ds.T, ds.F}, ds.X};
  Tensor mask{{ds.M, ds.T}, std::vector<double>(ds.mask.begin(), ds.mask.end())};
  Tensor y{{ds.M}, std::vector<double>(ds.Y.begin(), ds.Y.end())};
  c.tensors["X"] = std::move(x);
  c.tensors["mask"] = std::move(mask);
  c.tensors["Y"] = std::move(y);
  c.meta = {{"kind", "sequence"},
            {"label_names", ds.label_names},
            {"feature_names", ds.feature_names},
            {"fields", ds.fields},
            {"categorical", ds.categorical},
            {"cardinality", ds.cardinality},
            {"static_features", ds.static_features},
            {"case_ids", ds.case_ids},
            {"unknown_tokens", ds.unknown_tokens}};
  return c;
}

inline SequenceDataset sequence_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "sequence") throw FormatError("XLG1: not a sequence dataset");
  SequenceDataset ds;
  const Tensor& x = c.at("X");
  if (x.shape.size() != 3) throw FormatError("XLG1: X must be rank 3");
  ds.M = x.shape[0];
  ds.T = x.shape[1];
  ds.F = x.shape[2];
  ds.X = x.data;
  for (double v : c.at("mask").data) ds.mask.push_back(v != 0.0 ? 1 : 0);
  for (double v : c.at("Y").data) ds.Y.push_back(static_cast<int>(v));
  ds.label_names = c.meta.at("label_names").get<std::vector<std::string>>();
  ds.feature_names = c.meta.at("feature_names").get<std::vector<std::string>>();
  ds.fields = c.meta.at("fields").get<std::vector<std::string>>();
  ds.categorical = c.meta.at("categorical").get<std::vector<bool>>();
  ds.cardinality = c.meta.at("cardinality").get<std::vector<int>>();
  ds.static_features = c.meta.at("static_features").get<std::vector<std::size_t>>();
  ds.case_ids = c.meta.at("case_ids").get<std::vector<std::string>>();
  ds.unknown_tokens = c.meta.value("unknown_tokens", std::size_t{0});
  return ds;
}

inline Container to_container(const FlatDataset& ds) {
  Container c;
  c.tensors["X"] = to_tensor(ds.X);
  c.tensors["Y"] = Tensor{{ds.Y.size()}, std::vector<double>(ds.Y.begin(), ds.Y.end())};
  c.meta = {{"kind", "flat"},
            {"label_names", ds.label_names},
            {"feature_names", ds.feature_names},
            {"categorical", ds.categorical},
            {"case_ids", ds.case_ids},
            {"window", ds.window},
            {"dynamic_count", ds.dynamic_count}};
  return c;
}

inline FlatDataset flat_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "flat") throw FormatError("XLG1: not a flat dataset");
  FlatDataset ds;
  ds.X = to_matrix(c.at("X"));
  for (double v : c.at("Y").data) ds.Y.push_back(static_cast<int>(v));
  ds.label_names = c.meta.at("label_names").get<std::vector<std::string>>();
  ds.feature_names = c.meta.at("feature_names").get<std::vector<std::string>>();
  ds.categorical = c.meta.at("categorical").get<std::vector<bool>>();
  ds.case_ids = c.meta.at("case_ids").get<std::vector<std::string>>();
  ds.window = c.meta.value("window", std::size_t{0});
  ds.dynamic_count = c.meta.value("dynamic_count", std::size_t{0});
  return ds;
}

}  // namespace xlog
