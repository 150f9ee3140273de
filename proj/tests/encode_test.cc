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

#include "xlog/encode.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "support/fixtures.hpp"

namespace xlog {
namespace {

// Builds a log from activity strings, one case per string, one event per
// character.
EventLog LogFromStrings(const std::vector<std::string>& traces, const std::vector<std::string>& labels = {}) {
  EventLog log;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Case c;
    c.case_id = "c" + std::to_string(i);
    c.diagnosis_code = labels.empty() ? "L" : labels[i];
    c.age = 20 + static_cast<int>(i);
    c.treatment_code = "T";
    std::int64_t ts = 0;
    for (char a : traces[i]) {
      Event e;
      e.activity = std::string(1, a);
      e.department = "d";
      e.timestamp = ts;
      ts += 86400;
      c.events.push_back(e);
    }
    derive_years(c);
    log.cases.push_back(c);
  }
  log.recount();
  return log;
}

EncodeOptions ActivityOnly() {
  EncodeOptions o;
  o.dynamic_features = {"activity"};
  o.static_features = {};
  return o;
}

TEST(BuildVocab, FrequencyOrder) {
  const auto v = build_vocab(LogFromStrings({"AAAAB", "B"}), {"activity"});
  EXPECT_EQ(v.lookup(0, "A"), 1);
  EXPECT_EQ(v.lookup(0, "B"), 2);
  EXPECT_EQ(v.lookup(0, "missing"), 0);
}

TEST(BuildVocab, TiesAreLexicographic) {
  const auto v = build_vocab(LogFromStrings({"BBB", "AAA"}), {"activity"});
  EXPECT_EQ(v.lookup(0, "A"), 1);
  EXPECT_EQ(v.lookup(0, "B"), 2);
}

TEST(BuildVocab, EmptyFeatureList) {
  const auto v = build_vocab(LogFromStrings({"A"}), {});
  EXPECT_TRUE(v.features.empty());
}

TEST(BuildVocab, IndexZeroNeverAssigned) {
  const auto v = build_vocab(LogFromStrings({"ABCDE", "EDX"}), {"activity", "department"});
  for (std::size_t f = 0; f < v.features.size(); ++f) {
    std::set<int> seen;
    for (const auto& [token, idx] : v.index[f]) {
      EXPECT_GT(idx, 0);
      EXPECT_TRUE(seen.insert(idx).second);
    }
  }
}

TEST(EncodeSequences, PadsShortCases) {
  const auto log = LogFromStrings({"AB"});
  const auto ds = encode_sequences(log, build_vocab(log, {"activity"}), 4, ActivityOnly());
  EXPECT_EQ(ds.T, 4u);
  EXPECT_EQ(std::vector<std::uint8_t>(ds.mask.begin(), ds.mask.end()), (std::vector<std::uint8_t>{1, 1, 0, 0}));
  EXPECT_EQ(ds.at(0, 2, 0), 0.0);
  EXPECT_EQ(ds.at(0, 3, 0), 0.0);
  EXPECT_EQ(ds.length(0), 2u);
}

TEST(EncodeSequences, KeepsFirstEventsWhenTruncating) {
  std::string trace(300, 'B');
  trace[0] = 'A';
  trace[63] = 'C';
  const auto log = LogFromStrings({trace});
  const auto vocab = build_vocab(log, {"activity"});
  const auto ds = encode_sequences(log, vocab, 64, ActivityOnly());
  EXPECT_EQ(ds.length(0), 64u);
  EXPECT_EQ(vocab.decode(0, static_cast<int>(ds.at(0, 0, 0))), "A");
  EXPECT_EQ(vocab.decode(0, static_cast<int>(ds.at(0, 63, 0))), "C");
}

TEST(EncodeSequences, ConstantNumericScalesToZero) {
  const auto log = LogFromStrings({"AB", "A"});
  EncodeOptions o;
  o.dynamic_features = {"num_executions"};
  o.static_features = {"age"};
  const auto ds = encode_sequences(log, build_vocab(log, {}), 3, o);
  EXPECT_EQ(ds.at(0, 0, 0), 0.0);
  EXPECT_EQ(ds.at(1, 0, 0), 0.0);
  // Age 20 and 21: min-max to 0 and 1, replicated per real step.
  EXPECT_EQ(ds.at(0, 0, 1), 0.0);
  EXPECT_EQ(ds.at(0, 1, 1), 0.0);
  EXPECT_EQ(ds.at(1, 0, 1), 1.0);
  EXPECT_EQ(ds.at(1, 1, 1), 0.0);  // padding
}

TEST(EncodeSequences, TrainSplitStatisticsDefineScaling) {
  auto log = LogFromStrings({"A", "A", "A"});
  log.cases[0].age = 10;
  log.cases[1].age = 20;
  log.cases[2].age = 40;
  EncodeOptions o = ActivityOnly();
  o.static_features = {"age"};
  o.train_cases = {0, 1};
  const auto ds = encode_sequences(log, build_vocab(log, {"activity"}), 1, o);
  EXPECT_EQ(ds.at(0, 0, 1), 0.0);
  EXPECT_EQ(ds.at(1, 0, 1), 1.0);
  EXPECT_EQ(ds.at(2, 0, 1), 3.0);  // test values may exceed 1
}

TEST(EncodeSequences, UnknownTokensMapToZeroAndAreCounted) {
  const auto train = LogFromStrings({"AB"});
  const auto vocab = build_vocab(train, {"activity"});
  const auto ds = encode_sequences(LogFromStrings({"AZ"}), vocab, 2, ActivityOnly());
  EXPECT_EQ(ds.at(0, 1, 0), 0.0);
  EXPECT_EQ(ds.unknown_tokens, 1u);
  EXPECT_EQ(ds.mask[1], 1);
}

TEST(EncodeSequences, MaskIsPrefixAndLabelsIndexNames) {
  const auto log = LogFromStrings({"ABC", "A", "ABCDEFG"}, {"x", "y", "x"});
  const auto ds = encode_sequences(log, build_vocab(log, {"activity"}), 5, ActivityOnly());
  for (std::size_t m = 0; m < ds.M; ++m) {
    const auto len = ds.length(m);
    for (std::size_t t = 0; t < ds.T; ++t) EXPECT_EQ(ds.real(m, t), t < len);
    EXPECT_LT(static_cast<std::size_t>(ds.Y[m]), ds.label_names.size());
  }
  EXPECT_EQ(ds.label_names, (std::vector<std::string>{"x", "y"}));
}

TEST(EncodeSequences, VocabularyRoundTrip) {
  const std::vector<std::string> traces = {"ABCAB", "CCA", "BAAAAAAA"};
  const auto log = LogFromStrings(traces);
  const auto vocab = build_vocab(log, {"activity"});
  const auto ds = encode_sequences(log, vocab, 6, ActivityOnly());
  for (std::size_t m = 0; m < ds.M; ++m) {
    std::string decoded;
    for (std::size_t t = 0; t < ds.length(m); ++t) decoded += vocab.decode(0, static_cast<int>(ds.at(m, t, 0)));
    EXPECT_EQ(decoded, traces[m].substr(0, 6));
  }
}

TEST(EncodeFlat, PositionalColumns) {
  const auto log = LogFromStrings({"AB", "AAB"});
  const auto vocab = build_vocab(log, {"activity"});
  EncodeOptions o = ActivityOnly();
  o.static_features = {"age"};
  const auto flat = encode_flat(log, vocab, 3, o);
  EXPECT_EQ(flat.feature_names,
            (std::vector<std::string>{"Activity Coded_0", "Activity Coded_1", "Activity Coded_2", "Age"}));
  EXPECT_EQ(flat.X(0, 0), vocab.lookup(0, "A"));
  EXPECT_EQ(flat.X(0, 1), vocab.lookup(0, "B"));
  EXPECT_EQ(flat.X(0, 2), 0.0);
  EXPECT_EQ(flat.X(0, 3), 0.0);
  EXPECT_EQ(flat.X(1, 3), 1.0);
}

TEST(EncodeFlat, WindowOneHasFDynamicColumnsPlusStatics) {
  const auto log = LogFromStrings({"AB"});
  const auto flat = encode_flat(log, build_vocab(log, {"activity", "department", "treatment_code"}), 1,
                                [] {
                                  EncodeOptions o;
                                  o.dynamic_features = {"activity", "department", "num_executions"};
                                  o.static_features = {"age", "treatment_code"};
                                  return o;
                                }());
  EXPECT_EQ(flat.X.cols(), 5);
  EXPECT_EQ(flat.dynamic_count, 3u);
}

TEST(EncodeFlat, MatchesFlattenedSequences) {
  const auto log = testing::parse_text(testing::hospital_fixture_csv(), testing::fixture_schema());
  const auto clean = clean_log(log, 30).first;
  const auto vocab = build_vocab(clean, {"activity", "department", "treatment_code"});
  EncodeOptions o;
  o.dynamic_features = {"activity", "department", "num_executions"};
  o.static_features = {"age", "years", "treatment_code"};
  const auto seq = encode_sequences(clean, vocab, 3, o);
  const auto flat = encode_flat(clean, vocab, 3, o);
  ASSERT_EQ(static_cast<std::size_t>(flat.X.rows()), seq.M);
  for (std::size_t m = 0; m < seq.M; ++m) {
    for (std::size_t t = 0; t < seq.T; ++t) {
      for (std::size_t f = 0; f < 3; ++f) {
        EXPECT_EQ(flat.X(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t * 3 + f)), seq.at(m, t, f));
      }
    }
  }
  const std::set<std::string> unique(flat.feature_names.begin(), flat.feature_names.end());
  EXPECT_EQ(unique.size(), flat.feature_names.size());
}

TEST(StratifiedSplit, SingleClass) {
  const auto s = stratified_split(Labels(10, 0), 0.2, 7);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.train.size(), 8u);
}

TEST(StratifiedSplit, OnePerClass) {
  const Labels y = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto s = stratified_split(y, 0.2, 3);
  ASSERT_EQ(s.test.size(), 2u);
  EXPECT_NE(y[s.test[0]], y[s.test[1]]);
}

TEST(StratifiedSplit, DeterministicDisjointCovering) {
  Rng rng(5);
  Labels y;
  for (int i = 0; i < 97; ++i) y.push_back(static_cast<int>(rng.below(4)));
  const auto a = stratified_split(y, 0.25, 11);
  const auto b = stratified_split(y, 0.25, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::vector<int> seen(y.size(), 0);
  for (auto i : a.train) ++seen[i];
  for (auto i : a.test) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
  for (int c = 0; c < 4; ++c) {
    const double n = static_cast<double>(std::count(y.begin(), y.end(), c));
    const double t = static_cast<double>(std::count_if(a.test.begin(), a.test.end(), [&](auto i) { return y[i] == c; }));
    EXPECT_LE(std::abs(t - 0.25 * n), 1.0);
  }
}

TEST(StratifiedSplit, SingletonClassNamesTheClass) {
  try {
    stratified_split({0, 0, 1}, 0.5, 1, {"common", "rare"});
    FAIL() << "expected an error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("rare"), std::string::npos);
  }
  EXPECT_THROW(stratified_split({0, 0}, 1.0, 1), DomainError);
}

TEST(StratifiedKFold, FoldsPartitionRows) {
  const Labels y = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto folds = stratified_kfold(y, rows, 3, 1);
  std::vector<int> seen(10, 0);
  for (const auto& f : folds) {
    for (auto i : f.test) ++seen[i];
    EXPECT_EQ(f.train.size() + f.test.size(), 10u);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Container, SequenceDatasetRoundTrip) {
  const auto log = LogFromStrings({"AB", "BCA"}, {"p", "q"});
  const auto ds = encode_sequences(log, build_vocab(log, {"activity"}), 4, ActivityOnly());
  std::stringstream buf;
  write_container(buf, to_container(ds));
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "XLG1");
  const auto back = sequence_from_container(read_container(buf));
  EXPECT_EQ(back.X, ds.X);
  EXPECT_EQ(back.mask, ds.mask);
  EXPECT_EQ(back.Y, ds.Y);
  EXPECT_EQ(back.label_names, ds.label_names);
  EXPECT_EQ(back.T, 4u);
}

TEST(Container, LittleEndianHeader) {
  Container c;
  c.tensors["a"] = Tensor{{2}, {1.0, -2.5}};
  std::stringstream buf;
  write_container(buf, c);
  const std::string b = buf.str();
  // magic, u32 count = 1, u16 name len = 1, 'a', u8 rank = 1, u64 dim = 2
  ASSERT_GE(b.size(), 4u + 4 + 2 + 1 + 1 + 8 + 16 + 4);
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 1);
  EXPECT_EQ(b[10], 'a');
  EXPECT_EQ(static_cast<unsigned char>(b[11]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 2);
  std::stringstream bad("XLG2");
  EXPECT_THROW(read_container(bad), FormatError);
}

}  // namespace
}  // namespace xlog
