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

#include "xlog/synth.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "xlog/encode.hpp"
#include "xlog/forest.hpp"
#include "xlog/seqnet.hpp"

namespace xlog {
namespace {

TEST(Synthetic, PlantsMotifAtPosition) {
  SyntheticSpec spec;
  const auto s = generate_synthetic(spec, 3);
  ASSERT_EQ(s.log.cases.size(), 150U);
  for (const auto& c : s.log.cases) {
    ASSERT_EQ(c.events.size(), spec.trace_length);
    const auto cls = static_cast<std::size_t>(
        std::find(spec.class_names.begin(), spec.class_names.end(), *c.diagnosis_code) - spec.class_names.begin());
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(c.events[spec.motif_position + k].activity, "motif_" + std::to_string(cls) + "_" + std::to_string(k));
    }
    for (std::size_t t = 0; t < spec.trace_length; ++t) {
      if (t < spec.motif_position || t >= spec.motif_position + 3) {
        EXPECT_EQ(c.events[t].activity.rfind("noise_", 0), 0U);
      }
    }
  }
  for (const auto& name : spec.class_names) EXPECT_EQ(s.log.class_counts.at(name), 50U);
}

TEST(Synthetic, AgeRuleSeparatesTheRuleClass) {
  const auto s = generate_synthetic(SyntheticSpec{}, 5);
  for (const auto& c : s.log.cases) {
    if (*c.diagnosis_code == "106") {
      EXPECT_GT(c.age, 70);
    } else {
      EXPECT_LE(c.age, 70);
      EXPECT_GE(c.age, 20);
    }
  }
  EXPECT_EQ(s.manifest["age_rule"]["label"], "106");
}

TEST(Synthetic, OrderOnlyClassesShareTokenMultisets) {
  const auto spec = order_only_spec();
  const auto s = generate_synthetic(spec, 2);
  std::multiset<std::string> motif[2];
  for (const auto& c : s.log.cases) {
    const int cls = *c.diagnosis_code == "early" ? 0 : 1;
    std::vector<std::string> window;
    for (std::size_t k = 0; k < 3; ++k) window.push_back(c.events[spec.motif_position + k].activity);
    motif[cls] = std::multiset<std::string>(window.begin(), window.end());
    EXPECT_EQ(window.front(), cls == 0 ? "step_a" : "step_c");
  }
  EXPECT_EQ(motif[0], motif[1]);
}

TEST(Synthetic, DeterministicUnderSeed) {
  const auto a = log_to_csv(generate_synthetic(SyntheticSpec{}, 9).log);
  EXPECT_EQ(a, log_to_csv(generate_synthetic(SyntheticSpec{}, 9).log));
  EXPECT_NE(a, log_to_csv(generate_synthetic(SyntheticSpec{}, 10).log));
}

TEST(Synthetic, RejectsInvalidSpecs) {
  SyntheticSpec long_motif;
  long_motif.motif_position = 6;
  EXPECT_THROW(generate_synthetic(long_motif, 0), DomainError);
  SyntheticSpec few;
  few.cases_per_class = 3;
  EXPECT_THROW(generate_synthetic(few, 0), DomainError);
  SyntheticSpec dup;
  dup.motifs = {{"a", "b"}, {"a", "b"}, {"c"}};
  EXPECT_THROW(generate_synthetic(dup, 0), DomainError);
  SyntheticSpec rule;
  rule.age_rule = AgeRule{"nope", 70};
  EXPECT_THROW(generate_synthetic(rule, 0), DomainError);
}

TEST(Synthetic, CsvRoundTripsThroughIngest) {
  const auto s = generate_synthetic(SyntheticSpec{}, 4);
  std::istringstream in(log_to_csv(s.log));
  const auto parsed = parse_log(in, Schema::hospital_log());
  ASSERT_EQ(parsed.cases.size(), s.log.cases.size());
  EXPECT_EQ(parsed.unparseable_rows, 0U);
  for (std::size_t i = 0; i < parsed.cases.size(); ++i) {
    EXPECT_EQ(parsed.cases[i].case_id, s.log.cases[i].case_id);
    EXPECT_EQ(parsed.cases[i].age, s.log.cases[i].age);
    EXPECT_DOUBLE_EQ(parsed.cases[i].years_in_treatment, s.log.cases[i].years_in_treatment);
    for (std::size_t t = 0; t < parsed.cases[i].events.size(); ++t) {
      EXPECT_EQ(parsed.cases[i].events[t].timestamp, s.log.cases[i].events[t].timestamp);
      EXPECT_EQ(parsed.cases[i].events[t].activity, s.log.cases[i].events[t].activity);
    }
  }
  const auto [clean, report] = clean_log(parsed, 30);
  EXPECT_EQ(report.imputed_labels, 0U);
  EXPECT_EQ(report.kept_classes, (std::set<std::string>{"106", "M13", "M16"}));
}

TEST(Synthetic, ThreeTokenMotifsAreLearnable) {
  const SyntheticSpec spec;
  ASSERT_EQ(spec.motif_length, 3U);
  const auto s = generate_synthetic(spec, 11);
  EncodeOptions eo;
  const auto vocab = build_vocab(s.log, {"activity", "department", "activity_code", "producer_code", "section",
                                         "treatment_code", "combination_id"});
  const auto probe = encode_sequences(s.log, vocab, spec.trace_length, eo);
  const auto split = stratified_split(probe.Y, 0.2, 11, probe.label_names);
  eo.train_cases = split.train;
  const auto seq = encode_sequences(s.log, vocab, spec.trace_length, eo);
  const auto flat = flatten(seq);

  ForestParams fp;
  fp.max_features = static_cast<int>(std::lround(std::sqrt(static_cast<double>(flat.X.cols()))));
  fp.seed = 11;
  const auto forest = fit_forest(take_rows(flat.X, split.train), take(flat.Y, split.train), fp, flat.feature_names,
                                 flat.label_names);
  EXPECT_GE(accuracy(take(flat.Y, split.test), predict(forest, take_rows(flat.X, split.test))), 0.9);

  SeqNetConfig sc;
  sc.arch = Arch::kLstm;
  sc.nodes = 16;
  sc.epochs = 100;
  sc.seed = 11;
  const auto tr = seq.subset(split.train), te = seq.subset(split.test);
  auto net = make_seqnet(tr, sc);
  train(net, tr, nullptr);
  EXPECT_GE(evaluate(net, te).accuracy, 0.9);
}

TEST(Synthetic, SpecJsonRoundTrip) {
  SyntheticSpec s;
  s.cases_per_class = 12;
  s.age_rule = AgeRule{"M13", 65};
  const auto back = synthetic_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  const auto oo = synthetic_spec_from_json({{"order_only", true}});
  EXPECT_TRUE(oo.order_only);
  EXPECT_FALSE(oo.age_rule.has_value());
  EXPECT_THROW(synthetic_spec_from_json({{"class_names", 3}}), SchemaError);
}

TEST(Timestamp, FormatInvertsParse) {
  for (std::int64_t t : {0LL, 86399LL, 1104753600LL, 951782400LL + 3600 * 13 + 61}) {
    EXPECT_EQ(parse_timestamp(format_timestamp(t)), t) << format_timestamp(t);
  }
  EXPECT_EQ(format_timestamp(951782400), "2000-02-29T00:00:00");
}

TEST(Blobs, ShapesAndOutlier) {
  const auto a = blob_activations(BlobSpec{}, 1);
  EXPECT_EQ(a.values.rows(), 121);
  EXPECT_EQ(a.values.cols(), 20);
  EXPECT_EQ(a.case_ids.back(), "outlier");
  EXPECT_EQ(a.true_labels.back(), 0);
  // The outlier sits closer to the class-1 rows than to the class-0 rows.
  Vector mean0 = Vector::Zero(20), mean1 = Vector::Zero(20);
  for (Eigen::Index i = 0; i + 1 < a.values.rows(); ++i) {
    if (a.true_labels[static_cast<std::size_t>(i)] == 0) mean0 += a.values.row(i).transpose() / 40.0;
    if (a.true_labels[static_cast<std::size_t>(i)] == 1) mean1 += a.values.row(i).transpose() / 40.0;
  }
  const Vector out = a.values.row(120).transpose();
  EXPECT_LT((out - mean1).norm(), (out - mean0).norm());
}

TEST(TwoFactor, HasRankTwo) {
  const Matrix x = two_factor_matrix(30, 7, 2);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  const auto sv = svd.singularValues();
  EXPECT_GT(sv(1), 1e-6);
  EXPECT_LT(sv(2), 1e-12 * sv(0));
}

}  // namespace
}  // namespace xlog
