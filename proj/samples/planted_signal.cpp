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

// Library walkthrough: synthesize a log with an age rule, train a forest on
// the flattened encoding, then explain one case of the rule class.

#include <cmath>
#include <iostream>

#include "xlog/xlog.hpp"

int main() {
  using namespace xlog;
  SyntheticSpec spec;
  spec.motif_length = 2;
  const auto synth = generate_synthetic(spec, 1);

  EncodeOptions eo;
  const auto vocab = build_vocab(synth.log, {"activity", "department", "activity_code", "producer_code", "section",
                                             "treatment_code", "combination_id"});
  const auto all = encode_sequences(synth.log, vocab, spec.trace_length, eo);
  const auto split = stratified_split(all.Y, 0.2, 1, all.label_names);
  eo.train_cases = split.train;
  const auto flat = flatten(encode_sequences(synth.log, vocab, spec.trace_length, eo));

  const Matrix x_train = take_rows(flat.X, split.train);
  ForestParams params;
  params.max_features = static_cast<int>(std::lround(std::sqrt(static_cast<double>(flat.X.cols()))));
  params.seed = 1;
  const auto forest = fit_forest(x_train, take(flat.Y, split.train), params, flat.feature_names, flat.label_names);
  const double acc = accuracy(take(flat.Y, split.test), predict(forest, take_rows(flat.X, split.test)));
  std::cout << "forest test accuracy: " << format_fixed(acc, 3) << "\n";

  const auto importance = gini_importance(forest);
  std::cout << "most important columns:";
  for (auto col : importance.top(3)) std::cout << " " << flat.feature_names[col];
  std::cout << "\n";

  const int rule_class = static_cast<int>(
      std::find(flat.label_names.begin(), flat.label_names.end(), spec.age_rule->label) - flat.label_names.begin());
  const auto row = static_cast<Eigen::Index>(
      std::find(flat.Y.begin(), flat.Y.end(), rule_class) - flat.Y.begin());
  LimeOptions lime;
  lime.target_class = rule_class;
  lime.seed = 7;
  const Predictor black_box = [&](const Matrix& x) { return predict_proba(forest, x); };
  const FeatureInfoView info{flat.feature_names, flat.categorical, {}};
  auto e = lime_explain(black_box, flat.X.row(row).transpose(), x_train, info, lime, flat.case_ids[static_cast<std::size_t>(row)]);
  e.class_name = spec.age_rule->label;

  std::cout << "why " << e.instance << " is class " << e.class_name << " (fidelity " << format_fixed(e.fidelity, 3) << "):\n";
  for (auto col : e.ranked(5)) {
    const auto i = static_cast<std::size_t>(std::find(e.features.begin(), e.features.end(), col) - e.features.begin());
    std::cout << "  " << e.labels[i] << "  " << format_fixed(e.weights[i], 4) << "\n";
  }
  return 0;
}
