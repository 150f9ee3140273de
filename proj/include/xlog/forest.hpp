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

// CART classification trees and a bagged random forest.
//
// Split quality is compared in exact integer arithmetic: minimising the
// weighted child gini is the same as maximising S_L/n_L + S_R/n_R with
// S = sum of squared class counts, so candidates compare by cross
// multiplication and ties resolve deterministically (lowest feature index,
// then lowest threshold).
//
// Categorical columns are split by threshold on their vocabulary index,
// i.e. treated as ordinal.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xlog/core.hpp"
#include "xlog/encode.hpp"

namespace xlog {

// 1 - sum p_c^2.
inline double gini(const std::vector<double>& histogram) {
  double total = 0.0;
  for (double c : histogram) total += c;
  if (histogram.empty() || total <= 0.0) throw DomainError("gini of an empty histogram");
  double sum_sq = 0.0;
  for (double c : histogram) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> histogram;  // class counts of the training rows reaching the node
  double samples = 0.0;
  double impurity = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // preorder, root first
  int n_classes = 0;

  const TreeNode& leaf_for(const double* row) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf()) {
      node = &nodes[static_cast<std::size_t>(row[node->feature] <= node->threshold ? node->left : node->right)];
    }
    return *node;
  }

  std::size_t depth() const {
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
      auto [idx, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const auto& n = nodes[static_cast<std::size_t>(idx)];
      if (!n.is_leaf()) {
        stack.emplace_back(n.left, d + 1);
        stack.emplace_back(n.right, d + 1);
      }
    }
    return best;
  }

  std::size_t split_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
  }
};

struct TreeParams {
  int max_features = std::numeric_limits<int>::max();
  int min_leaf = 1;
  int max_depth = std::numeric_limits<int>::max();
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
};

namespace detail {

using u128 = unsigned __int128;

// Candidate score S_L/n_L + S_R/n_R held as an exact fraction.
struct Score {
  u128 num = 0;
  u128 den = 1;
  bool operator>(const Score& o) const { return num * o.den > o.num * den; }
};

inline std::uint64_t sum_squares(const std::vector<std::uint64_t>& counts) {
  std::uint64_t s = 0;
  for (auto c : counts) s += c * c;
  return s;
}

// Best split of `rows` over `features` (ascending). Returns nullopt when no
// split has positive gain or satisfies min_leaf.
inline std::optional<SplitChoice> best_split(const Matrix& x, const Labels& y, int n_classes,
                                             const std::vector<std::size_t>& rows,
                                             const std::vector<int>& features, int min_leaf) {
  const std::uint64_t n = rows.size();
  std::vector<std::uint64_t> parent(static_cast<std::size_t>(n_classes), 0);
  for (auto r : rows) ++parent[static_cast<std::size_t>(y[r])];
  // Parent score S/n; a split must beat it strictly.
  Score best{sum_squares(parent), n};
  std::optional<SplitChoice> choice;
  std::vector<std::pair<double, int>> column(rows.size());
  std::vector<std::uint64_t> left(static_cast<std::size_t>(n_classes));
  for (int f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x(static_cast<Eigen::Index>(rows[i]), f), y[rows[i]]};
    std::sort(column.begin(), column.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::fill(left.begin(), left.end(), 0);
    std::uint64_t sl = 0;  // running sum of squares on the left
    std::uint64_t sr = sum_squares(parent);
    std::vector<std::uint64_t> right = parent;
    for (std::size_t i = 0; i + 1 < column.size(); ++i) {
      const auto k = static_cast<std::size_t>(column[i].second);
      sl += 2 * left[k] + 1;
      ++left[k];
      sr -= 2 * right[k] - 1;
      --right[k];
      if (!(column[i].first < column[i + 1].first)) continue;
      const std::uint64_t nl = i + 1;
      const std::uint64_t nr = n - nl;
      if (nl < static_cast<std::uint64_t>(min_leaf) || nr < static_cast<std::uint64_t>(min_leaf)) continue;
      const Score s{static_cast<u128>(sl) * nr + static_cast<u128>(sr) * nl, static_cast<u128>(nl) * nr};
      if (s > best) {
        best = s;
        choice = SplitChoice{f, 0.5 * (column[i].first + column[i + 1].first)};
      }
    }
  }
  return choice;
}

inline std::vector<double> to_histogram(const std::vector<std::uint64_t>& counts) {
  return std::vector<double>(counts.begin(), counts.end());
}

}  // namespace detail

// Grows a tree on `rows` (duplicates allowed, e.g. a bootstrap sample).
// Each node draws a fresh subset of max_features features from `rng`.
inline Tree fit_tree(const Matrix& x, const Labels& y, int n_classes, const TreeParams& params, Rng& rng,
                     std::vector<std::size_t> rows = {}) {
  if (x.rows() == 0) throw DomainError("fit_tree needs at least one row");
  if (params.max_features < 1) throw DomainError("max_features must be >= 1");
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  const int n_features = static_cast<int>(x.cols());
  const int draw = std::min(params.max_features, n_features);
  Tree tree;
  tree.n_classes = n_classes;
  std::vector<int> pool(static_cast<std::size_t>(n_features));

  struct Pending {
    std::vector<std::size_t> rows;
    int node;
    int depth;
  };
  tree.nodes.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({std::move(rows), 0, 0});
  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (auto r : job.rows) ++counts[static_cast<std::size_t>(y[r])];
    {
      TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
      node.histogram = detail::to_histogram(counts);
      node.samples = static_cast<double>(job.rows.size());
      node.impurity = gini(node.histogram);
    }
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    if (pure || job.rows.size() < 2 * static_cast<std::size_t>(params.min_leaf) || job.depth >= params.max_depth) continue;

    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < draw; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    std::vector<int> features(pool.begin(), pool.begin() + draw);
    std::sort(features.begin(), features.end());

    const auto split = detail::best_split(x, y, n_classes, job.rows, features, params.min_leaf);
    if (!split) continue;
    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : job.rows) {
      (x(static_cast<Eigen::Index>(r), split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    }
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int right = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    // Right pushed first so the left subtree is grown (and draws) first.
    stack.push_back({std::move(right_rows), right, job.depth + 1});
    stack.push_back({std::move(left_rows), left, job.depth + 1});
  }
  return tree;
}

struct ForestParams {
  int n_estimators = 100;
  int max_features = std::numeric_limits<int>::max();
  int min_leaf = 1;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ForestModel {
  std::vector<Tree> trees;
  int n_classes = 0;
  int n_features = 0;
  ForestParams params;  // max_features holds the effective (clamped) value
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  std::vector<std::vector<std::size_t>> oob_indices;
};

// Tree t uses its own stream seeded with seed + t for both the bootstrap
// sample and the per-node feature draws.
inline ForestModel fit_forest(const Matrix& x, const Labels& y, const ForestParams& params,
                              std::vector<std::string> feature_names = {},
                              std::vector<std::string> label_names = {}) {
  if (params.n_estimators < 1) throw DomainError("n_estimators must be >= 1");
  if (x.rows() == 0) throw DomainError("fit_forest needs at least one row");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("X and Y row counts differ");
  ForestModel model;
  model.n_features = static_cast<int>(x.cols());
  model.n_classes = std::max(count_classes(y), static_cast<int>(label_names.size()));
  model.params = params;
  model.params.max_features = std::clamp(params.max_features, 1, model.n_features);
  model.feature_names = std::move(feature_names);
  model.label_names = std::move(label_names);
  if (model.feature_names.empty()) {
    for (int f = 0; f < model.n_features; ++f) model.feature_names.push_back("x" + std::to_string(f));
  }
  const auto m = static_cast<std::size_t>(x.rows());
  const auto n_trees = static_cast<std::size_t>(params.n_estimators);
  model.trees.resize(n_trees);
  model.oob_indices.resize(n_trees);
  const TreeParams tree_params{model.params.max_features, params.min_leaf, std::numeric_limits<int>::max()};
  parallel_for(n_trees, params.threads, [&](std::size_t t) {
    Rng rng(params.seed + t);
    std::vector<std::size_t> rows(m);
    if (params.bootstrap) {
      std::vector<bool> drawn(m, false);
      for (auto& r : rows) {
        r = rng.below(m);
        drawn[r] = true;
      }
      for (std::size_t i = 0; i < m; ++i) {
        if (!drawn[i]) model.oob_indices[t].push_back(i);
      }
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    model.trees[t] = fit_tree(x, y, model.n_classes, tree_params, rng, std::move(rows));
  });
  return model;
}

// Leaf class-frequency vector of one tree.
inline void add_leaf_distribution(const Tree& tree, const double* row, double* out, double scale) {
  const TreeNode& leaf = tree.leaf_for(row);
  for (std::size_t c = 0; c < leaf.histogram.size(); ++c) out[c] += scale * leaf.histogram[c] / leaf.samples;
}

// Mean over trees of the leaf class frequencies.
inline Matrix predict_proba(const ForestModel& model, const Matrix& x, int threads = 1) {
  if (x.cols() != model.n_features) {
    throw ShapeError("predict_proba: expected " + std::to_string(model.n_features) + " columns, got " +
                     std::to_string(x.cols()));
  }
  Matrix out = Matrix::Zero(x.rows(), model.n_classes);
  const double scale = 1.0 / static_cast<double>(model.trees.size());
  parallel_for(static_cast<std::size_t>(x.rows()), threads, [&](std::size_t r) {
    const auto row = static_cast<Eigen::Index>(r);
    for (const auto& tree : model.trees) add_leaf_distribution(tree, x.row(row).data(), out.row(row).data(), scale);
  });
  return out;
}

inline Labels predict(const ForestModel& model, const Matrix& x, int threads = 1) {
  return argmax_rows(predict_proba(model, x, threads));
}

// Hard majority vote over per-tree argmax; ties go to the lowest class index.
inline Labels majority_vote(const ForestModel& model, const Matrix& x) {
  Labels out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> votes(static_cast<std::size_t>(model.n_classes), 0.0);
    for (const auto& tree : model.trees) {
      const auto& leaf = tree.leaf_for(x.row(r).data());
      ++votes[static_cast<std::size_t>(argmax(leaf.histogram.data(), leaf.histogram.size()))];
    }
    out[static_cast<std::size_t>(r)] = argmax(votes.data(), votes.size());
  }
  return out;
}

inline double accuracy(const Labels& truth, const Labels& predicted) {
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == predicted[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

struct ImportanceReport {
  std::vector<std::string> feature_names;
  std::vector<double> importance;  // sums to 1 unless no_splits
  bool no_splits = false;

  // Indices of the k most important features, ties by feature index.
  std::vector<std::size_t> top(std::size_t k) const {
    std::vector<std::size_t> order(importance.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return importance[a] > importance[b]; });
    order.resize(std::min(k, order.size()));
    return order;
  }
};

// Mean decrease in impurity: each split contributes (node share of the
// tree's rows) x (impurity decrease) to its feature; trees are averaged and
// the result normalised to sum 1.
inline ImportanceReport gini_importance(const ForestModel& model) {
  ImportanceReport report;
  report.feature_names = model.feature_names;
  report.importance.assign(static_cast<std::size_t>(model.n_features), 0.0);
  for (const auto& tree : model.trees) {
    const double root = tree.nodes.front().samples;
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double decrease = node.impurity - (l.samples / node.samples) * l.impurity - (r.samples / node.samples) * r.impurity;
      report.importance[static_cast<std::size_t>(node.feature)] += (node.samples / root) * decrease;
    }
  }
  double total = 0.0;
  for (auto& v : report.importance) {
    v /= static_cast<double>(model.trees.size());
    total += v;
  }
  if (total <= 0.0) {
    report.no_splits = true;
    return report;
  }
  for (auto& v : report.importance) v /= total;
  return report;
}

// --- serialization ---------------------------------------------------------

namespace detail {

inline nlohmann::json node_to_json(const Tree& tree, int idx) {
  const auto& n = tree.nodes[static_cast<std::size_t>(idx)];
  nlohmann::json j = {{"histogram", n.histogram}};
  if (!n.is_leaf()) {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(tree, n.left);
    j["right"] = node_to_json(tree, n.right);
  }
  return j;
}

inline int node_from_json(Tree& tree, const nlohmann::json& j) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode node;
  node.histogram = j.at("histogram").get<std::vector<double>>();
  node.samples = std::accumulate(node.histogram.begin(), node.histogram.end(), 0.0);
  node.impurity = gini(node.histogram);
  if (j.contains("feature")) {
    node.feature = j.at("feature").get<int>();
    node.threshold = j.at("threshold").get<double>();
    node.left = node_from_json(tree, j.at("left"));
    node.right = node_from_json(tree, j.at("right"));
  }
  tree.nodes[static_cast<std::size_t>(idx)] = std::move(node);
  return idx;
}

}  // namespace detail

inline nlohmann::json tree_to_json(const Tree& tree) { return detail::node_to_json(tree, 0); }

inline Tree tree_from_json(const nlohmann::json& j, int n_classes) {
  Tree tree;
  tree.n_classes = n_classes;
  detail::node_from_json(tree, j);
  return tree;
}

inline nlohmann::json to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  return {{"kind", "forest"},
          {"n_classes", m.n_classes},
          {"n_features", m.n_features},
          {"feature_names", m.feature_names},
          {"label_names", m.label_names},
          {"params",
           {{"n_estimators", m.params.n_estimators},
            {"max_features", m.params.max_features},
            {"min_leaf", m.params.min_leaf},
            {"bootstrap", m.params.bootstrap},
            {"seed", m.params.seed}}},
          {"trees", trees}};
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "forest") throw FormatError("not a forest model");
  ForestModel m;
  m.n_classes = j.at("n_classes").get<int>();
  m.n_features = j.at("n_features").get<int>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.label_names = j.at("label_names").get<std::vector<std::string>>();
  const auto& p = j.at("params");
  m.params.n_estimators = p.at("n_estimators").get<int>();
  m.params.max_features = p.at("max_features").get<int>();
  m.params.min_leaf = p.at("min_leaf").get<int>();
  m.params.bootstrap = p.at("bootstrap").get<bool>();
  m.params.seed = p.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t, m.n_classes));
  return m;
}

inline nlohmann::json to_json(const ImportanceReport& r) {
  nlohmann::json features = nlohmann::json::array();
  for (auto i : r.top(r.importance.size())) {
    features.push_back({{"feature", r.feature_names[i]}, {"importance", r.importance[i]}});
  }
  return {{"no_splits", r.no_splits}, {"features", features}};
}

// --- grid search -----------------------------------------------------------

struct ForestGridRow {
  int n_estimators = 0;
  int max_features = 0;  // as requested
  double cv_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool best = false;
};

// Scores each (n_estimators, max_features) cell by stratified k-fold CV on the
// training rows, then refits on all training rows and reports held-out test
// accuracy. Rows come back ranked by CV accuracy (ties: fewer estimators).
inline std::vector<ForestGridRow> forest_grid_search(const Matrix& x, const Labels& y,
                                                     const std::vector<std::pair<int, int>>& grid,
                                                     const Split& split, int folds, std::uint64_t seed,
                                                     int threads = 1) {
  if (grid.empty()) throw DomainError("empty forest grid");
  const Matrix x_train = take_rows(x, split.train);
  const Labels y_train = take(y, split.train);
  const Matrix x_test = take_rows(x, split.test);
  const Labels y_test = take(y, split.test);
  const int classes = count_classes(y);
  const auto cv = stratified_kfold(y, split.train, folds, seed);
  std::vector<ForestGridRow> rows;
  for (const auto& [estimators, max_features] : grid) {
    ForestParams p;
    p.n_estimators = estimators;
    p.max_features = max_features;
    p.seed = seed;
    p.threads = threads;
    double cv_acc = 0.0;
    for (const auto& fold : cv) {
      const auto model = fit_forest(take_rows(x, fold.train), take(y, fold.train), p, {},
                                    std::vector<std::string>(static_cast<std::size_t>(classes)));
      cv_acc += accuracy(take(y, fold.test), predict(model, take_rows(x, fold.test), threads));
    }
    cv_acc /= static_cast<double>(cv.size());
    const auto model = fit_forest(x_train, y_train, p, {}, std::vector<std::string>(static_cast<std::size_t>(classes)));
    rows.push_back({estimators, max_features, cv_acc, accuracy(y_test, predict(model, x_test, threads)), false});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.cv_accuracy != b.cv_accuracy) return a.cv_accuracy > b.cv_accuracy;
    return a.n_estimators < b.n_estimators;
  });
  rows.front().best = true;
  return rows;
}

}  // namespace xlog
