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

// Model-agnostic explanations over a black-box predictor.
//
// Feature-effect curves (PDP, ICE, ALE), global surrogates, LIME local
// surrogates and the submodular pick of a representative explanation set.
// A predictor maps a matrix of flat instances to class probabilities.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xlog/core.hpp"
#include "xlog/forest.hpp"

namespace xlog {

using Predictor = std::function<Matrix(const Matrix&)>;

// ---------------------------------------------------------------------------
// Small statistics helpers

// Sample quantile, linear interpolation between order statistics (type 7).
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline std::vector<double> column_values(const Matrix& x, Eigen::Index col) {
  std::vector<double> v(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) v[static_cast<std::size_t>(r)] = x(r, col);
  return v;
}

// Population standard deviation.
inline double population_sd(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

struct RidgeFit {
  double intercept = 0.0;
  Vector coef;
};

// Minimises sum_i w_i (y_i - b - x_i.beta)^2 + lambda |beta|^2; the intercept
// is not penalised.
inline RidgeFit weighted_ridge(const Matrix& x, const Vector& y, const Vector& w, double lambda) {
  const double wsum = w.sum();
  if (!(wsum > 0.0)) throw DomainError("weighted_ridge: weights sum to zero");
  const Vector xbar = (x.transpose() * w) / wsum;
  const double ybar = w.dot(y) / wsum;
  const Matrix xc = x.rowwise() - xbar.transpose();
  const Vector yc = y.array() - ybar;
  Matrix gram = xc.transpose() * w.asDiagonal() * xc;
  gram.diagonal().array() += lambda;
  RidgeFit fit;
  fit.coef = gram.ldlt().solve(xc.transpose() * w.asDiagonal() * yc);
  fit.intercept = ybar - xbar.dot(fit.coef);
  return fit;
}

// 1 - SS_res / SS_tot with optional weights; NaN when the target is constant.
inline double r_squared(const Vector& truth, const Vector& fitted, const Vector* w = nullptr) {
  const Vector weights = w != nullptr ? *w : Vector::Ones(truth.size());
  const double wsum = weights.sum();
  const double mean = weights.dot(truth) / wsum;
  const double ss_tot = weights.dot((truth.array() - mean).square().matrix());
  const double ss_res = weights.dot((truth - fitted).array().square().matrix());
  if (ss_tot <= 1e-14 * std::max(1.0, wsum)) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Feature-effect curves

enum class CurveKind { kPdp, kIce, kAle };

inline std::string to_string(CurveKind k) {
  switch (k) {
    case CurveKind::kPdp: return "pdp";
    case CurveKind::kIce: return "ice";
    case CurveKind::kAle: return "ale";
  }
  return "pdp";
}

struct CurveSet {
  CurveKind kind = CurveKind::kPdp;
  std::string feature;
  Eigen::Index feature_index = 0;
  int target_class = 0;
  std::vector<double> grid;
  std::vector<std::vector<double>> values;  // one curve for PDP/ALE, one per row for ICE
  bool extrapolated = false;
  std::vector<std::string> notes;
};

namespace detail {

inline void check_curve_inputs(const Matrix& x, Eigen::Index feature, const std::vector<double>& grid) {
  if (x.rows() == 0) throw DomainError("empty background");
  if (feature < 0 || feature >= x.cols()) throw ShapeError("feature index out of range");
  if (grid.empty()) throw DomainError("empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw DomainError("grid must be strictly increasing");
  }
}

// predictor(row with x[feature] := g) for every row and grid point, class
// column only. Result is [row][grid].
inline std::vector<std::vector<double>> evaluate_grid(const Predictor& predictor, const Matrix& x,
                                                      Eigen::Index feature, const std::vector<double>& grid,
                                                      int cls) {
  const Eigen::Index n = x.rows();
  Matrix batch(n * static_cast<Eigen::Index>(grid.size()), x.cols());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto block = batch.middleRows(static_cast<Eigen::Index>(g) * n, n);
    block = x;
    block.col(feature).setConstant(grid[g]);
  }
  const Matrix p = predictor(batch);
  if (p.rows() != batch.rows() || cls < 0 || cls >= p.cols()) throw ShapeError("predictor output shape");
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (Eigen::Index r = 0; r < n; ++r) out[static_cast<std::size_t>(r)][g] = p(static_cast<Eigen::Index>(g) * n + r, cls);
  }
  return out;
}

}  // namespace detail

// Evenly spaced grid over the observed range, or the distinct values when
// there are at most `points` of them.
inline std::vector<double> default_grid(const Matrix& x, Eigen::Index feature, std::size_t points = 20) {
  auto v = column_values(x, feature);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  if (v.size() <= points) return v;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = v.front() + (v.back() - v.front()) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

inline CurveSet ice(const Predictor& predictor, const Matrix& x, Eigen::Index feature,
                    const std::vector<double>& grid, int cls, const std::string& name = "") {
  detail::check_curve_inputs(x, feature, grid);
  CurveSet c;
  c.kind = CurveKind::kIce;
  c.feature = name;
  c.feature_index = feature;
  c.target_class = cls;
  c.grid = grid;
  const double lo = x.col(feature).minCoeff(), hi = x.col(feature).maxCoeff();
  c.extrapolated = grid.front() < lo || grid.back() > hi;
  if (c.extrapolated) c.notes.push_back("grid extends beyond the observed feature range");
  c.values = detail::evaluate_grid(predictor, x, feature, grid, cls);
  return c;
}

// Pointwise mean over ICE curves, summed in row order.
inline CurveSet mean_curve(const CurveSet& ice_curves) {
  CurveSet c = ice_curves;
  c.kind = CurveKind::kPdp;
  std::vector<double> mean(c.grid.size(), 0.0);
  for (const auto& curve : ice_curves.values) {
    for (std::size_t g = 0; g < mean.size(); ++g) mean[g] += curve[g];
  }
  for (double& m : mean) m /= static_cast<double>(ice_curves.values.size());
  c.values = {mean};
  return c;
}

inline CurveSet pdp(const Predictor& predictor, const Matrix& x, Eigen::Index feature,
                    const std::vector<double>& grid, int cls, const std::string& name = "") {
  return mean_curve(ice(predictor, x, feature, grid, cls, name));
}

// Accumulated local effects over equal-frequency intervals. Boundaries are
// the deduplicated quantiles z_0 < ... < z_K; row r belongs to the interval
// (z_{k-1}, z_k], the first interval also holding z_0. Empty intervals are
// merged into a neighbour. The accumulated curve (0 at z_0) is centred by
// its mean over the K + 1 boundaries.
inline CurveSet ale(const Predictor& predictor, const Matrix& x, Eigen::Index feature, std::size_t n_intervals,
                    int cls, const std::string& name = "") {
  if (n_intervals < 1) throw DomainError("ale needs at least one interval");
  if (x.rows() == 0) throw DomainError("empty background");
  if (feature < 0 || feature >= x.cols()) throw ShapeError("feature index out of range");
  const auto values = column_values(x, feature);
  std::vector<double> z;
  for (std::size_t k = 0; k <= n_intervals; ++k) {
    z.push_back(quantile(values, static_cast<double>(k) / static_cast<double>(n_intervals)));
  }
  z.erase(std::unique(z.begin(), z.end()), z.end());
  if (z.size() < 2) throw DomainError("ale needs a feature with at least two distinct values");

  CurveSet c;
  c.kind = CurveKind::kAle;
  c.feature = name;
  c.feature_index = feature;
  c.target_class = cls;

  auto interval_of = [&](double v) {
    const auto it = std::lower_bound(z.begin() + 1, z.end(), v);
    return static_cast<std::size_t>(it - z.begin());  // 1..K
  };
  std::vector<std::vector<std::size_t>> members;
  for (bool merged = true; merged;) {
    merged = false;
    members.assign(z.size(), {});
    for (std::size_t r = 0; r < values.size(); ++r) members[interval_of(values[r])].push_back(r);
    for (std::size_t k = 1; k < z.size(); ++k) {
      if (!members[k].empty()) continue;
      // Drop the upper boundary (or the lower one for the last interval).
      const std::size_t drop = k + 1 < z.size() ? k : k - 1;
      c.notes.push_back("empty interval (" + format_double(z[k - 1]) + ", " + format_double(z[k]) +
                        "] merged with a neighbour");
      z.erase(z.begin() + static_cast<std::ptrdiff_t>(drop));
      merged = true;
      break;
    }
    if (z.size() < 2) throw DomainError("ale: all intervals empty");
  }

  std::vector<double> acc(z.size(), 0.0);
  for (std::size_t k = 1; k < z.size(); ++k) {
    const auto& rows = members[k];
    Matrix lower(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) lower.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    Matrix upper = lower;
    lower.col(feature).setConstant(z[k - 1]);
    upper.col(feature).setConstant(z[k]);
    const Matrix pu = predictor(upper), pl = predictor(lower);
    double effect = 0.0;
    for (Eigen::Index i = 0; i < pu.rows(); ++i) effect += pu(i, cls) - pl(i, cls);
    acc[k] = acc[k - 1] + effect / static_cast<double>(rows.size());
  }
  double mean = 0.0;
  for (double a : acc) mean += a;
  mean /= static_cast<double>(acc.size());
  for (double& a : acc) a -= mean;
  c.grid = z;
  c.values = {acc};
  return c;
}

inline nlohmann::json to_json(const CurveSet& c) {
  return {{"kind", to_string(c.kind)}, {"feature", c.feature},         {"feature_index", c.feature_index},
          {"class", c.target_class},   {"grid", c.grid},               {"values", c.values},
          {"extrapolated", c.extrapolated}, {"notes", c.notes}};
}

// grid,value (PDP/ALE) or grid,row0,row1,... (ICE)
inline std::string to_csv(const CurveSet& c) {
  std::string out = "grid";
  if (c.kind == CurveKind::kIce) {
    for (std::size_t r = 0; r < c.values.size(); ++r) out += ",row" + std::to_string(r);
  } else {
    out += "," + to_string(c.kind);
  }
  out += "\n";
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    out += format_double(c.grid[g]);
    for (const auto& curve : c.values) out += "," + format_double(curve[g]);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Global surrogate

enum class SurrogateKind { kLinear, kTree };

struct SurrogateReport {
  SurrogateKind kind = SurrogateKind::kLinear;
  std::vector<double> r2;  // per class, against black-box probabilities
  double agreement = 0.0;  // surrogate argmax == black-box argmax
  bool degenerate = false;
  std::vector<RidgeFit> linear;  // per class
  std::optional<Tree> tree;
  std::vector<std::string> notes;

  Matrix predict_proba(const Matrix& x) const {
    const auto C = static_cast<Eigen::Index>(kind == SurrogateKind::kLinear ? linear.size()
                                                                            : static_cast<std::size_t>(tree->n_classes));
    Matrix out(x.rows(), C);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (kind == SurrogateKind::kLinear) {
        for (Eigen::Index c = 0; c < C; ++c) {
          const auto& f = linear[static_cast<std::size_t>(c)];
          out(r, c) = f.intercept + x.row(r).dot(f.coef);
        }
      } else {
        const auto& leaf = tree->leaf_for(x.row(r).data());
        for (Eigen::Index c = 0; c < C; ++c) out(r, c) = leaf.histogram[static_cast<std::size_t>(c)] / leaf.samples;
      }
    }
    return out;
  }
};

// Fits an interpretable model to the black box's outputs on x and scores
// it against those outputs, never against ground truth. `param` is the
// ridge lambda (linear) or the maximum depth (tree).
inline SurrogateReport fit_global_surrogate(const Predictor& predictor, const Matrix& x, SurrogateKind kind,
                                            double param) {
  if (x.rows() == 0) throw DomainError("global surrogate needs a non-empty X");
  const Matrix p = predictor(x);
  if (p.rows() != x.rows()) throw ShapeError("predictor output shape");
  const Labels black = argmax_rows(p);
  SurrogateReport rep;
  rep.kind = kind;
  if (kind == SurrogateKind::kLinear) {
    const Vector w = Vector::Ones(x.rows());
    for (Eigen::Index c = 0; c < p.cols(); ++c) rep.linear.push_back(weighted_ridge(x, p.col(c), w, param));
  } else {
    TreeParams tp;
    tp.max_depth = static_cast<int>(param);
    Rng rng(0);
    rep.tree = fit_tree(x, black, static_cast<int>(p.cols()), tp, rng);
  }
  const Matrix s = rep.predict_proba(x);
  bool all_nan = true;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    rep.r2.push_back(r_squared(p.col(c), s.col(c)));
    all_nan &= std::isnan(rep.r2.back());
  }
  if (all_nan) {
    rep.degenerate = true;
    rep.notes.push_back("black-box output is constant on X; fidelity undefined");
  }
  const Labels mine = argmax_rows(s);
  rep.agreement = accuracy(black, mine);
  return rep;
}

inline nlohmann::json to_json(const SurrogateReport& r) {
  nlohmann::json j = {{"kind", r.kind == SurrogateKind::kLinear ? "linear" : "tree"},
                      {"agreement", r.agreement},
                      {"degenerate", r.degenerate},
                      {"notes", r.notes}};
  nlohmann::json r2 = nlohmann::json::array();
  for (double v : r.r2) r2.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  j["r2"] = r2;
  if (r.tree) j["tree"] = tree_to_json(*r.tree);
  if (!r.linear.empty()) {
    nlohmann::json lin = nlohmann::json::array();
    for (const auto& f : r.linear) {
      lin.push_back({{"intercept", f.intercept}, {"coef", std::vector<double>(f.coef.data(), f.coef.data() + f.coef.size())}});
    }
    j["linear"] = lin;
  }
  return j;
}

// ---------------------------------------------------------------------------
// LIME

struct Perturbation {
  Matrix samples;  // n x F, row 0 is the instance
  Matrix binary;   // n x F, 1 where the sample agrees with the instance
};

// Categorical columns keep the instance value with probability 0.5, else
// draw from the background column. Numeric columns add N(0, sd^2) noise
// with the background sd and count as agreeing within 0.5 sd. Sample i uses
// its own RNG stream, so the result is independent of evaluation order.
inline Perturbation perturb(const Vector& instance, const Matrix& background, const std::vector<bool>& categorical,
                            std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw DomainError("perturb needs n_samples >= 1");
  if (background.rows() == 0) throw DomainError("empty background");
  const Eigen::Index F = instance.size();
  if (background.cols() != F || static_cast<Eigen::Index>(categorical.size()) != F) {
    throw ShapeError("perturb: instance, background and categorical flags disagree");
  }
  std::vector<double> sd(static_cast<std::size_t>(F));
  for (Eigen::Index j = 0; j < F; ++j) sd[static_cast<std::size_t>(j)] = population_sd(column_values(background, j));

  Perturbation out;
  const auto n = static_cast<Eigen::Index>(n_samples);
  out.samples.resize(n, F);
  out.binary.resize(n, F);
  out.samples.row(0) = instance.transpose();
  out.binary.row(0).setOnes();
  for (Eigen::Index i = 1; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (Eigen::Index j = 0; j < F; ++j) {
      const double v = instance[j];
      const double s = sd[static_cast<std::size_t>(j)];
      if (categorical[static_cast<std::size_t>(j)]) {
        const double drawn = rng.bernoulli(0.5) ? v : background(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(background.rows()))), j);
        out.samples(i, j) = drawn;
        out.binary(i, j) = drawn == v ? 1.0 : 0.0;
      } else if (s == 0.0) {
        out.samples(i, j) = v;
        out.binary(i, j) = 1.0;
      } else {
        const double drawn = v + s * rng.normal();
        out.samples(i, j) = drawn;
        out.binary(i, j) = std::abs(drawn - v) <= 0.5 * s ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

inline double kernel_weight(double distance, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("kernel width must be positive");
  return std::exp(-(distance * distance) / (sigma * sigma));
}

// Cosine distance between a binary vector and the all-ones vector.
inline double cosine_distance_to_ones(const double* z, std::size_t n) {
  double k = 0.0;
  for (std::size_t j = 0; j < n; ++j) k += z[j];
  if (k <= 0.0) return 1.0;
  return 1.0 - std::sqrt(k / static_cast<double>(n));
}

inline double default_kernel_width(std::size_t n_features) { return 0.75 * std::sqrt(static_cast<double>(n_features)); }

enum class Selection { kForward, kLasso };

struct LimeOptions {
  int target_class = 0;
  std::size_t K = 10;
  std::size_t n_samples = 5000;
  std::optional<double> sigma;  // default 0.75 * sqrt(F)
  std::uint64_t seed = 0;
  Selection selection = Selection::kForward;
  double ridge = 1e-3;
};

struct Explanation {
  std::string instance;
  int target_class = 0;
  std::string class_name;
  std::vector<std::size_t> features;       // selected columns, in selection order
  std::vector<std::string> feature_names;  // their names
  std::vector<std::string> labels;         // human-readable conditions
  std::vector<double> weights;             // signed, aligned with features
  double intercept = 0.0;
  double fidelity = 0.0;  // weighted R^2; NaN when degenerate
  double sigma = 0.0;
  bool degenerate = false;

  // Feature columns ordered by |weight| descending, ties by column.
  std::vector<std::size_t> ranked(std::size_t k = std::numeric_limits<std::size_t>::max()) const {
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double wa = std::abs(weights[a]), wb = std::abs(weights[b]);
      if (wa != wb) return wa > wb;
      return features[a] < features[b];
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < order.size() && out.size() < k; ++i) {
      if (weights[order[i]] != 0.0) out.push_back(features[order[i]]);
    }
    return out;
  }
};

namespace detail {

// Weighted normal equations over [1, Z] computed once; subset fits are then
// small solves. RSS excludes the ridge penalty.
struct WeightedGram {
  Matrix g;   // (F+1) x (F+1)
  Vector b;   // (F+1)
  double yy;  // sum w y^2

  WeightedGram(const Matrix& z, const Vector& y, const Vector& w) {
    Matrix design(z.rows(), z.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(z.cols()) = z;
    g = design.transpose() * w.asDiagonal() * design;
    b = design.transpose() * w.asDiagonal() * y;
    yy = w.dot(y.cwiseProduct(y));
  }

  // Returns (coefficients [intercept, subset...], rss).
  std::pair<Vector, double> fit(const std::vector<std::size_t>& subset, double lambda) const {
    const auto k = static_cast<Eigen::Index>(subset.size()) + 1;
    std::vector<Eigen::Index> idx = {0};
    for (auto s : subset) idx.push_back(static_cast<Eigen::Index>(s) + 1);
    Matrix a(k, k);
    Vector rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      rhs[i] = b[idx[static_cast<std::size_t>(i)]];
      for (Eigen::Index j = 0; j < k; ++j) a(i, j) = g(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    for (Eigen::Index i = 1; i < k; ++i) a(i, i) += lambda;
    const Vector beta = a.ldlt().solve(rhs);
    // RSS = y'Wy - 2 beta'b + beta'G beta, with G the unpenalised block.
    Matrix gu = a;
    for (Eigen::Index i = 1; i < k; ++i) gu(i, i) -= lambda;
    const double rss = yy - 2.0 * beta.dot(rhs) + beta.dot(gu * beta);
    return {beta, rss};
  }
};

inline std::vector<std::size_t> forward_select(const WeightedGram& gram, std::size_t F, std::size_t K, double lambda) {
  std::vector<std::size_t> chosen;
  std::vector<bool> used(F, false);
  while (chosen.size() < std::min(K, F)) {
    double best_rss = std::numeric_limits<double>::infinity();
    std::size_t best = F;
    for (std::size_t j = 0; j < F; ++j) {
      if (used[j]) continue;
      auto trial = chosen;
      trial.push_back(j);
      const double rss = gram.fit(trial, lambda).second;
      if (rss < best_rss) {
        best_rss = rss;
        best = j;
      }
    }
    if (best == F) break;
    used[best] = true;
    chosen.push_back(best);
  }
  return chosen;
}

// Weighted lasso by cyclic coordinate descent along a geometric lambda path;
// returns the largest support with at most K members, by |coef| descending.
inline std::vector<std::size_t> lasso_select(const Matrix& z, const Vector& y, const Vector& w, std::size_t K) {
  const Eigen::Index F = z.cols();
  const double wsum = w.sum();
  const Vector zbar = (z.transpose() * w) / wsum;
  const double ybar = w.dot(y) / wsum;
  const Matrix zc = z.rowwise() - zbar.transpose();
  const Vector yc = y.array() - ybar;
  Vector col_ss(F);
  for (Eigen::Index j = 0; j < F; ++j) col_ss[j] = w.dot(zc.col(j).cwiseProduct(zc.col(j))) / wsum;
  const Vector corr = (zc.transpose() * w.asDiagonal() * yc) / wsum;
  const double lambda_max = corr.cwiseAbs().maxCoeff();
  Vector beta = Vector::Zero(F);
  Vector resid = yc;
  std::vector<std::size_t> best;
  if (lambda_max <= 0.0) return best;
  constexpr int kSteps = 60;
  for (int s = 0; s < kSteps; ++s) {
    const double lambda = lambda_max * std::pow(1e-4, static_cast<double>(s) / (kSteps - 1));
    for (int sweep = 0; sweep < 200; ++sweep) {
      double change = 0.0;
      for (Eigen::Index j = 0; j < F; ++j) {
        if (col_ss[j] <= 0.0) continue;
        const double rho = w.dot(zc.col(j).cwiseProduct(resid)) / wsum + col_ss[j] * beta[j];
        const double updated = (rho > lambda ? rho - lambda : rho < -lambda ? rho + lambda : 0.0) / col_ss[j];
        const double delta = updated - beta[j];
        if (delta != 0.0) {
          resid -= delta * zc.col(j);
          beta[j] = updated;
          change = std::max(change, std::abs(delta));
        }
      }
      if (change < 1e-10) break;
    }
    std::vector<std::size_t> support;
    for (Eigen::Index j = 0; j < F; ++j) {
      if (beta[j] != 0.0) support.push_back(static_cast<std::size_t>(j));
    }
    if (support.size() > K) break;
    std::stable_sort(support.begin(), support.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(beta[static_cast<Eigen::Index>(a)]) > std::abs(beta[static_cast<Eigen::Index>(b)]);
    });
    best = support;
  }
  return best;
}

}  // namespace detail

// Human-readable condition for one column of the explained instance:
// "name = value" for categorical columns and the instance's quartile bin
// of the background for numeric columns.
inline std::string feature_condition(const std::string& name, double value, bool categorical,
                                     const Matrix& background, Eigen::Index col,
                                     const std::function<std::string(double)>& decode = {}) {
  if (categorical) return name + " = " + (decode ? decode(value) : format_double(value));
  const auto v = column_values(background, col);
  const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
  const auto f = [](double a) { return format_double(std::round(a * 100.0) / 100.0); };
  if (value <= q1) return name + " <= " + f(q1);
  if (value <= q2) return f(q1) + " < " + name + " <= " + f(q2);
  if (value <= q3) return f(q2) + " < " + name + " <= " + f(q3);
  return name + " > " + f(q3);
}

struct FeatureInfoView {
  std::vector<std::string> names;
  std::vector<bool> categorical;
  std::function<std::string(std::size_t, double)> decode;  // optional token decoder
};

inline Explanation lime_explain(const Predictor& predictor, const Vector& instance, const Matrix& background,
                                const FeatureInfoView& info, const LimeOptions& opt,
                                const std::string& instance_id = "") {
  if (opt.K < 1) throw DomainError("LIME needs K >= 1");
  const auto F = static_cast<std::size_t>(instance.size());
  const double sigma = opt.sigma.value_or(default_kernel_width(F));
  if (!(sigma > 0.0)) throw DomainError("kernel width must be positive");
  const auto pert = perturb(instance, background, info.categorical, opt.n_samples, opt.seed);
  const Matrix p = predictor(pert.samples);
  if (p.rows() != pert.samples.rows() || opt.target_class < 0 || opt.target_class >= p.cols()) {
    throw ShapeError("predictor output shape");
  }
  const Vector y = p.col(opt.target_class);
  Vector w(pert.binary.rows());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w[i] = kernel_weight(cosine_distance_to_ones(pert.binary.row(i).data(), F), sigma);
  }

  Explanation e;
  e.instance = instance_id;
  e.target_class = opt.target_class;
  e.sigma = sigma;
  const double wsum = w.sum();
  const double ybar = w.dot(y) / wsum;
  const double ss_tot = w.dot((y.array() - ybar).square().matrix());
  if (ss_tot <= 1e-14 * std::max(1.0, wsum)) {
    e.degenerate = true;
    e.intercept = ybar;
    e.fidelity = std::numeric_limits<double>::quiet_NaN();
    return e;
  }

  const detail::WeightedGram gram(pert.binary, y, w);
  const auto chosen = opt.selection == Selection::kForward ? detail::forward_select(gram, F, opt.K, opt.ridge)
                                                           : detail::lasso_select(pert.binary, y, w, opt.K);
  const auto [beta, rss] = gram.fit(chosen, opt.ridge);
  e.intercept = beta[0];
  e.fidelity = 1.0 - rss / ss_tot;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const std::size_t j = chosen[i];
    e.features.push_back(j);
    e.weights.push_back(beta[static_cast<Eigen::Index>(i) + 1]);
    const std::string name = j < info.names.size() ? info.names[j] : "x" + std::to_string(j);
    e.feature_names.push_back(name);
    std::function<std::string(double)> decode;
    if (info.decode) decode = [&, j](double v) { return info.decode(j, v); };
    e.labels.push_back(feature_condition(name, instance[static_cast<Eigen::Index>(j)], info.categorical[j], background,
                                         static_cast<Eigen::Index>(j), decode));
  }
  return e;
}

inline nlohmann::json to_json(const Explanation& e) {
  nlohmann::json weights = nlohmann::json::array();
  for (std::size_t i = 0; i < e.features.size(); ++i) {
    weights.push_back({{"feature", e.feature_names[i]},
                       {"column", e.features[i]},
                       {"condition", e.labels[i]},
                       {"weight", e.weights[i]}});
  }
  return {{"instance", e.instance},
          {"class", e.class_name.empty() ? nlohmann::json(e.target_class) : nlohmann::json(e.class_name)},
          {"weights", weights},
          {"intercept", e.intercept},
          {"fidelity", std::isnan(e.fidelity) ? nlohmann::json(nullptr) : nlohmann::json(e.fidelity)},
          {"kernel_width", e.sigma},
          {"degenerate", e.degenerate}};
}

// ---------------------------------------------------------------------------
// Submodular pick

struct GlobalSummary {
  std::vector<std::size_t> picked;  // indices into the candidate list
  std::vector<std::string> picked_ids;
  std::vector<Explanation> explanations;
  double coverage = 0.0;
  std::map<std::size_t, double> importance;  // feature column -> sqrt(sum |w|)
};

// Feature importance over a candidate set: sqrt of summed |weight|.
inline std::map<std::size_t, double> global_importance(const std::vector<Explanation>& candidates) {
  std::map<std::size_t, double> sum;
  for (const auto& e : candidates) {
    for (std::size_t i = 0; i < e.features.size(); ++i) {
      if (e.weights[i] != 0.0) sum[e.features[i]] += std::abs(e.weights[i]);
    }
  }
  for (auto& [_, v] : sum) v = std::sqrt(v);
  return sum;
}

// Importance mass of the features present in any explanation of `subset`.
inline double coverage(const std::vector<Explanation>& candidates, const std::vector<std::size_t>& subset,
                       const std::map<std::size_t, double>& importance) {
  std::set<std::size_t> covered;
  for (auto i : subset) {
    const auto& e = candidates[i];
    for (std::size_t k = 0; k < e.features.size(); ++k) {
      if (e.weights[k] != 0.0) covered.insert(e.features[k]);
    }
  }
  double total = 0.0;
  for (auto f : covered) total += importance.at(f);
  return total;
}

// Greedy coverage maximisation. Ties go to the smaller instance id; the
// pick stops early once no candidate adds coverage.
inline GlobalSummary submodular_pick(const std::vector<Explanation>& candidates, std::size_t budget) {
  if (candidates.empty()) throw DomainError("submodular pick needs at least one candidate");
  if (budget < 1) throw DomainError("budget must be >= 1");
  GlobalSummary out;
  out.importance = global_importance(candidates);
  std::vector<bool> taken(candidates.size(), false);
  double current = 0.0;
  while (out.picked.size() < budget) {
    std::optional<std::size_t> best;
    double best_gain = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i]) continue;
      auto trial = out.picked;
      trial.push_back(i);
      const double gain = coverage(candidates, trial, out.importance) - current;
      if (gain <= 0.0) continue;
      if (!best || gain > best_gain ||
          (gain == best_gain && candidates[i].instance < candidates[*best].instance)) {
        best = i;
        best_gain = gain;
      }
    }
    if (!best) break;
    taken[*best] = true;
    out.picked.push_back(*best);
    current = coverage(candidates, out.picked, out.importance);
  }
  out.coverage = coverage(candidates, out.picked, out.importance);
  for (auto i : out.picked) {
    out.picked_ids.push_back(candidates[i].instance);
    out.explanations.push_back(candidates[i]);
  }
  return out;
}

inline nlohmann::json to_json(const GlobalSummary& s, const std::vector<std::string>& feature_names = {}) {
  nlohmann::json imp = nlohmann::json::array();
  for (const auto& [f, v] : s.importance) {
    imp.push_back({{"column", f}, {"feature", f < feature_names.size() ? feature_names[f] : std::to_string(f)}, {"importance", v}});
  }
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& e : s.explanations) ex.push_back(to_json(e));
  return {{"picked", s.picked_ids}, {"coverage", s.coverage}, {"importance", imp}, {"explanations", ex}};
}

}  // namespace xlog
