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

// Two-dimensional projections of hidden activations.
//
// An autoencoder d -> n1 (tanh) -> 2 (linear) -> n1 (tanh) -> d (linear) is
// trained by full-batch gradient descent on the mean squared reconstruction
// error; its bottleneck gives the coordinates. k-means on the coordinates
// then exposes cluster purity and instances predicted against their
// cluster's majority.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"
#include "xlog/core.hpp"
#include "xlog/seqnet.hpp"

namespace xlog {

struct Autoencoder {
  Eigen::Index n_in = 0;
  Eigen::Index n1 = 0;
  Matrix W1, W2, W3, W4;  // (n1 x d), (2 x n1), (n1 x 2), (d x n1)
  Vector b1, b2, b3, b4;
  std::uint64_t seed = 0;
  std::vector<double> curve;  // MSE before training, then after each epoch
  double final_mse = 0.0;
  bool diverged = false;
  bool no_improvement = false;  // final MSE not below the initial MSE
};

struct AutoencoderGradient {
  Matrix W1, W2, W3, W4;
  Vector b1, b2, b3, b4;
};

namespace detail {

struct AeForward {
  Matrix z1, code, z3, out;
};

inline AeForward ae_forward(const Autoencoder& ae, const Matrix& x) {
  AeForward f;
  f.z1 = ((x * ae.W1.transpose()).rowwise() + ae.b1.transpose()).array().tanh().matrix();
  f.code = (f.z1 * ae.W2.transpose()).rowwise() + ae.b2.transpose();
  f.z3 = ((f.code * ae.W3.transpose()).rowwise() + ae.b3.transpose()).array().tanh().matrix();
  f.out = (f.z3 * ae.W4.transpose()).rowwise() + ae.b4.transpose();
  return f;
}

inline void init_uniform(Matrix& m, Rng& rng) {
  const double r = 1.0 / std::sqrt(static_cast<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-r, r);
}

}  // namespace detail

inline Autoencoder make_autoencoder(Eigen::Index n_in, Eigen::Index n1, std::uint64_t seed) {
  if (n1 < 2) throw DomainError("autoencoder hidden width must be >= 2");
  if (n_in < 1) throw DomainError("autoencoder needs at least one input column");
  Autoencoder ae;
  ae.n_in = n_in;
  ae.n1 = n1;
  ae.seed = seed;
  ae.W1.resize(n1, n_in);
  ae.W2.resize(2, n1);
  ae.W3.resize(n1, 2);
  ae.W4.resize(n_in, n1);
  Rng rng(seed);
  for (Matrix* m : {&ae.W1, &ae.W2, &ae.W3, &ae.W4}) detail::init_uniform(*m, rng);
  ae.b1 = Vector::Zero(n1);
  ae.b2 = Vector::Zero(2);
  ae.b3 = Vector::Zero(n1);
  ae.b4 = Vector::Zero(n_in);
  return ae;
}

inline double reconstruction_mse(const Autoencoder& ae, const Matrix& x) {
  const auto f = detail::ae_forward(ae, x);
  return (f.out - x).array().square().mean();
}

inline AutoencoderGradient ae_gradient(const Autoencoder& ae, const Matrix& x) {
  const auto f = detail::ae_forward(ae, x);
  const double scale = 2.0 / static_cast<double>(x.rows() * x.cols());
  const Matrix d_out = (f.out - x) * scale;
  AutoencoderGradient g;
  g.W4 = d_out.transpose() * f.z3;
  g.b4 = d_out.colwise().sum().transpose();
  const Matrix d_a3 = ((d_out * ae.W4).array() * (1.0 - f.z3.array().square())).matrix();
  g.W3 = d_a3.transpose() * f.code;
  g.b3 = d_a3.colwise().sum().transpose();
  const Matrix d_code = d_a3 * ae.W3;
  g.W2 = d_code.transpose() * f.z1;
  g.b2 = d_code.colwise().sum().transpose();
  const Matrix d_a1 = ((d_code * ae.W2).array() * (1.0 - f.z1.array().square())).matrix();
  g.W1 = d_a1.transpose() * x;
  g.b1 = d_a1.colwise().sum().transpose();
  return g;
}

struct AutoencoderOptions {
  Eigen::Index n1 = 8;
  int epochs = 2000;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

// Full-batch gradient descent. A non-finite loss restores the last finite
// parameters and stops.
inline Autoencoder fit_autoencoder(const Matrix& x, const AutoencoderOptions& opt) {
  if (x.rows() == 0) throw DomainError("autoencoder needs at least one row");
  if (opt.epochs < 0) throw DomainError("epochs must be >= 0");
  Autoencoder ae = make_autoencoder(x.cols(), opt.n1, opt.seed);
  double mse = reconstruction_mse(ae, x);
  ae.curve.push_back(mse);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const Autoencoder saved = ae;
    const auto g = ae_gradient(ae, x);
    ae.W1 -= opt.learning_rate * g.W1;
    ae.W2 -= opt.learning_rate * g.W2;
    ae.W3 -= opt.learning_rate * g.W3;
    ae.W4 -= opt.learning_rate * g.W4;
    ae.b1 -= opt.learning_rate * g.b1;
    ae.b2 -= opt.learning_rate * g.b2;
    ae.b3 -= opt.learning_rate * g.b3;
    ae.b4 -= opt.learning_rate * g.b4;
    mse = reconstruction_mse(ae, x);
    if (!std::isfinite(mse)) {
      const auto curve = ae.curve;
      ae = saved;
      ae.curve = curve;
      ae.diverged = true;
      break;
    }
    ae.curve.push_back(mse);
  }
  ae.final_mse = ae.curve.back();
  ae.no_improvement = opt.epochs > 0 && !(ae.final_mse < ae.curve.front());
  return ae;
}

// Encoder forward pass only.
inline Matrix project(const Autoencoder& ae, const Matrix& x) {
  if (x.cols() != ae.n_in) {
    throw ShapeError("projection input has " + std::to_string(x.cols()) + " columns, autoencoder expects " +
                     std::to_string(ae.n_in));
  }
  const Matrix z1 = ((x * ae.W1.transpose()).rowwise() + ae.b1.transpose()).array().tanh().matrix();
  return (z1 * ae.W2.transpose()).rowwise() + ae.b2.transpose();
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  Labels assignment;
  Matrix centers;
  double inertia = 0.0;
};

namespace detail {

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace detail

// One k-means++ initialisation followed by Lloyd iterations.
inline KMeansResult kmeans_single(const Matrix& x, int k, std::uint64_t seed, int max_iter = 300) {
  const Eigen::Index n = x.rows();
  if (k < 1) throw DomainError("k must be >= 1");
  if (k > n) throw DomainError("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " points");
  Rng rng(seed);
  KMeansResult res;
  res.centers.resize(k, x.cols());
  res.centers.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n))));
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = nearest[static_cast<std::size_t>(i)];
      d = std::min(d, detail::squared_distance(x, i, res.centers, c - 1));
      total += d;
    }
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[static_cast<std::size_t>(i)];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n)));
    }
    res.centers.row(c) = x.row(pick);
  }

  res.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = detail::squared_distance(x, i, res.centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = detail::squared_distance(x, i, res.centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignment[static_cast<std::size_t>(i)] != best) {
        res.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = res.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it to the point farthest from its own center.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = detail::squared_distance(x, i, res.centers, res.assignment[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      res.centers.row(c) = x.row(far);
    }
  }
  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    res.inertia += detail::squared_distance(x, i, res.centers, res.assignment[static_cast<std::size_t>(i)]);
  }
  return res;
}

// Best inertia over restarts seeded seed, seed + 1, ...; ties keep the
// earliest restart.
inline KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts = 20, int threads = 1) {
  if (restarts < 1) throw DomainError("restarts must be >= 1");
  std::vector<KMeansResult> runs(static_cast<std::size_t>(restarts));
  parallel_for(runs.size(), threads, [&](std::size_t r) { runs[r] = kmeans_single(x, k, seed + r); });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  return runs[best];
}

// Mean silhouette; points in singleton clusters score 0, and a single
// cluster scores 0 overall.
inline double silhouette(const Matrix& x, const Labels& assignment) {
  const Eigen::Index n = x.rows();
  if (n == 0) return 0.0;
  const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
  if (std::count_if(sizes.begin(), sizes.end(), [](int s) { return s > 0; }) < 2) return 0.0;
  double total = 0.0;
  std::vector<double> dist(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) dist[static_cast<std::size_t>(assignment[static_cast<std::size_t>(j)])] += (x.row(i) - x.row(j)).norm();
    }
    const auto own = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
    if (sizes[own] <= 1) continue;
    const double a = dist[own] / (sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < dist.size(); ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, dist[c] / sizes[c]);
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Projections and cluster reports

struct LatentProjection {
  Matrix coords;  // M x 2
  Labels true_labels;
  Labels predicted_labels;
  Labels cluster;
  double purity = 0.0;
  std::vector<std::string> case_ids;
  std::vector<std::string> label_names;
};

inline LatentProjection make_projection(const Autoencoder& ae, const ActivationMatrix& acts) {
  LatentProjection p;
  p.coords = project(ae, acts.values);
  p.true_labels = acts.true_labels;
  p.predicted_labels = acts.predicted_labels;
  p.case_ids = acts.case_ids;
  p.label_names = acts.label_names;
  p.cluster.assign(static_cast<std::size_t>(p.coords.rows()), 0);
  return p;
}

struct ClusterSummary {
  int cluster = 0;
  std::size_t size = 0;
  int majority_label = 0;
  double purity = 0.0;
  std::vector<std::size_t> misclassified;  // predicted label != majority label
};

struct ClusterReport {
  int k = 0;
  double purity = 0.0;  // rows whose true label is their cluster's majority / M
  double inertia = 0.0;
  double silhouette = 0.0;
  std::vector<ClusterSummary> clusters;
};

// k-means (20 restarts) on the coordinates; writes the assignment and the
// overall purity back into the projection.
inline ClusterReport analyze_misclassifications(LatentProjection& proj, int k, std::uint64_t seed = 0,
                                                int threads = 1) {
  const auto M = static_cast<std::size_t>(proj.coords.rows());
  if (k < 1) throw DomainError("k must be >= 1");
  if (static_cast<std::size_t>(k) > M) throw DomainError("k exceeds the number of projected instances");
  const auto km = kmeans(proj.coords, k, seed, 20, threads);
  proj.cluster = km.assignment;
  ClusterReport rep;
  rep.k = k;
  rep.inertia = km.inertia;
  rep.silhouette = silhouette(proj.coords, km.assignment);
  std::size_t agree = 0;
  for (int c = 0; c < k; ++c) {
    ClusterSummary s;
    s.cluster = c;
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < M; ++i) {
      if (km.assignment[i] == c) {
        ++counts[proj.true_labels[i]];
        ++s.size;
      }
    }
    std::size_t top = 0;
    for (const auto& [label, n] : counts) {
      if (n > top) {
        top = n;
        s.majority_label = label;
      }
    }
    s.purity = s.size == 0 ? 0.0 : static_cast<double>(top) / static_cast<double>(s.size);
    agree += top;
    for (std::size_t i = 0; i < M; ++i) {
      if (km.assignment[i] == c && proj.predicted_labels[i] != s.majority_label) s.misclassified.push_back(i);
    }
    rep.clusters.push_back(std::move(s));
  }
  rep.purity = static_cast<double>(agree) / static_cast<double>(M);
  proj.purity = rep.purity;
  return rep;
}

inline nlohmann::json to_json(const ClusterReport& r, const LatentProjection& p) {
  nlohmann::json clusters = nlohmann::json::array();
  auto label = [&](int l) {
    return static_cast<std::size_t>(l) < p.label_names.size() ? p.label_names[static_cast<std::size_t>(l)]
                                                              : std::to_string(l);
  };
  for (const auto& c : r.clusters) {
    nlohmann::json mis = nlohmann::json::array();
    for (auto i : c.misclassified) {
      mis.push_back({{"id", i < p.case_ids.size() ? p.case_ids[i] : std::to_string(i)},
                     {"true", label(p.true_labels[i])},
                     {"predicted", label(p.predicted_labels[i])}});
    }
    clusters.push_back({{"cluster", c.cluster},
                        {"size", c.size},
                        {"majority", label(c.majority_label)},
                        {"purity", c.purity},
                        {"misclassified", mis}});
  }
  return {{"k", r.k}, {"purity", r.purity}, {"inertia", r.inertia}, {"silhouette", r.silhouette}, {"clusters", clusters}};
}

// id,x,y,true,predicted,cluster
inline std::string to_csv(const LatentProjection& p) {
  auto label = [&](int l) {
    return static_cast<std::size_t>(l) < p.label_names.size() ? p.label_names[static_cast<std::size_t>(l)]
                                                              : std::to_string(l);
  };
  std::string out = "id,x,y,true,predicted,cluster\n";
  for (Eigen::Index i = 0; i < p.coords.rows(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    out += (u < p.case_ids.size() ? p.case_ids[u] : std::to_string(i)) + "," + format_double(p.coords(i, 0)) + "," +
           format_double(p.coords(i, 1)) + "," + label(p.true_labels[u]) + "," + label(p.predicted_labels[u]) + "," +
           std::to_string(p.cluster[u]) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search over the hidden width

struct AeGridRow {
  Eigen::Index n1 = 0;
  double mse = 0.0;
  double silhouette = 0.0;
  bool best = false;
};

struct AeGridResult {
  std::vector<AeGridRow> table;  // ranked
  std::vector<Autoencoder> models;
  std::vector<LatentProjection> projections;
};

// One autoencoder per candidate width (seed derived from the width), ranked
// by silhouette of a k-means clustering of its projection, then MSE, then
// width.
inline AeGridResult grid_search_ae(const ActivationMatrix& acts, const std::vector<Eigen::Index>& candidates,
                                   const AutoencoderOptions& base, int k, int threads = 1) {
  if (candidates.empty()) throw DomainError("autoencoder grid is empty");
  const std::size_t n = candidates.size();
  std::vector<Autoencoder> models(n);
  std::vector<LatentProjection> projections(n);
  std::vector<AeGridRow> rows(n);
  parallel_for(n, threads, [&](std::size_t i) {
    AutoencoderOptions opt = base;
    opt.n1 = candidates[i];
    opt.seed = derive_seed(base.seed, static_cast<std::uint64_t>(candidates[i]));
    models[i] = fit_autoencoder(acts.values, opt);
    projections[i] = make_projection(models[i], acts);
    const auto rep = analyze_misclassifications(projections[i], k, base.seed);
    rows[i] = AeGridRow{candidates[i], models[i].final_mse, rep.silhouette, false};
  });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].silhouette != rows[b].silhouette) return rows[a].silhouette > rows[b].silhouette;
    if (rows[a].mse != rows[b].mse) return rows[a].mse < rows[b].mse;
    return rows[a].n1 < rows[b].n1;
  });
  AeGridResult out;
  for (auto i : order) {
    out.table.push_back(rows[i]);
    out.models.push_back(std::move(models[i]));
    out.projections.push_back(std::move(projections[i]));
  }
  out.table.front().best = true;
  return out;
}

inline nlohmann::json to_json(const std::vector<AeGridRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"n1", r.n1}, {"mse", r.mse}, {"silhouette", r.silhouette}, {"best", r.best}});
  }
  return out;
}

}  // namespace xlog
