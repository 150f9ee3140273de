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

#include "xlog/latent.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support/sequences.hpp"
#include "xlog/synth.hpp"

namespace xlog {
namespace {

// Textbook silhouette, written from the definition.
double SilhouetteOracle(const Matrix& x, const Labels& a) {
  const auto n = static_cast<std::size_t>(x.rows());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, std::pair<double, int>> per;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      auto& [d, c] = per[a[j]];
      d += std::sqrt(std::pow(x(static_cast<Eigen::Index>(i), 0) - x(static_cast<Eigen::Index>(j), 0), 2) +
                     std::pow(x(static_cast<Eigen::Index>(i), 1) - x(static_cast<Eigen::Index>(j), 1), 2));
      ++c;
    }
    if (per.count(a[i]) == 0) continue;
    const double ai = per[a[i]].first / per[a[i]].second;
    double bi = 1e300;
    for (const auto& [label, dc] : per) {
      if (label != a[i]) bi = std::min(bi, dc.first / dc.second);
    }
    sum += (bi - ai) / std::max(ai, bi);
  }
  return sum / static_cast<double>(n);
}

ActivationMatrix Wrap(const Matrix& values) {
  ActivationMatrix a;
  a.values = values;
  a.true_labels.assign(static_cast<std::size_t>(values.rows()), 0);
  a.predicted_labels = a.true_labels;
  a.label_names = {"only"};
  for (Eigen::Index i = 0; i < values.rows(); ++i) a.case_ids.push_back("r" + std::to_string(i));
  return a;
}

TEST(Autoencoder, ShapesMirror) {
  const auto ae = make_autoencoder(7, 4, 3);
  EXPECT_EQ(ae.W1.rows(), 4);
  EXPECT_EQ(ae.W1.cols(), 7);
  EXPECT_EQ(ae.W2.rows(), 2);
  EXPECT_EQ(ae.W3.cols(), 2);
  EXPECT_EQ(ae.W4.rows(), 7);
  EXPECT_EQ(ae.W4.cols(), 4);
  EXPECT_THROW(make_autoencoder(7, 1, 3), DomainError);
}

TEST(Autoencoder, GradientMatchesCentralDifferences) {
  Rng rng(5);
  Matrix x(9, 5);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1, 1);
  auto ae = make_autoencoder(5, 3, 11);
  ae.b1.setConstant(0.1);
  ae.b3.setConstant(-0.2);
  const auto g = ae_gradient(ae, x);
  const double eps = 1e-6;
  double worst = 0.0;
  auto check = [&](Matrix& p, const Matrix& gp) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double keep = p(i, j);
        p(i, j) = keep + eps;
        const double up = reconstruction_mse(ae, x);
        p(i, j) = keep - eps;
        const double down = reconstruction_mse(ae, x);
        p(i, j) = keep;
        const double num = (up - down) / (2 * eps);
        worst = std::max(worst, std::abs(num - gp(i, j)) / std::max({std::abs(num), std::abs(gp(i, j)), 1e-6}));
      }
    }
  };
  auto check_vec = [&](Vector& p, const Vector& gp) {
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double keep = p(k);
      p(k) = keep + eps;
      const double up = reconstruction_mse(ae, x);
      p(k) = keep - eps;
      const double down = reconstruction_mse(ae, x);
      p(k) = keep;
      const double num = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(num - gp(k)) / std::max({std::abs(num), std::abs(gp(k)), 1e-6}));
    }
  };
  check(ae.W1, g.W1);
  check(ae.W2, g.W2);
  check(ae.W3, g.W3);
  check(ae.W4, g.W4);
  check_vec(ae.b1, g.b1);
  check_vec(ae.b2, g.b2);
  check_vec(ae.b3, g.b3);
  check_vec(ae.b4, g.b4);
  EXPECT_LT(worst, 1e-5);
}

TEST(Autoencoder, TwoFactorDataReconstructs) {
  const Matrix x = two_factor_matrix(120, 10, 4);
  AutoencoderOptions opt;
  opt.n1 = 8;
  opt.seed = 1;
  const auto ae = fit_autoencoder(x, opt);
  EXPECT_FALSE(ae.diverged);
  EXPECT_FALSE(ae.no_improvement);
  EXPECT_LT(ae.final_mse, 1e-3);
  EXPECT_EQ(ae.curve.size(), static_cast<std::size_t>(opt.epochs) + 1);
}

TEST(Autoencoder, ZeroLearningRateKeepsCurveConstant) {
  const Matrix x = two_factor_matrix(30, 6, 2);
  AutoencoderOptions opt;
  opt.learning_rate = 0.0;
  opt.epochs = 25;
  const auto ae = fit_autoencoder(x, opt);
  for (double v : ae.curve) EXPECT_EQ(v, ae.curve.front());
  EXPECT_TRUE(ae.no_improvement);
}

TEST(Autoencoder, CurveIsNearlyMonotone) {
  const Matrix x = blob_activations(BlobSpec{}, 3).values;
  AutoencoderOptions opt;
  opt.epochs = 800;
  const auto ae = fit_autoencoder(x, opt);
  for (std::size_t e = 1; e < ae.curve.size(); ++e) EXPECT_LE(ae.curve[e], ae.curve[e - 1] * 1.05) << "epoch " << e;
  EXPECT_LT(ae.final_mse, ae.curve.front());
}

TEST(Autoencoder, DeterministicUnderSeed) {
  const Matrix x = two_factor_matrix(40, 6, 8);
  AutoencoderOptions opt;
  opt.epochs = 50;
  opt.seed = 9;
  const auto a = fit_autoencoder(x, opt);
  const auto b = fit_autoencoder(x, opt);
  EXPECT_EQ(a.curve, b.curve);
  EXPECT_EQ(a.W1, b.W1);
  opt.seed = 10;
  EXPECT_NE(fit_autoencoder(x, opt).W1, a.W1);
}

TEST(Autoencoder, DivergenceRestoresLastFiniteState) {
  const Matrix x = two_factor_matrix(20, 4, 1) * 1e3;
  AutoencoderOptions opt;
  opt.learning_rate = 1e12;
  opt.epochs = 50;
  const auto ae = fit_autoencoder(x, opt);
  EXPECT_TRUE(ae.diverged);
  EXPECT_TRUE(std::isfinite(ae.final_mse));
  EXPECT_TRUE(ae.W1.allFinite());
  EXPECT_EQ(reconstruction_mse(ae, x), ae.final_mse);
}

TEST(Project, FiniteAndPure) {
  Matrix x = two_factor_matrix(25, 6, 3);
  x.row(7) = x.row(3);
  AutoencoderOptions opt;
  opt.epochs = 30;
  const auto ae = fit_autoencoder(x, opt);
  const Matrix p = project(ae, x);
  EXPECT_EQ(p.rows(), 25);
  EXPECT_EQ(p.cols(), 2);
  EXPECT_TRUE(p.allFinite());
  EXPECT_EQ(p.row(7), p.row(3));
  EXPECT_EQ(project(ae, x), p);
  EXPECT_THROW(project(ae, Matrix::Zero(3, 5)), ShapeError);
}

TEST(Project, SeparatedBlobsStaySeparated) {
  BlobSpec spec;
  spec.plant_outlier = false;
  const auto acts = blob_activations(spec, 12);
  AutoencoderOptions opt;
  opt.seed = 2;
  const auto ae = fit_autoencoder(acts.values, opt);
  const Matrix p = project(ae, acts.values);
  EXPECT_GT(silhouette(p, acts.true_labels), 0.5);
}

TEST(Silhouette, MatchesOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(15, 2);
    Labels a(15);
    for (Eigen::Index i = 0; i < 15; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
      a[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3));
    }
    EXPECT_NEAR(silhouette(x, a), SilhouetteOracle(x, a), 1e-12);
  }
}

TEST(Silhouette, SingleClusterScoresZero) {
  EXPECT_EQ(silhouette(Matrix::Ones(4, 2), Labels(4, 0)), 0.0);
}

TEST(KMeans, InertiaMatchesAssignment) {
  const auto acts = blob_activations(BlobSpec{}, 1);
  const auto r = kmeans(acts.values, 3, 7);
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < acts.values.rows(); ++i) {
    const Vector d = acts.values.row(i) - r.centers.row(r.assignment[static_cast<std::size_t>(i)]);
    inertia += d.squaredNorm();
  }
  EXPECT_NEAR(inertia, r.inertia, 1e-9);
  // Each point is at its nearest center.
  for (Eigen::Index i = 0; i < acts.values.rows(); ++i) {
    const int own = r.assignment[static_cast<std::size_t>(i)];
    for (int c = 0; c < 3; ++c) {
      EXPECT_LE((acts.values.row(i) - r.centers.row(own)).squaredNorm(),
                (acts.values.row(i) - r.centers.row(c)).squaredNorm() + 1e-12);
    }
  }
}

TEST(KMeans, BestOfRestartsBeatsEverySingleRestart) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(40, 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
    }
    const std::uint64_t seed = 100 + static_cast<std::uint64_t>(trial);
    const auto best = kmeans(x, 4, seed, 20);
    for (std::uint64_t r = 0; r < 20; ++r) EXPECT_LE(best.inertia, kmeans_single(x, 4, seed + r).inertia);
    EXPECT_EQ(kmeans(x, 4, seed, 20, 3).assignment, best.assignment);
  }
}

TEST(KMeans, RejectsBadK) {
  const Matrix x = Matrix::Zero(3, 2);
  EXPECT_THROW(kmeans(x, 4, 0), DomainError);
  EXPECT_THROW(kmeans(x, 0, 0), DomainError);
  EXPECT_NO_THROW(kmeans(x, 3, 0));
}

LatentProjection ProjectionOf(const ActivationMatrix& acts) {
  LatentProjection p;
  p.coords = acts.values;
  p.true_labels = acts.true_labels;
  p.predicted_labels = acts.predicted_labels;
  p.case_ids = acts.case_ids;
  p.label_names = acts.label_names;
  return p;
}

TEST(Misclassifications, SeparatedBlobsArePure) {
  BlobSpec spec;
  spec.dim = 2;
  spec.center_scale = 5.0;
  spec.noise_sd = 0.1;
  spec.plant_outlier = false;
  auto proj = ProjectionOf(blob_activations(spec, 6));
  const auto rep = analyze_misclassifications(proj, 3);
  EXPECT_EQ(rep.purity, 1.0);
  EXPECT_EQ(proj.purity, 1.0);
  for (const auto& c : rep.clusters) EXPECT_TRUE(c.misclassified.empty());
  std::set<int> used(proj.cluster.begin(), proj.cluster.end());
  EXPECT_LE(used.size(), 3U);
}

TEST(Misclassifications, PlantedOutlierIsListed) {
  BlobSpec spec;
  spec.dim = 2;
  spec.center_scale = 5.0;
  spec.noise_sd = 0.1;
  auto proj = ProjectionOf(blob_activations(spec, 6));
  const std::size_t outlier = proj.case_ids.size() - 1;
  ASSERT_EQ(proj.case_ids[outlier], "outlier");
  const auto rep = analyze_misclassifications(proj, 3);
  const auto& home = rep.clusters[static_cast<std::size_t>(proj.cluster[outlier])];
  EXPECT_EQ(home.majority_label, 1);
  EXPECT_EQ(home.misclassified, std::vector<std::size_t>{outlier});
  const auto j = to_json(rep, proj);
  EXPECT_EQ(j["k"], 3);
}

TEST(Misclassifications, SingleClusterPurityIsMajorityFraction) {
  auto proj = ProjectionOf(blob_activations(BlobSpec{3, 10, 2, 1.0, 0.1, true}, 2));
  const auto rep = analyze_misclassifications(proj, 1);
  // 11 rows of class 0 (including the outlier) out of 31.
  EXPECT_DOUBLE_EQ(rep.purity, 11.0 / 31.0);
  EXPECT_THROW(analyze_misclassifications(proj, 32), DomainError);
  EXPECT_THROW(analyze_misclassifications(proj, 0), DomainError);
}

TEST(Projection, CsvHasOneLinePerRow) {
  auto proj = ProjectionOf(blob_activations(BlobSpec{2, 3, 2, 1.0, 0.1, false}, 2));
  analyze_misclassifications(proj, 2);
  const std::string csv = to_csv(proj);
  EXPECT_EQ(csv.rfind("id,x,y,true,predicted,cluster\n", 0), 0U);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(GridSearch, SingleCandidateGivesOneRow) {
  const auto acts = Wrap(two_factor_matrix(30, 5, 1));
  AutoencoderOptions opt;
  opt.epochs = 20;
  const auto r = grid_search_ae(acts, {4}, opt, 2);
  ASSERT_EQ(r.table.size(), 1U);
  EXPECT_TRUE(r.table[0].best);
  EXPECT_EQ(r.projections.size(), 1U);
}

TEST(GridSearch, TwoFactorDataRanksBySilhouette) {
  const auto acts = Wrap(two_factor_matrix(80, 10, 3));
  AutoencoderOptions opt;
  opt.seed = 4;
  const auto r = grid_search_ae(acts, {4, 8, 16}, opt, 3, 2);
  ASSERT_EQ(r.table.size(), 3U);
  for (const auto& row : r.table) EXPECT_LT(row.mse, 2e-3) << "n1 = " << row.n1;
  for (std::size_t i = 1; i < r.table.size(); ++i) EXPECT_GE(r.table[i - 1].silhouette, r.table[i].silhouette);
  EXPECT_TRUE(r.table[0].best);
  const auto again = grid_search_ae(acts, {4, 8, 16}, opt, 3, 1);
  EXPECT_EQ(to_json(again.table), to_json(r.table));
  EXPECT_THROW(grid_search_ae(acts, {}, opt, 3), DomainError);
}

TEST(Capture, FeedsAutoencoder) {
  Rng rng(3);
  const auto ds = testing::random_sequences(rng, 12, 4, 3);
  SeqNetConfig cfg;
  cfg.nodes = 6;
  cfg.epochs = 2;
  auto m = make_seqnet(ds, cfg);
  train(m, ds);
  const auto acts = capture_activations(m, ds);
  AutoencoderOptions opt;
  opt.epochs = 10;
  const auto ae = fit_autoencoder(acts.values, opt);
  auto proj = make_projection(ae, acts);
  EXPECT_EQ(proj.coords.rows(), 12);
  EXPECT_EQ(proj.true_labels, ds.Y);
}

}  // namespace
}  // namespace xlog
