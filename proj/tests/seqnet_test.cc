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

#include "xlog/seqnet.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "support/oracles.hpp"
#include "support/sequences.hpp"

namespace xlog {
namespace {

using testing::random_sequences;
using testing::sequence_shell;
using testing::set_step;

SeqNetConfig Config(Arch arch, int nodes = 5, std::uint64_t seed = 1) {
  SeqNetConfig c;
  c.arch = arch;
  c.nodes = nodes;
  c.epochs = 1;
  c.embed_dim = 3;
  c.seed = seed;
  return c;
}

// Class is the first activity token (1 or 2); later steps are noise.
SequenceDataset FirstTokenToy(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  auto ds = sequence_shell(2 * per_class, 5, 2);
  for (std::size_t m = 0; m < ds.M; ++m) {
    const int label = static_cast<int>(m % 2);
    set_step(ds, m, 0, 1.0 + label, 1, 0.5);
    const std::size_t len = 2 + rng.below(4);
    for (std::size_t t = 1; t < len; ++t) set_step(ds, m, t, 3.0 + static_cast<double>(rng.below(3)), 1 + rng.below(3), rng.uniform());
    ds.Y[m] = label;
  }
  return ds;
}

TEST(LstmStep, ZeroWeightsGiveZeroState) {
  LSTMCellParams p{Matrix::Zero(8, 5), Vector::Zero(8)};
  const CellState next = lstm_step(p, Vector::Ones(3), CellState{Vector::Zero(2), Vector::Zero(2)});
  EXPECT_EQ(next.c, Vector::Zero(2));
  EXPECT_EQ(next.h, Vector::Zero(2));
}

TEST(LstmStep, HandComputedScalarCell) {
  LSTMCellParams p{Matrix(4, 2), Vector(4)};
  p.W << 0.5, -0.3, 0.8, 0.2, -0.4, 0.6, 1.2, -0.7;
  p.b << 0.1, -0.2, 0.3, 0.05;
  Vector x(1), c(1), h(1);
  x << 0.7;
  c << -0.5;
  h << 0.2;
  const CellState next = lstm_step(p, x, CellState{c, h});
  EXPECT_NEAR(next.c[0], 0.079384502, 1e-8);
  EXPECT_NEAR(next.h[0], 0.042377198, 1e-8);
}

TEST(LstmStep, SaturatedGatesKeepMemory) {
  Rng rng(5);
  const int H = 3, D = 4;
  LSTMCellParams p{Matrix::Zero(4 * H, D + H), Vector::Zero(4 * H)};
  for (Eigen::Index r = 0; r < p.W.rows(); ++r)
    for (Eigen::Index k = 0; k < p.W.cols(); ++k) p.W(r, k) = rng.uniform(-1, 1);
  // Zero the input/forget rows so the saturating biases decide those gates.
  p.W.topRows(2 * H).setZero();
  p.b.segment(0, H).setConstant(-800.0);
  p.b.segment(H, H).setConstant(800.0);
  CellState s{Vector::Random(H), Vector::Zero(H)};
  const Vector c0 = s.c;
  for (int t = 0; t < 50; ++t) {
    Vector x(D);
    for (int k = 0; k < D; ++k) x[k] = rng.normal();
    s = lstm_step(p, x, s);
  }
  EXPECT_EQ(s.c, c0);
}

TEST(LstmStep, RejectsBadInput) {
  LSTMCellParams p{Matrix::Zero(8, 5), Vector::Zero(8)};
  Vector x = Vector::Ones(3);
  x[1] = std::nan("");
  EXPECT_THROW(lstm_step(p, x, CellState{Vector::Zero(2), Vector::Zero(2)}), NumericError);
  EXPECT_THROW(lstm_step(p, Vector::Ones(2), CellState{Vector::Zero(2), Vector::Zero(2)}), ShapeError);
}

TEST(Forward, DeterministicAndNormalised) {
  Rng rng(2);
  const auto data = random_sequences(rng, 20, 6, 3);
  for (Arch arch : {Arch::kDense, Arch::kLstm, Arch::kBiLstm}) {
    const auto a = make_seqnet(data, Config(arch));
    const auto b = make_seqnet(data, Config(arch));
    const Matrix pa = predict_proba(a, data);
    EXPECT_EQ(pa, predict_proba(b, data));
    EXPECT_EQ(pa, predict_proba(a, data, 3));
    for (Eigen::Index r = 0; r < pa.rows(); ++r) EXPECT_NEAR(pa.row(r).sum(), 1.0, 1e-9);
  }
}

TEST(Forward, PaddingDoesNotChangeOutput) {
  Rng rng(3);
  const auto data = random_sequences(rng, 15, 5, 3);
  for (Arch arch : {Arch::kDense, Arch::kLstm, Arch::kBiLstm}) {
    const auto m = make_seqnet(data, Config(arch));
    EXPECT_EQ(predict_proba(m, data), predict_proba(m, data.with_window(10)));
  }
}

TEST(Forward, FeatureCountMismatchThrows) {
  Rng rng(3);
  auto data = random_sequences(rng, 4, 5, 2);
  const auto m = make_seqnet(data, Config(Arch::kLstm));
  data.F = 2;
  EXPECT_THROW(predict_proba(m, data), ShapeError);
}

TEST(Forward, PalindromeWithTiedWeightsGivesEqualDirections) {
  auto data = sequence_shell(1, 5, 2);
  const double tokens[] = {1, 3, 5, 3, 1};
  for (std::size_t t = 0; t < 5; ++t) set_step(data, 0, t, tokens[t], 2, 0.25 * static_cast<double>(t == 1 || t == 3));
  auto m = make_seqnet(data, Config(Arch::kBiLstm));
  m.param("lstm_bwd/W") = m.param("lstm/W");
  m.param("lstm_bwd/b") = m.param("lstm/b");
  const auto fwd = capture_direction(m, data, Direction::kForward);
  const auto bwd = capture_direction(m, data, Direction::kBackward);
  EXPECT_EQ(fwd.values, bwd.values);
}

TEST(Capture, WidthsAndConcatenation) {
  Rng rng(4);
  const auto data = random_sequences(rng, 8, 4, 2);
  EXPECT_EQ(capture_activations(make_seqnet(data, Config(Arch::kLstm, 20)), data).values.cols(), 20);
  const auto bi = make_seqnet(data, Config(Arch::kBiLstm, 20));
  const auto both = capture_activations(bi, data);
  ASSERT_EQ(both.values.cols(), 40);
  EXPECT_EQ(both.values.leftCols(20), capture_direction(bi, data, Direction::kForward).values);
  EXPECT_EQ(both.values.rightCols(20), capture_direction(bi, data, Direction::kBackward).values);
  EXPECT_EQ(capture_activations(bi, data, 1).values.cols(), 20);
  EXPECT_THROW(capture_activations(bi, data, 2), DomainError);
  EXPECT_THROW(capture_activations(bi, data, -1), DomainError);
}

TEST(Capture, IdenticalRowsGiveIdenticalActivations) {
  Rng rng(4);
  auto data = random_sequences(rng, 2, 4, 2);
  std::copy_n(&data.X[0], data.T * data.F, &data.X[data.T * data.F]);
  std::copy_n(&data.mask[0], data.T, &data.mask[data.T]);
  const auto acts = capture_activations(make_seqnet(data, Config(Arch::kLstm)), data);
  EXPECT_EQ(acts.values.row(0), acts.values.row(1));
}

class GradCheckTest : public ::testing::TestWithParam<Arch> {};

TEST_P(GradCheckTest, AnalyticMatchesFiniteDifferences) {
  Rng rng(6);
  const auto data = random_sequences(rng, 6, 5, 3);
  const auto m = make_seqnet(data, Config(GetParam(), 4, 9));
  const auto report = grad_check(m, data, 1e-5);
  EXPECT_GE(report.coordinates, 50u);
  for (const auto& b : report.blocks) EXPECT_LT(b.max_relative_error, 1e-4) << b.name;
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, GradCheckTest,
                         ::testing::Values(Arch::kDense, Arch::kLstm, Arch::kBiLstm),
                         [](const auto& info) { return to_string(info.param); });

TEST(GradCheck, DetectsCorruptedForgetGate) {
  Rng rng(6);
  const auto data = random_sequences(rng, 6, 5, 3);
  const auto m = make_seqnet(data, Config(Arch::kLstm, 4, 9));
  GradCheckOptions opt;
  opt.fault.forget_gate_scale = 1.5;
  opt.block_filter = "lstm/";
  EXPECT_GT(grad_check(m, data, 1e-5, opt).max_relative_error, 1e-2);
}

TEST(GradCheck, RejectsBadEpsilon) {
  Rng rng(6);
  const auto data = random_sequences(rng, 2, 3, 2);
  const auto m = make_seqnet(data, Config(Arch::kLstm));
  EXPECT_THROW(grad_check(m, data, 0.0), DomainError);
  EXPECT_THROW(grad_check(m, data, 0.1), DomainError);
}

TEST(Gradient, UnusedEmbeddingRowsHaveZeroGradient) {
  Rng rng(7);
  auto data = random_sequences(rng, 5, 4, 2);
  // Token 5 of the first feature never occurs.
  for (std::size_t m = 0; m < data.M; ++m)
    for (std::size_t t = 0; t < data.T; ++t)
      if (data.at(m, t, 0) == 5.0) data.at(m, t, 0) = 4.0;
  const auto model = make_seqnet(data, Config(Arch::kBiLstm));
  const auto grad = loss_gradient(model, data);
  const auto& b = model.blocks[model.embedding_block[0]];
  for (Eigen::Index c = 0; c < b.cols; ++c) EXPECT_EQ(grad[b.offset + static_cast<std::size_t>(5 * b.cols + c)], 0.0);
}

TEST(Gradient, IndependentOfThreadCount) {
  Rng rng(7);
  const auto data = random_sequences(rng, 9, 4, 2);
  const auto model = make_seqnet(data, Config(Arch::kLstm));
  EXPECT_EQ(loss_gradient(model, data, {}, 1), loss_gradient(model, data, {}, 4));
}

TEST(Train, FirstTokenToyIsLearned) {
  const auto data = FirstTokenToy(20, 3);
  auto cfg = Config(Arch::kLstm, 8);
  cfg.epochs = 200;
  auto m = make_seqnet(data, cfg);
  const auto res = train(m, data);
  EXPECT_FALSE(res.diverged);
  ASSERT_EQ(m.curve.size(), 200u);
  EXPECT_EQ(m.curve.back().train_accuracy, 1.0);
}

TEST(Train, ZeroLearningRateChangesNothing) {
  Rng rng(8);
  const auto data = random_sequences(rng, 10, 4, 2);
  auto cfg = Config(Arch::kBiLstm);
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  auto m = make_seqnet(data, cfg);
  const auto before = m.theta;
  train(m, data);
  EXPECT_EQ(m.theta, before);
  EXPECT_EQ(m.curve[0].train_loss, m.curve[2].train_loss);
}

TEST(Train, DeterministicUnderSeed) {
  const auto data = FirstTokenToy(10, 4);
  auto cfg = Config(Arch::kLstm);
  cfg.epochs = 5;
  auto a = make_seqnet(data, cfg);
  auto b = make_seqnet(data, cfg);
  cfg.threads = 3;
  auto c = make_seqnet(data, cfg);
  train(a, data);
  train(b, data);
  train(c, data);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.theta, c.theta);
}

TEST(Train, DivergenceRestoresLastGoodParameters) {
  Rng rng(8);
  const auto data = random_sequences(rng, 10, 4, 2);
  auto cfg = Config(Arch::kLstm);
  cfg.epochs = 4;
  cfg.learning_rate = 1e308;
  cfg.clip_norm = 0.0;
  auto m = make_seqnet(data, cfg);
  const auto before = m.theta;
  const auto res = train(m, data);
  EXPECT_TRUE(res.diverged);
  EXPECT_EQ(res.last_good_epoch, 0);
  EXPECT_EQ(m.theta, before);
}

TEST(Train, ValidationCurveRecorded) {
  const auto data = FirstTokenToy(6, 5);
  auto cfg = Config(Arch::kDense);
  cfg.epochs = 2;
  auto m = make_seqnet(data, cfg);
  train(m, data, &data);
  ASSERT_TRUE(m.curve[1].val_loss.has_value());
  EXPECT_EQ(*m.curve[1].val_loss, m.curve[1].train_loss);
}

TEST(Evaluate, ConfusionRowsMatchClassCounts) {
  Rng rng(9);
  const auto data = random_sequences(rng, 30, 4, 3);
  const auto rep = evaluate(make_seqnet(data, Config(Arch::kLstm)), data);
  int trace = 0;
  for (int c = 0; c < 3; ++c) {
    int row = 0;
    for (int v : rep.confusion[static_cast<std::size_t>(c)]) row += v;
    EXPECT_EQ(row, std::count(data.Y.begin(), data.Y.end(), c));
    trace += rep.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  }
  EXPECT_DOUBLE_EQ(rep.accuracy, trace / 30.0);
  EXPECT_GE(rep.loss, 0.0);
}

TEST(GridSearch, SinglePointEqualsDirectTraining) {
  const auto data = FirstTokenToy(10, 6);
  Split split;
  for (std::size_t i = 0; i < data.M; ++i) (i % 5 == 0 ? split.test : split.train).push_back(i);
  auto cfg = Config(Arch::kLstm, 6);
  cfg.epochs = 3;
  const auto table = grid_search({{Arch::kLstm, 6, 3}}, data, split, cfg);
  ASSERT_EQ(table.size(), 1u);
  EXPECT_TRUE(table[0].best);
  auto m = make_seqnet(data, cfg);
  train(m, data.subset(split.train));
  const auto ev = evaluate(m, data.subset(split.test));
  EXPECT_EQ(table[0].accuracy, ev.accuracy);
  EXPECT_EQ(table[0].loss, ev.loss);
}

TEST(GridSearch, TableTwoConfigurationsRankedByAccuracyThenLoss) {
  const auto data = FirstTokenToy(6, 7);
  Split split;
  for (std::size_t i = 0; i < data.M; ++i) (i % 4 == 0 ? split.test : split.train).push_back(i);
  const std::vector<SeqGridPoint> space = {parse_grid_point("dense:25:30"), parse_grid_point("lstm:20:200"),
                                           parse_grid_point("bilstm:20:150")};
  SeqNetConfig base;
  base.embed_dim = 3;
  const auto table = grid_search(space, data, split, base);
  ASSERT_EQ(table.size(), 3u);
  EXPECT_TRUE(table[0].best);
  for (std::size_t k = 1; k < table.size(); ++k) {
    EXPECT_FALSE(table[k].best);
    EXPECT_TRUE(table[k - 1].accuracy > table[k].accuracy ||
                (table[k - 1].accuracy == table[k].accuracy && table[k - 1].loss <= table[k].loss));
  }
  EXPECT_THROW(grid_search({}, data, split, base), DomainError);
  EXPECT_THROW(parse_grid_point("lstm:20"), DomainError);
  EXPECT_THROW(parse_grid_point("gru:20:5"), DomainError);
}

TEST(Checkpoint, ContainerRoundTrip) {
  const auto data = FirstTokenToy(5, 8);
  auto cfg = Config(Arch::kBiLstm);
  cfg.epochs = 2;
  auto m = make_seqnet(data, cfg);
  train(m, data, &data);
  std::stringstream buf;
  write_container(buf, to_container(m));
  const auto back = seqnet_from_container(read_container(buf));
  EXPECT_EQ(back.theta, m.theta);
  EXPECT_EQ(predict_proba(back, data), predict_proba(m, data));
  EXPECT_EQ(curve_csv(back), curve_csv(m));
  EXPECT_EQ(manifest(back).dump(), manifest(m).dump());
}

}  // namespace
}  // namespace xlog
