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

// Small sequence classifier with exact backpropagation.
//
// Stack: per-feature embedding (categorical) or raw value (numeric), then one
// of {mean pooling, LSTM, BiLSTM}, then dense(nodes, ReLU), then softmax.
// The recurrent summary is the hidden state at the last real step, so padded
// steps are never evaluated. All parameters live in one flat vector; named
// blocks view into it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xlog/container.hpp"
#include "xlog/core.hpp"
#include "xlog/encode.hpp"

namespace xlog {

enum class Arch { kDense, kLstm, kBiLstm };

inline std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::kDense: return "dense";
    case Arch::kLstm: return "lstm";
    case Arch::kBiLstm: return "bilstm";
  }
  return "dense";
}

inline Arch parse_arch(const std::string& name) {
  if (name == "dense") return Arch::kDense;
  if (name == "lstm") return Arch::kLstm;
  if (name == "bilstm") return Arch::kBiLstm;
  throw DomainError("unknown architecture '" + name + "' (expected dense, lstm or bilstm)");
}

struct SeqNetConfig {
  Arch arch = Arch::kLstm;
  int nodes = 20;
  int epochs = 200;
  double learning_rate = 0.5;
  int batch_size = 32;
  double clip_norm = 5.0;
  int embed_dim = 8;
  std::uint64_t seed = 0;
  int threads = 1;
};

inline nlohmann::json to_json(const SeqNetConfig& c) {
  return {{"arch", to_string(c.arch)},  {"nodes", c.nodes},           {"epochs", c.epochs},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"clip_norm", c.clip_norm},
          {"embed_dim", c.embed_dim},   {"seed", c.seed}};
}

inline SeqNetConfig seqnet_config_from_json(const nlohmann::json& j) {
  SeqNetConfig c;
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.nodes = j.at("nodes").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

struct ParamBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

struct SeqNetModel {
  SeqNetConfig config;
  int n_classes = 0;
  std::size_t n_features = 0;
  std::vector<bool> categorical;
  std::vector<int> cardinality;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  std::size_t input_dim = 0;  // width of one embedded step
  std::vector<ParamBlock> blocks;
  std::vector<std::size_t> embedding_block;  // per feature; index into blocks, unused for numeric
  std::vector<double> theta;
  std::vector<EpochRecord> curve;
  bool diverged = false;
  int last_good_epoch = 0;

  const ParamBlock& block(const std::string& name) const {
    for (const auto& b : blocks) {
      if (b.name == name) return b;
    }
    throw DomainError("no parameter block '" + name + "'");
  }
  bool has_block(const std::string& name) const {
    return std::any_of(blocks.begin(), blocks.end(), [&](const ParamBlock& b) { return b.name == name; });
  }
  Eigen::Map<const Matrix> param(const std::string& name) const {
    const auto& b = block(name);
    return Eigen::Map<const Matrix>(theta.data() + b.offset, b.rows, b.cols);
  }
  Eigen::Map<Matrix> param(const std::string& name) {
    const auto& b = block(name);
    return Eigen::Map<Matrix>(theta.data() + b.offset, b.rows, b.cols);
  }
  // Width of the recurrent (or pooled) summary fed to the dense layer.
  std::size_t summary_width() const {
    switch (config.arch) {
      case Arch::kDense: return input_dim;
      case Arch::kLstm: return static_cast<std::size_t>(config.nodes);
      case Arch::kBiLstm: return 2 * static_cast<std::size_t>(config.nodes);
    }
    return 0;
  }
};

// ---------------------------------------------------------------------------
// LSTM cell

// Gate rows of W are stacked as [i; f; o; g], each H rows, and W multiplies
// the concatenation [x; h_prev].
struct LSTMCellParams {
  Matrix W;  // 4H x (D + H)
  Vector b;  // 4H
  Eigen::Index hidden() const { return W.rows() / 4; }
};

struct CellState {
  Vector c;
  Vector h;
};

namespace detail {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Writes post-activation gates (i, f, o, g stacked) and the new state.
template <typename WMat, typename BVec>
void lstm_forward_step(const WMat& W, const BVec& b, const Vector& x, const Vector& h_prev, const Vector& c_prev,
                       Vector& gates, Vector& c, Vector& h) {
  const Eigen::Index H = h_prev.size();
  const Eigen::Index D = x.size();
  gates = b;
  gates.noalias() += W.leftCols(D) * x;
  gates.noalias() += W.rightCols(H) * h_prev;
  for (Eigen::Index k = 0; k < 3 * H; ++k) gates[k] = sigmoid(gates[k]);
  for (Eigen::Index k = 3 * H; k < 4 * H; ++k) gates[k] = std::tanh(gates[k]);
  c = gates.segment(H, H).cwiseProduct(c_prev) + gates.head(H).cwiseProduct(gates.segment(3 * H, H));
  h = gates.segment(2 * H, H).cwiseProduct(c.array().tanh().matrix());
}

}  // namespace detail

inline CellState lstm_step(const LSTMCellParams& params, const Vector& x, const CellState& prev) {
  const Eigen::Index H = params.hidden();
  if (params.W.rows() != 4 * H || params.b.size() != 4 * H || params.W.cols() != x.size() + H ||
      prev.c.size() != H || prev.h.size() != H) {
    throw ShapeError("lstm_step: inconsistent shapes");
  }
  if (!x.allFinite() || !prev.c.allFinite() || !prev.h.allFinite()) {
    throw NumericError("lstm_step: non-finite input");
  }
  CellState next;
  Vector gates;
  detail::lstm_forward_step(params.W, params.b, x, prev.h, prev.c, gates, next.c, next.h);
  return next;
}

// ---------------------------------------------------------------------------
// Construction

inline std::string embedding_block_name(const SeqNetModel& m, std::size_t feature) {
  return "embedding/" + std::to_string(feature) + ":" + m.feature_names[feature];
}

// Builds an untrained model whose input contract matches `data`.
inline SeqNetModel make_seqnet(const SequenceDataset& data, const SeqNetConfig& config, int n_classes = -1) {
  if (config.nodes < 1) throw DomainError("nodes must be >= 1");
  if (config.embed_dim < 1) throw DomainError("embed_dim must be >= 1");
  SeqNetModel m;
  m.config = config;
  m.n_classes = n_classes > 0 ? n_classes : static_cast<int>(data.label_names.size());
  if (m.n_classes < 2) m.n_classes = std::max(2, count_classes(data.Y));
  m.n_features = data.F;
  m.categorical = data.categorical;
  m.cardinality = data.cardinality;
  m.feature_names = data.feature_names;
  m.label_names = data.label_names;

  std::size_t offset = 0;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    m.blocks.push_back(ParamBlock{std::move(name), rows, cols, offset});
    offset += static_cast<std::size_t>(rows * cols);
  };
  const auto E = static_cast<Eigen::Index>(config.embed_dim);
  const auto H = static_cast<Eigen::Index>(config.nodes);
  for (std::size_t f = 0; f < data.F; ++f) {
    m.embedding_block.push_back(m.blocks.size());
    if (m.categorical[f]) {
      add(embedding_block_name(m, f), std::max(1, m.cardinality[f]), E);
      m.input_dim += static_cast<std::size_t>(E);
    } else {
      m.input_dim += 1;
    }
  }
  const auto D = static_cast<Eigen::Index>(m.input_dim);
  if (config.arch != Arch::kDense) {
    add("lstm/W", 4 * H, D + H);
    add("lstm/b", 4 * H, 1);
  }
  if (config.arch == Arch::kBiLstm) {
    add("lstm_bwd/W", 4 * H, D + H);
    add("lstm_bwd/b", 4 * H, 1);
  }
  const auto S = static_cast<Eigen::Index>(m.summary_width());
  add("dense/W", H, S);
  add("dense/b", H, 1);
  add("output/W", m.n_classes, H);
  add("output/b", m.n_classes, 1);
  m.theta.assign(offset, 0.0);

  // Weights ~ U(-1/sqrt(fan_in), +), embeddings ~ U(-1/sqrt(E), +), biases 0
  // except the LSTM forget gate, which starts at 1.
  Rng rng(derive_seed(config.seed, 0));
  for (const auto& b : m.blocks) {
    double* p = m.theta.data() + b.offset;
    const bool is_bias = b.name.size() >= 2 && b.name.compare(b.name.size() - 2, 2, "/b") == 0;
    if (is_bias) {
      if (b.name.rfind("lstm", 0) == 0) std::fill(p + H, p + 2 * H, 1.0);
      continue;
    }
    const double r = b.name.rfind("embedding/", 0) == 0 ? 1.0 / std::sqrt(static_cast<double>(E))
                                                          : 1.0 / std::sqrt(static_cast<double>(b.cols));
    for (std::size_t i = 0; i < b.size(); ++i) p[i] = rng.uniform(-r, r);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward for one case

namespace detail {

struct DirectionTrace {
  std::vector<Vector> gates, c, h;  // per processed step, in processing order
};

struct CaseTrace {
  std::size_t len = 0;
  std::vector<Vector> x;  // embedded steps 0..len-1
  DirectionTrace fwd, bwd;
  Vector summary, z1, a1, logits, prob;
};

inline void check_features(const SeqNetModel& m, const SequenceDataset& data) {
  if (data.F != m.n_features) {
    throw ShapeError("sequence batch has " + std::to_string(data.F) + " features, model expects " +
                     std::to_string(m.n_features));
  }
}

inline Vector embed_step(const SeqNetModel& m, const double* raw) {
  Vector x(static_cast<Eigen::Index>(m.input_dim));
  Eigen::Index pos = 0;
  const auto E = static_cast<Eigen::Index>(m.config.embed_dim);
  for (std::size_t f = 0; f < m.n_features; ++f) {
    if (m.categorical[f]) {
      const auto& b = m.blocks[m.embedding_block[f]];
      const Eigen::Map<const Matrix> table(m.theta.data() + b.offset, b.rows, b.cols);
      auto idx = static_cast<Eigen::Index>(raw[f]);
      if (idx < 0 || idx >= table.rows()) idx = 0;  // unknown token
      x.segment(pos, E) = table.row(idx).transpose();
      pos += E;
    } else {
      x[pos++] = raw[f];
    }
  }
  return x;
}

inline void run_direction(const SeqNetModel& m, const std::string& prefix, const std::vector<Vector>& xs,
                          bool reverse, DirectionTrace& trace) {
  const auto W = m.param(prefix + "/W");
  const auto b = m.param(prefix + "/b").col(0);
  const auto H = static_cast<Eigen::Index>(m.config.nodes);
  Vector h = Vector::Zero(H), c = Vector::Zero(H);
  const std::size_t n = xs.size();
  trace.gates.resize(n);
  trace.c.resize(n);
  trace.h.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    Vector c_new, h_new;
    lstm_forward_step(W, b, xs[t], h, c, trace.gates[k], c_new, h_new);
    c = c_new;
    h = h_new;
    trace.c[k] = c;
    trace.h[k] = h;
  }
}

inline void forward_case(const SeqNetModel& m, const SequenceDataset& data, std::size_t row, CaseTrace& tr) {
  tr.len = data.length(row);
  tr.x.clear();
  for (std::size_t t = 0; t < tr.len; ++t) tr.x.push_back(embed_step(m, data.step(row, t)));
  const auto H = static_cast<Eigen::Index>(m.config.nodes);
  switch (m.config.arch) {
    case Arch::kDense: {
      tr.summary = Vector::Zero(static_cast<Eigen::Index>(m.input_dim));
      for (const auto& x : tr.x) tr.summary += x;
      if (tr.len > 0) tr.summary /= static_cast<double>(tr.len);
      break;
    }
    case Arch::kLstm: {
      run_direction(m, "lstm", tr.x, false, tr.fwd);
      tr.summary = tr.len > 0 ? tr.fwd.h.back() : Vector::Zero(H);
      break;
    }
    case Arch::kBiLstm: {
      run_direction(m, "lstm", tr.x, false, tr.fwd);
      run_direction(m, "lstm_bwd", tr.x, true, tr.bwd);
      tr.summary = Vector::Zero(2 * H);
      if (tr.len > 0) {
        tr.summary.head(H) = tr.fwd.h.back();
        tr.summary.tail(H) = tr.bwd.h.back();
      }
      break;
    }
  }
  tr.z1 = m.param("dense/W") * tr.summary + m.param("dense/b").col(0);
  tr.a1 = tr.z1.cwiseMax(0.0);
  tr.logits = m.param("output/W") * tr.a1 + m.param("output/b").col(0);
  const double top = tr.logits.maxCoeff();
  tr.prob = (tr.logits.array() - top).exp().matrix();
  tr.prob /= tr.prob.sum();
}

inline double case_loss(const CaseTrace& tr, int label) {
  const double top = tr.logits.maxCoeff();
  const double lse = top + std::log((tr.logits.array() - top).exp().sum());
  return lse - tr.logits[label];
}

// Fault injection for mutation tests of the gradient checker.
struct BackwardFault {
  double forget_gate_scale = 1.0;
};

// Backpropagates through one direction. dh_last is the gradient w.r.t. the
// final processed hidden state; gradients w.r.t. inputs go to dx.
inline void backward_direction(const SeqNetModel& m, const std::string& prefix, const std::vector<Vector>& xs,
                               bool reverse, const DirectionTrace& tr, const Vector& dh_last,
                               std::vector<double>& grad, std::vector<Vector>& dx, const BackwardFault& fault) {
  const auto W = m.param(prefix + "/W");
  const auto& bw = m.block(prefix + "/W");
  const auto& bb = m.block(prefix + "/b");
  Eigen::Map<Matrix> dW(grad.data() + bw.offset, bw.rows, bw.cols);
  Eigen::Map<Vector> db(grad.data() + bb.offset, bb.rows);
  const auto H = static_cast<Eigen::Index>(m.config.nodes);
  const auto D = static_cast<Eigen::Index>(m.input_dim);
  const std::size_t n = xs.size();
  Vector dh = dh_last;
  Vector dc = Vector::Zero(H);
  Vector da(4 * H);
  for (std::size_t kk = n; kk-- > 0;) {
    const std::size_t t = reverse ? n - 1 - kk : kk;
    const Vector& gates = tr.gates[kk];
    const auto i = gates.segment(0, H).array();
    const auto f = gates.segment(H, H).array();
    const auto o = gates.segment(2 * H, H).array();
    const auto g = gates.segment(3 * H, H).array();
    const Eigen::ArrayXd tc = tr.c[kk].array().tanh();
    const Eigen::ArrayXd c_prev = kk > 0 ? Eigen::ArrayXd(tr.c[kk - 1].array()) : Eigen::ArrayXd::Zero(H);
    const Vector h_prev = kk > 0 ? tr.h[kk - 1] : Vector(Vector::Zero(H));
    dc.array() += dh.array() * o * (1.0 - tc * tc);
    da.segment(0, H) = (dc.array() * g * i * (1.0 - i)).matrix();
    da.segment(H, H) = (dc.array() * c_prev * f * (1.0 - f) * fault.forget_gate_scale).matrix();
    da.segment(2 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
    da.segment(3 * H, H) = (dc.array() * i * (1.0 - g * g)).matrix();
    dW.leftCols(D).noalias() += da * xs[t].transpose();
    dW.rightCols(H).noalias() += da * h_prev.transpose();
    db += da;
    dx[t].noalias() += W.leftCols(D).transpose() * da;
    dh.noalias() = W.rightCols(H).transpose() * da;
    dc = (dc.array() * f).matrix();
  }
}

// Adds d(scale * loss)/d(theta) for one case into grad.
inline void backward_case(const SeqNetModel& m, const SequenceDataset& data, std::size_t row, const CaseTrace& tr,
                          int label, double scale, std::vector<double>& grad, const BackwardFault& fault = {}) {
  Vector dlogits = tr.prob * scale;
  dlogits[label] -= scale;
  {
    const auto& bw = m.block("output/W");
    const auto& bb = m.block("output/b");
    Eigen::Map<Matrix>(grad.data() + bw.offset, bw.rows, bw.cols).noalias() += dlogits * tr.a1.transpose();
    Eigen::Map<Vector>(grad.data() + bb.offset, bb.rows) += dlogits;
  }
  Vector dz1 = m.param("output/W").transpose() * dlogits;
  for (Eigen::Index k = 0; k < dz1.size(); ++k) {
    if (tr.z1[k] <= 0.0) dz1[k] = 0.0;
  }
  {
    const auto& bw = m.block("dense/W");
    const auto& bb = m.block("dense/b");
    Eigen::Map<Matrix>(grad.data() + bw.offset, bw.rows, bw.cols).noalias() += dz1 * tr.summary.transpose();
    Eigen::Map<Vector>(grad.data() + bb.offset, bb.rows) += dz1;
  }
  const Vector ds = m.param("dense/W").transpose() * dz1;
  if (tr.len == 0) return;

  std::vector<Vector> dx(tr.len, Vector::Zero(static_cast<Eigen::Index>(m.input_dim)));
  const auto H = static_cast<Eigen::Index>(m.config.nodes);
  switch (m.config.arch) {
    case Arch::kDense:
      for (auto& v : dx) v = ds / static_cast<double>(tr.len);
      break;
    case Arch::kLstm:
      backward_direction(m, "lstm", tr.x, false, tr.fwd, ds, grad, dx, fault);
      break;
    case Arch::kBiLstm:
      backward_direction(m, "lstm", tr.x, false, tr.fwd, ds.head(H), grad, dx, fault);
      backward_direction(m, "lstm_bwd", tr.x, true, tr.bwd, ds.tail(H), grad, dx, fault);
      break;
  }

  const auto E = static_cast<Eigen::Index>(m.config.embed_dim);
  for (std::size_t t = 0; t < tr.len; ++t) {
    const double* raw = data.step(row, t);
    Eigen::Index pos = 0;
    for (std::size_t f = 0; f < m.n_features; ++f) {
      if (!m.categorical[f]) {
        ++pos;
        continue;
      }
      const auto& b = m.blocks[m.embedding_block[f]];
      auto idx = static_cast<Eigen::Index>(raw[f]);
      if (idx < 0 || idx >= b.rows) idx = 0;
      Eigen::Map<Vector>(grad.data() + b.offset + static_cast<std::size_t>(idx * b.cols), E) += dx[t].segment(pos, E);
      pos += E;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inference and evaluation

inline Matrix predict_proba(const SeqNetModel& m, const SequenceDataset& data, int threads = 1) {
  detail::check_features(m, data);
  Matrix out(static_cast<Eigen::Index>(data.M), m.n_classes);
  parallel_for(data.M, threads, [&](std::size_t r) {
    detail::CaseTrace tr;
    detail::forward_case(m, data, r, tr);
    out.row(static_cast<Eigen::Index>(r)) = tr.prob.transpose();
  });
  return out;
}

inline Labels predict(const SeqNetModel& m, const SequenceDataset& data, int threads = 1) {
  return argmax_rows(predict_proba(m, data, threads));
}

// Mean cross-entropy of the model on the given rows (all rows if empty).
inline double mean_loss(const SeqNetModel& m, const SequenceDataset& data, int threads = 1) {
  detail::check_features(m, data);
  std::vector<double> losses(data.M);
  parallel_for(data.M, threads, [&](std::size_t r) {
    detail::CaseTrace tr;
    detail::forward_case(m, data, r, tr);
    losses[r] = detail::case_loss(tr, data.Y[r]);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return data.M == 0 ? 0.0 : total / static_cast<double>(data.M);
}

struct EvalReport {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  std::vector<std::string> label_names;
};

inline EvalReport evaluate(const SeqNetModel& m, const SequenceDataset& data, int threads = 1) {
  detail::check_features(m, data);
  EvalReport rep;
  rep.label_names = m.label_names;
  const auto C = static_cast<std::size_t>(m.n_classes);
  rep.confusion.assign(C, std::vector<int>(C, 0));
  std::vector<double> losses(data.M);
  Labels pred(data.M);
  parallel_for(data.M, threads, [&](std::size_t r) {
    detail::CaseTrace tr;
    detail::forward_case(m, data, r, tr);
    losses[r] = detail::case_loss(tr, data.Y[r]);
    pred[r] = argmax(tr.prob.data(), C);
  });
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < data.M; ++r) {
    ++rep.confusion[static_cast<std::size_t>(data.Y[r])][static_cast<std::size_t>(pred[r])];
    hits += pred[r] == data.Y[r];
    total += losses[r];
  }
  if (data.M > 0) {
    rep.accuracy = static_cast<double>(hits) / static_cast<double>(data.M);
    rep.loss = total / static_cast<double>(data.M);
  }
  return rep;
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"accuracy", r.accuracy}, {"loss", r.loss}, {"confusion", r.confusion}, {"labels", r.label_names}};
}

// ---------------------------------------------------------------------------
// Training

// Gradient of the mean cross-entropy over `rows` (all rows if empty).
inline std::vector<double> loss_gradient(const SeqNetModel& m, const SequenceDataset& data,
                                         const std::vector<std::size_t>& rows = {}, int threads = 1,
                                         const detail::BackwardFault& fault = {}) {
  detail::check_features(m, data);
  std::vector<std::size_t> use = rows;
  if (use.empty()) {
    use.resize(data.M);
    std::iota(use.begin(), use.end(), std::size_t{0});
  }
  const double scale = 1.0 / static_cast<double>(use.size());
  // Per-case buffers summed in row order keep the result thread-count free.
  std::vector<std::vector<double>> parts(use.size());
  parallel_for(use.size(), threads, [&](std::size_t k) {
    parts[k].assign(m.theta.size(), 0.0);
    detail::CaseTrace tr;
    detail::forward_case(m, data, use[k], tr);
    detail::backward_case(m, data, use[k], tr, data.Y[use[k]], scale, parts[k], fault);
  });
  std::vector<double> grad(m.theta.size(), 0.0);
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += p[i];
  }
  return grad;
}

struct TrainResult {
  bool diverged = false;
  int last_good_epoch = 0;  // epochs completed with finite loss
};

// Mini-batch gradient descent with global-norm clipping. If the loss or the
// parameters become non-finite, parameters revert to the last good epoch
// and training stops.
inline TrainResult train(SeqNetModel& m, const SequenceDataset& data, const SequenceDataset* validation = nullptr) {
  const auto& cfg = m.config;
  if (cfg.epochs < 1) throw DomainError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw DomainError("batch_size must be >= 1");
  detail::check_features(m, data);
  if (data.M == 0) throw DomainError("cannot train on an empty dataset");
  TrainResult result;
  std::vector<double> good = m.theta;
  std::vector<std::size_t> order(data.M);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    bool finite = true;
    for (std::size_t start = 0; start < order.size() && finite; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
      std::vector<double> grad = loss_gradient(m, data, batch, cfg.threads);
      double norm_sq = 0.0;
      for (double g : grad) norm_sq += g * g;
      if (!std::isfinite(norm_sq)) {
        finite = false;
        break;
      }
      const double norm = std::sqrt(norm_sq);
      const double clip = cfg.clip_norm > 0.0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      for (std::size_t i = 0; i < grad.size(); ++i) m.theta[i] -= cfg.learning_rate * clip * grad[i];
    }
    EpochRecord rec;
    rec.epoch = epoch;
    if (finite) {
      const auto ev = evaluate(m, data, cfg.threads);
      rec.train_loss = ev.loss;
      rec.train_accuracy = ev.accuracy;
      finite = std::isfinite(ev.loss);
    }
    if (!finite) {
      m.theta = good;
      result.diverged = true;
      break;
    }
    if (validation != nullptr) {
      const auto ev = evaluate(m, *validation, cfg.threads);
      rec.val_loss = ev.loss;
      rec.val_accuracy = ev.accuracy;
    }
    m.curve.push_back(rec);
    good = m.theta;
    result.last_good_epoch = epoch;
  }
  m.diverged = result.diverged;
  m.last_good_epoch = result.last_good_epoch;
  return result;
}

// ---------------------------------------------------------------------------
// Gradient check

struct BlockCheck {
  std::string name;
  std::size_t coordinates = 0;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::vector<BlockCheck> blocks;
};

struct GradCheckOptions {
  std::size_t min_coordinates = 50;
  std::size_t per_block = 12;
  std::uint64_t seed = 0;
  std::string block_filter;  // substring; empty checks every block
  detail::BackwardFault fault;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// Compares the analytic gradient of the mean cross-entropy on `batch` with
// central differences over a sample of coordinates from every block.
// Embedding samples are drawn from rows the batch actually uses.
inline GradCheckReport grad_check(const SeqNetModel& model, const SequenceDataset& batch, double epsilon,
                                  const GradCheckOptions& opt = {}) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw DomainError("grad_check epsilon must be in (0, 1e-2]");
  SeqNetModel m = model;
  const std::vector<double> analytic = loss_gradient(m, batch, {}, 1, opt.fault);

  std::vector<const ParamBlock*> chosen;
  for (const auto& b : m.blocks) {
    if (opt.block_filter.empty() || b.name.find(opt.block_filter) != std::string::npos) chosen.push_back(&b);
  }
  const std::size_t per_block =
      std::max(opt.per_block, chosen.empty() ? 0 : (opt.min_coordinates + chosen.size() - 1) / chosen.size());

  GradCheckReport report;
  Rng rng(opt.seed);
  for (const ParamBlock* b : chosen) {
    std::vector<std::size_t> candidates;
    if (b->name.rfind("embedding/", 0) == 0) {
      const std::size_t feature = std::stoul(b->name.substr(10));
      std::set<Eigen::Index> used;
      for (std::size_t r = 0; r < batch.M; ++r) {
        for (std::size_t t = 0; t < batch.length(r); ++t) {
          auto idx = static_cast<Eigen::Index>(batch.at(r, t, feature));
          used.insert(idx < 0 || idx >= b->rows ? 0 : idx);
        }
      }
      for (auto row : used) {
        for (Eigen::Index c = 0; c < b->cols; ++c) candidates.push_back(static_cast<std::size_t>(row * b->cols + c));
      }
    } else {
      candidates.resize(b->size());
      std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    }
    rng.shuffle(candidates);
    if (candidates.size() > per_block) candidates.resize(per_block);
    std::sort(candidates.begin(), candidates.end());

    BlockCheck bc{b->name, candidates.size(), 0.0};
    for (std::size_t local : candidates) {
      const std::size_t i = b->offset + local;
      const double saved = m.theta[i];
      m.theta[i] = saved + epsilon;
      const double up = mean_loss(m, batch);
      m.theta[i] = saved - epsilon;
      const double down = mean_loss(m, batch);
      m.theta[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      bc.max_relative_error = std::max(bc.max_relative_error, relative_error(analytic[i], numeric));
    }
    report.max_relative_error = std::max(report.max_relative_error, bc.max_relative_error);
    report.coordinates += bc.coordinates;
    report.blocks.push_back(bc);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Activations

struct ActivationMatrix {
  Matrix values;
  int layer = 0;
  Labels true_labels;
  Labels predicted_labels;
  std::vector<std::string> case_ids;
  std::vector<std::string> label_names;
};

enum class Direction { kForward, kBackward };

namespace detail {

inline ActivationMatrix capture(const SeqNetModel& m, const SequenceDataset& data, int layer,
                                std::optional<Direction> direction, int threads) {
  check_features(m, data);
  if (layer < 0 || layer > 1) {
    throw DomainError("layer " + std::to_string(layer) + " out of range (0 = recurrent summary, 1 = dense)");
  }
  if (direction && m.config.arch != Arch::kBiLstm && *direction == Direction::kBackward) {
    throw DomainError("backward direction requested on a unidirectional model");
  }
  const auto H = static_cast<Eigen::Index>(m.config.nodes);
  Eigen::Index width = layer == 1 ? H : static_cast<Eigen::Index>(m.summary_width());
  if (direction && layer == 0 && m.config.arch == Arch::kBiLstm) width = H;
  ActivationMatrix out;
  out.layer = layer;
  out.values.resize(static_cast<Eigen::Index>(data.M), width);
  out.true_labels = data.Y;
  out.predicted_labels.resize(data.M);
  out.case_ids = data.case_ids;
  out.label_names = m.label_names;
  parallel_for(data.M, threads, [&](std::size_t r) {
    CaseTrace tr;
    forward_case(m, data, r, tr);
    const auto row = static_cast<Eigen::Index>(r);
    if (layer == 1) {
      out.values.row(row) = tr.a1.transpose();
    } else if (direction && m.config.arch == Arch::kBiLstm) {
      out.values.row(row) = (*direction == Direction::kForward ? tr.summary.head(H) : tr.summary.tail(H)).transpose();
    } else {
      out.values.row(row) = tr.summary.transpose();
    }
    out.predicted_labels[r] = argmax(tr.prob.data(), static_cast<std::size_t>(tr.prob.size()));
  });
  return out;
}

}  // namespace detail

// Layer 0 is the recurrent summary (last real hidden state; both directions
// concatenated for BiLSTM; the pooled input for the dense baseline). Layer 1
// is the dense hidden layer.
inline ActivationMatrix capture_activations(const SeqNetModel& m, const SequenceDataset& data, int layer = 0,
                                            int threads = 1) {
  return detail::capture(m, data, layer, std::nullopt, threads);
}

inline ActivationMatrix capture_direction(const SeqNetModel& m, const SequenceDataset& data, Direction direction,
                                          int threads = 1) {
  return detail::capture(m, data, 0, direction, threads);
}

// ---------------------------------------------------------------------------
// Grid search

struct SeqGridPoint {
  Arch arch = Arch::kLstm;
  int nodes = 20;
  int epochs = 200;
};

struct SeqGridRow {
  SeqGridPoint point;
  double accuracy = 0.0;
  double loss = 0.0;
  bool diverged = false;
  bool best = false;
};

// "arch:nodes:epochs", e.g. "lstm:20:200".
inline SeqGridPoint parse_grid_point(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw DomainError("grid point '" + text + "' is not arch:nodes:epochs");
  try {
    return SeqGridPoint{parse_arch(parts[0]), std::stoi(parts[1]), std::stoi(parts[2])};
  } catch (const std::logic_error&) {
    throw DomainError("grid point '" + text + "' has non-integer nodes or epochs");
  }
}

// Trains each point on the train split and scores it on the test split.
// Rows are ranked by accuracy descending, then loss ascending; the first
// row is flagged best.
inline std::vector<SeqGridRow> grid_search(const std::vector<SeqGridPoint>& space, const SequenceDataset& data,
                                           const Split& split, const SeqNetConfig& base,
                                           std::vector<SeqNetModel>* models = nullptr) {
  if (space.empty()) throw DomainError("grid search space is empty");
  const auto train_set = data.subset(split.train);
  const auto test_set = data.subset(split.test);
  std::vector<SeqGridRow> rows(space.size());
  std::vector<SeqNetModel> trained(space.size());
  for (std::size_t k = 0; k < space.size(); ++k) {
    SeqNetConfig cfg = base;
    cfg.arch = space[k].arch;
    cfg.nodes = space[k].nodes;
    cfg.epochs = space[k].epochs;
    SeqNetModel m = make_seqnet(data, cfg);
    const auto res = train(m, train_set, &test_set);
    const auto ev = evaluate(m, test_set, cfg.threads);
    rows[k] = SeqGridRow{space[k], ev.accuracy, ev.loss, res.diverged, false};
    trained[k] = std::move(m);
  }
  std::vector<std::size_t> order(space.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].accuracy != rows[b].accuracy) return rows[a].accuracy > rows[b].accuracy;
    return rows[a].loss < rows[b].loss;
  });
  std::vector<SeqGridRow> ranked;
  for (auto k : order) ranked.push_back(rows[k]);
  ranked.front().best = true;
  if (models != nullptr) {
    models->clear();
    for (auto k : order) models->push_back(std::move(trained[k]));
  }
  return ranked;
}

inline nlohmann::json to_json(const std::vector<SeqGridRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"architecture", to_string(r.point.arch)},
                   {"nodes", r.point.nodes},
                   {"epochs", r.point.epochs},
                   {"accuracy", r.accuracy},
                   {"loss", r.loss},
                   {"diverged", r.diverged},
                   {"best", r.best}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json manifest(const SeqNetModel& m) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& r : m.curve) {
    nlohmann::json e = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"train_accuracy", r.train_accuracy}};
    if (r.val_loss) e["val_loss"] = *r.val_loss;
    if (r.val_accuracy) e["val_accuracy"] = *r.val_accuracy;
    curve.push_back(e);
  }
  return {{"kind", "seqnet"},
          {"config", to_json(m.config)},
          {"n_classes", m.n_classes},
          {"n_features", m.n_features},
          {"categorical", m.categorical},
          {"cardinality", m.cardinality},
          {"feature_names", m.feature_names},
          {"label_names", m.label_names},
          {"diverged", m.diverged},
          {"last_good_epoch", m.last_good_epoch},
          {"curve", curve}};
}

inline Container to_container(const SeqNetModel& m) {
  Container c;
  for (const auto& b : m.blocks) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(b.rows), static_cast<std::uint64_t>(b.cols)};
    t.data.assign(m.theta.begin() + static_cast<std::ptrdiff_t>(b.offset),
                  m.theta.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size()));
    c.tensors[b.name] = std::move(t);
  }
  c.meta = manifest(m);
  return c;
}

inline SeqNetModel seqnet_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "seqnet") throw FormatError("XLG1: not a seqnet checkpoint");
  const auto& j = c.meta;
  SequenceDataset shape;
  shape.F = j.at("n_features").get<std::size_t>();
  shape.categorical = j.at("categorical").get<std::vector<bool>>();
  shape.cardinality = j.at("cardinality").get<std::vector<int>>();
  shape.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  shape.label_names = j.at("label_names").get<std::vector<std::string>>();
  SeqNetModel m = make_seqnet(shape, seqnet_config_from_json(j.at("config")), j.at("n_classes").get<int>());
  for (const auto& b : m.blocks) {
    const Tensor& t = c.at(b.name);
    if (t.data.size() != b.size()) throw FormatError("XLG1: block '" + b.name + "' has the wrong size");
    std::copy(t.data.begin(), t.data.end(), m.theta.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
  m.diverged = j.value("diverged", false);
  m.last_good_epoch = j.value("last_good_epoch", 0);
  for (const auto& e : j.at("curve")) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<int>();
    r.train_loss = e.at("train_loss").get<double>();
    r.train_accuracy = e.at("train_accuracy").get<double>();
    if (e.contains("val_loss")) r.val_loss = e.at("val_loss").get<double>();
    if (e.contains("val_accuracy")) r.val_accuracy = e.at("val_accuracy").get<double>();
    m.curve.push_back(r);
  }
  return m;
}

// epoch,train_loss,train_accuracy,val_loss,val_accuracy
inline std::string curve_csv(const SeqNetModel& m) {
  std::string out = "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  for (const auto& r : m.curve) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.train_accuracy) + ",";
    out += (r.val_loss ? format_double(*r.val_loss) : "") + ",";
    out += (r.val_accuracy ? format_double(*r.val_accuracy) : "") + "\n";
  }
  return out;
}

}  // namespace xlog
