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

// xlog: ingest, train, explain, project, synth and bench.
//
// Every subcommand reads `key = value` settings from --config and lets
// command-line flags override them. The merged settings are hashed into the
// provenance stamp of every artifact. --out and --threads are not part of
// the hash: they change where and how fast, never what.

#include <cmath>
#include <deque>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "acceptance/criteria.hpp"
#include "xlog/xlog.hpp"

namespace fs = std::filesystem;
using namespace xlog;

namespace {

constexpr int kExitFailure = 1;  // bench: some criterion failed
constexpr int kExitError = 2;

struct Setting {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

// A subcommand whose options double as config keys.
class Command {
 public:
  Command(CLI::App& app, std::string name, const std::string& about)
      : name_(std::move(name)), app_(app.add_subcommand(name_, about)) {}

  CLI::Option* add(const std::string& key, const std::string& help) {
    auto& s = settings_.emplace_back(Setting{key, {}, nullptr});
    s.option = app_->add_option("--" + key, s.value, help);
    return s.option;
  }

  RunConfig resolve(const RunConfig& file) const {
    RunConfig cfg = file;
    cfg.set("command", name_);
    for (const auto& s : settings_) {
      if (s.option->count() > 0) cfg.set(s.key, s.value);
    }
    return cfg;
  }

  CLI::App* app() const { return app_; }
  bool parsed() const { return app_->parsed(); }

 private:
  std::string name_;
  CLI::App* app_;
  std::deque<Setting> settings_;
};

struct Globals {
  std::string out = "xlog_out";
  int threads = 1;
};

std::string require(const RunConfig& cfg, const std::string& key) {
  if (!cfg.has(key) || cfg.get(key).empty()) throw Error("missing required setting '" + key + "'");
  return cfg.get(key);
}

std::uint64_t seed_of(const RunConfig& cfg) {
  const long long s = cfg.get_int("seed", 0);
  if (s < 0) throw DomainError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) {
    item = csv::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string file_stem(const std::string& text) {
  std::string out;
  for (char c : text) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out;
}

void put_container(ArtifactSet& set, const std::string& name, Container c) {
  c.meta["provenance"] = set.provenance().to_json();
  std::ostringstream bytes;
  write_container(bytes, c);
  set.raw(name, bytes.str());
}

std::vector<std::string> categorical_fields(const EncodeOptions& eo) {
  std::vector<std::string> out;
  for (const auto* list : {&eo.dynamic_features, &eo.static_features}) {
    for (const auto& f : *list) {
      if (field_info(f).categorical) out.push_back(f);
    }
  }
  return out;
}

int label_index(const std::vector<std::string>& names, const std::string& label) {
  auto it = std::find(names.begin(), names.end(), label);
  if (it == names.end()) throw DomainError("unknown class '" + label + "'");
  return static_cast<int>(it - names.begin());
}

// ---------------------------------------------------------------------------
// Encoded dataset written by `ingest`.

struct Workspace {
  SequenceDataset seq;
  FlatDataset flat;
  Vocabulary vocab;
  nlohmann::json meta;
  Split split;
  std::uint64_t seed = 0;  // --seed, else the seed recorded at ingest
  std::vector<std::string> flat_fields;  // logical field of each flat column
};

Workspace load_workspace(const RunConfig& cfg) {
  const fs::path dir = require(cfg, "data");
  Workspace w;
  w.seq = sequence_from_container(load_container((dir / "sequences.xlg").string()));
  w.flat = flatten(w.seq);
  auto vocab = nlohmann::json::parse(read_file(dir / "vocab.json"));
  vocab.erase("provenance");
  w.vocab = vocabulary_from_json(vocab);
  w.meta = nlohmann::json::parse(read_file(dir / "dataset.json"));
  const double recorded_fraction = w.meta.at("split").at("fraction").get<double>();
  const auto recorded_seed = w.meta.at("split").at("seed").get<std::uint64_t>();
  const double fraction = cfg.get_double("split", recorded_fraction);
  const auto seed = cfg.has("seed") ? seed_of(cfg) : recorded_seed;
  w.seed = seed;
  if (fraction != recorded_fraction || seed != recorded_seed) {
    std::cerr << "note: split differs from the one used at ingest; numeric scaling was fit on the ingest split\n";
  }
  w.split = stratified_split(w.seq.Y, fraction, seed, w.seq.label_names);
  for (std::size_t t = 0; t < w.seq.T; ++t) {
    for (std::size_t f = 0; f < w.seq.F; ++f) {
      if (std::find(w.seq.static_features.begin(), w.seq.static_features.end(), f) == w.seq.static_features.end()) {
        w.flat_fields.push_back(w.seq.fields[f]);
      }
    }
  }
  for (auto f : w.seq.static_features) w.flat_fields.push_back(w.seq.fields[f]);
  return w;
}

std::size_t row_of(const Workspace& w, const std::string& case_id) {
  auto it = std::find(w.flat.case_ids.begin(), w.flat.case_ids.end(), case_id);
  if (it == w.flat.case_ids.end()) throw DomainError("unknown case id '" + case_id + "'");
  return static_cast<std::size_t>(it - w.flat.case_ids.begin());
}

// Rebuilds sequences from flattened rows. A step is real while any of its
// dynamic categorical tokens is non-zero; at least one step is kept.
SequenceDataset unflatten(const Matrix& x, const SequenceDataset& shape) {
  SequenceDataset ds = shape;
  ds.M = static_cast<std::size_t>(x.rows());
  ds.X.assign(ds.M * ds.T * ds.F, 0.0);
  ds.mask.assign(ds.M * ds.T, 0);
  ds.Y.assign(ds.M, 0);
  ds.case_ids.assign(ds.M, "");
  std::vector<std::size_t> dyn;
  for (std::size_t f = 0; f < ds.F; ++f) {
    if (std::find(ds.static_features.begin(), ds.static_features.end(), f) == ds.static_features.end()) dyn.push_back(f);
  }
  const auto static_base = static_cast<Eigen::Index>(ds.T * dyn.size());
  for (std::size_t m = 0; m < ds.M; ++m) {
    const auto r = static_cast<Eigen::Index>(m);
    std::size_t length = 0;
    for (std::size_t t = 0; t < ds.T; ++t) {
      bool any_token = false, has_token_feature = false;
      for (std::size_t k = 0; k < dyn.size(); ++k) {
        if (!ds.categorical[dyn[k]]) continue;
        has_token_feature = true;
        any_token = any_token || x(r, static_cast<Eigen::Index>(t * dyn.size() + k)) != 0.0;
      }
      if (has_token_feature && !any_token) break;
      ++length;
    }
    length = std::max<std::size_t>(length, 1);
    for (std::size_t t = 0; t < length; ++t) {
      ds.mask[m * ds.T + t] = 1;
      for (std::size_t k = 0; k < dyn.size(); ++k) ds.at(m, t, dyn[k]) = x(r, static_cast<Eigen::Index>(t * dyn.size() + k));
      for (std::size_t s = 0; s < ds.static_features.size(); ++s) {
        ds.at(m, t, ds.static_features[s]) = x(r, static_base + static_cast<Eigen::Index>(s));
      }
    }
  }
  return ds;
}

// Black box over flattened rows: a forest checkpoint or a sequence model.
struct BlackBox {
  std::string kind;
  std::optional<ForestModel> forest;
  std::optional<SeqNetModel> net;
  Predictor predict;
};

BlackBox load_black_box(const RunConfig& cfg, const Workspace& w, int threads) {
  const fs::path dir = require(cfg, "model-dir");
  BlackBox b;
  if (fs::exists(dir / "forest.json")) {
    b.kind = "forest";
    b.forest = forest_from_json(nlohmann::json::parse(read_file(dir / "forest.json")));
    if (b.forest->n_features != static_cast<int>(w.flat.X.cols())) {
      throw ShapeError("forest expects " + std::to_string(b.forest->n_features) + " features, dataset has " +
                       std::to_string(w.flat.X.cols()));
    }
    const ForestModel* f = &*b.forest;
    b.predict = [f, threads](const Matrix& x) { return predict_proba(*f, x, threads); };
  } else if (fs::exists(dir / "model.xlg")) {
    b.net = seqnet_from_container(load_container((dir / "model.xlg").string()));
    b.kind = to_string(b.net->config.arch);
    const SeqNetModel* m = &*b.net;
    const SequenceDataset* shape = &w.seq;
    b.predict = [m, shape, threads](const Matrix& x) { return predict_proba(*m, unflatten(x, *shape), threads); };
  } else {
    throw Error("no forest.json or model.xlg in " + dir.string());
  }
  return b;
}

FeatureInfoView feature_info(const Workspace& w) {
  FeatureInfoView info{w.flat.feature_names, w.flat.categorical, {}};
  info.decode = [&w](std::size_t col, double value) -> std::string {
    const auto& field = w.flat_fields.at(col);
    const auto pos = w.vocab.feature_position(field);
    const auto idx = static_cast<int>(std::lround(value));
    if (idx <= 0 || idx >= w.vocab.cardinality(pos)) return "<none>";
    return w.vocab.decode(pos, idx);
  };
  return info;
}

LimeOptions lime_options(const RunConfig& cfg) {
  LimeOptions o;
  o.K = static_cast<std::size_t>(cfg.get_int("K", 10));
  o.n_samples = static_cast<std::size_t>(cfg.get_int("samples", 5000));
  if (cfg.has("sigma")) o.sigma = cfg.get_double("sigma", 0.0);
  const auto sel = cfg.get("selection", "forward");
  if (sel == "lasso") {
    o.selection = Selection::kLasso;
  } else if (sel != "forward") {
    throw DomainError("selection must be forward or lasso");
  }
  return o;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_ingest(const RunConfig& cfg, const Globals& g) {
  const auto seed = seed_of(cfg);
  ArtifactSet set(g.out, Provenance::of(cfg, seed));
  const Schema schema = cfg.has("schema") ? Schema::load(cfg.get("schema")) : Schema::hospital_log();
  const auto log = parse_log(require(cfg, "csv"), schema);
  const auto min_class = cfg.get_int("min-class", 30);
  if (min_class < 1) throw DomainError("min-class must be >= 1");
  const auto [clean, report] = clean_log(log, static_cast<std::size_t>(min_class));
  if (clean.cases.empty()) throw EmptyLogError("no cases left after cleaning");

  const auto window = cfg.get_int("window", 64);
  if (window < 1) throw DomainError("window must be >= 1");
  const double fraction = cfg.get_double("split", 0.2);
  EncodeOptions eo;
  const auto vocab = build_vocab(clean, categorical_fields(eo));
  const auto probe = encode_sequences(clean, vocab, static_cast<std::size_t>(window), eo);
  const auto split = stratified_split(probe.Y, fraction, seed, probe.label_names);
  eo.train_cases = split.train;
  eo.label_names = probe.label_names;
  const auto seq = encode_sequences(clean, vocab, static_cast<std::size_t>(window), eo);

  nlohmann::json cleaning;
  to_json(cleaning, report);
  cleaning["class_counts"] = clean.class_counts;
  cleaning["cases"] = clean.cases.size();
  cleaning["events"] = clean.event_count();
  set.json("cleaning.json", cleaning);

  std::vector<std::string> corr_fields;
  for (const auto& [name, _] : correlation_features()) corr_fields.push_back(name);
  const auto corr = correlation_matrix(clean, corr_fields);
  nlohmann::json rows = nlohmann::json::array();
  std::string corr_csv = "feature";
  for (const auto& f : corr.features) corr_csv += "," + f;
  corr_csv += "\n";
  for (Eigen::Index i = 0; i < corr.values.rows(); ++i) {
    std::vector<double> row(corr.values.row(i).data(), corr.values.row(i).data() + corr.values.cols());
    rows.push_back(row);
    corr_csv += corr.features[static_cast<std::size_t>(i)];
    for (double v : row) corr_csv += "," + format_double(v);
    corr_csv += "\n";
  }
  set.json("correlation.json", {{"features", corr.features}, {"values", rows}, {"zero_variance", corr.zero_variance}});
  set.csv("correlation.csv", corr_csv);

  nlohmann::json vocab_json;
  to_json(vocab_json, vocab);
  set.json("vocab.json", vocab_json);
  set.json("dataset.json", {{"cases", seq.M},
                            {"window", seq.T},
                            {"features", seq.feature_names},
                            {"labels", seq.label_names},
                            {"unknown_tokens", seq.unknown_tokens},
                            {"split", {{"fraction", fraction}, {"seed", seed}, {"train", split.train.size()}, {"test", split.test.size()}}}});
  put_container(set, "sequences.xlg", to_container(seq));
  put_container(set, "flat.xlg", to_container(flatten(seq)));
  set.commit();
  std::cout << "ingest: " << clean.cases.size() << " cases in " << clean.class_counts.size() << " classes, window "
            << seq.T << ", written to " << g.out << "\n";
  return 0;
}

std::vector<std::pair<int, int>> parse_forest_grid(const std::string& text) {
  std::vector<std::pair<int, int>> grid;
  for (const auto& cell : split_list(text)) {
    const auto parts = split_list(cell, ':');
    if (parts.size() != 2) throw DomainError("forest grid cell '" + cell + "' is not trees:max_features");
    try {
      grid.emplace_back(std::stoi(parts[0]), std::stoi(parts[1]));
    } catch (const std::logic_error&) {
      throw DomainError("forest grid cell '" + cell + "' is not numeric");
    }
  }
  return grid;
}

nlohmann::json predictions_json(const std::vector<std::string>& ids, const Labels& truth, const Labels& pred,
                                const std::vector<std::string>& names) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back({{"id", ids[i]}, {"true", names[static_cast<std::size_t>(truth[i])]}, {"predicted", names[static_cast<std::size_t>(pred[i])]}});
  }
  return out;
}

int cmd_train(const RunConfig& cfg, const Globals& g) {
  const auto w = load_workspace(cfg);
  const auto seed = w.seed;
  ArtifactSet set(g.out, Provenance::of(cfg, seed));
  const std::string model = cfg.get("model", "lstm");
  const std::string comment = set.provenance().line();

  if (model == "forest") {
    const Matrix xtr = take_rows(w.flat.X, w.split.train), xte = take_rows(w.flat.X, w.split.test);
    const Labels ytr = take(w.flat.Y, w.split.train), yte = take(w.flat.Y, w.split.test);
    ForestParams p;
    p.n_estimators = static_cast<int>(cfg.get_int("trees", 100));
    p.max_features = static_cast<int>(cfg.get_int("max-features", std::lround(std::sqrt(static_cast<double>(w.flat.X.cols())))));
    p.seed = seed;
    p.threads = g.threads;
    if (cfg.has("grid")) {
      const auto rows = forest_grid_search(w.flat.X, w.flat.Y, parse_forest_grid(cfg.get("grid")), w.split,
                                           static_cast<int>(cfg.get_int("folds", 5)), seed, g.threads);
      nlohmann::json table = nlohmann::json::array();
      for (const auto& r : rows) {
        table.push_back({{"n_estimators", r.n_estimators}, {"max_features", r.max_features}, {"cv_accuracy", r.cv_accuracy},
                         {"test_accuracy", r.test_accuracy}, {"best", r.best}});
      }
      set.json("grid.json", table);
      p.n_estimators = rows.front().n_estimators;
      p.max_features = rows.front().max_features;
    }
    const auto forest = fit_forest(xtr, ytr, p, w.flat.feature_names, w.flat.label_names);
    const Labels pred = predict(forest, xte, g.threads);
    const auto C = w.flat.label_names.size();
    std::vector<std::vector<int>> confusion(C, std::vector<int>(C, 0));
    for (std::size_t i = 0; i < yte.size(); ++i) ++confusion[static_cast<std::size_t>(yte[i])][static_cast<std::size_t>(pred[i])];
    const double acc = accuracy(yte, pred);
    const auto importance = gini_importance(forest);
    set.json("forest.json", to_json(forest));
    set.json("eval.json", {{"model", "forest"}, {"accuracy", acc}, {"confusion", confusion}, {"labels", w.flat.label_names},
                           {"test_cases", yte.size()}});
    set.json("predictions.json", predictions_json(take(w.flat.case_ids, w.split.test), yte, pred, w.flat.label_names));
    set.json("importance.json", to_json(importance));
    set.svg("importance.svg", importance_svg(importance, 20, comment));
    set.commit();
    std::cout << "train: forest test accuracy " << format_fixed(acc, 4) << "\n";
    return 0;
  }

  SeqNetConfig base;
  base.arch = parse_arch(model);
  base.nodes = static_cast<int>(cfg.get_int("nodes", base.nodes));
  base.epochs = static_cast<int>(cfg.get_int("epochs", base.epochs));
  base.learning_rate = cfg.get_double("lr", base.learning_rate);
  base.batch_size = static_cast<int>(cfg.get_int("batch", base.batch_size));
  base.embed_dim = static_cast<int>(cfg.get_int("embed", base.embed_dim));
  base.seed = seed;
  base.threads = g.threads;
  const auto train_set = w.seq.subset(w.split.train), test_set = w.seq.subset(w.split.test);
  SeqNetModel m;
  if (cfg.has("grid")) {
    std::vector<SeqGridPoint> space;
    for (const auto& p : split_list(cfg.get("grid"))) space.push_back(parse_grid_point(p));
    std::vector<SeqNetModel> models;
    const auto rows = grid_search(space, w.seq, w.split, base, &models);
    set.json("grid.json", to_json(rows));
    m = std::move(models.front());
  } else {
    m = make_seqnet(w.seq, base);
    train(m, train_set, &test_set);
  }
  const auto ev = evaluate(m, test_set, g.threads);
  put_container(set, "model.xlg", to_container(m));
  set.json("model.json", manifest(m));
  set.csv("curve.csv", curve_csv(m));
  set.svg("curve.svg", training_curve_svg(m, comment));
  auto ev_json = to_json(ev);
  ev_json["model"] = to_string(m.config.arch);
  ev_json["diverged"] = m.diverged;
  set.json("eval.json", ev_json);
  set.json("predictions.json", predictions_json(test_set.case_ids, test_set.Y, predict(m, test_set, g.threads), m.label_names));
  set.commit();
  std::cout << "train: " << to_string(m.config.arch) << " test accuracy " << format_fixed(ev.accuracy, 4)
            << (m.diverged ? " (diverged; last good parameters kept)" : "") << "\n";
  return 0;
}

int cmd_explain(const RunConfig& cfg, const Globals& g) {
  const auto w = load_workspace(cfg);
  const auto seed = w.seed;
  const auto box = load_black_box(cfg, w, g.threads);
  ArtifactSet set(g.out, Provenance::of(cfg, seed));
  const std::string comment = set.provenance().line();
  const std::string method = require(cfg, "method");
  const Matrix background = take_rows(w.flat.X, w.split.train);
  const auto info = feature_info(w);
  const auto& names = w.flat.label_names;

  auto explain_row = [&](std::size_t row, int cls) {
    LimeOptions o = lime_options(cfg);
    o.target_class = cls;
    o.seed = derive_seed(seed, row);
    auto e = lime_explain(box.predict, w.flat.X.row(static_cast<Eigen::Index>(row)).transpose(), background, info, o,
                          w.flat.case_ids[row]);
    e.class_name = names[static_cast<std::size_t>(cls)];
    return e;
  };

  if (method == "lime") {
    const auto ids = split_list(require(cfg, "instance"));
    for (const auto& id : ids) {
      const auto row = row_of(w, id);
      int cls;
      if (cfg.has("class")) {
        cls = label_index(names, cfg.get("class"));
      } else {
        const Matrix p = box.predict(w.flat.X.row(static_cast<Eigen::Index>(row)));
        cls = argmax(p.data(), static_cast<std::size_t>(p.cols()));
      }
      const auto e = explain_row(row, cls);
      set.json("lime_" + file_stem(id) + ".json", to_json(e));
      set.svg("lime_" + file_stem(id) + ".svg", explanation_svg(e, comment));
    }
  } else if (method == "pick") {
    const std::string label = require(cfg, "class");
    const int cls = label_index(names, label);
    const bool all_rows = cfg.get("rows", "test") == "all";
    const auto limit = static_cast<std::size_t>(cfg.get_int("candidates", 0));
    std::vector<Explanation> candidates;
    std::vector<std::size_t> pool;
    if (all_rows) {
      for (std::size_t i = 0; i < w.flat.Y.size(); ++i) pool.push_back(i);
    } else {
      pool = w.split.test;
    }
    for (auto row : pool) {
      if (w.flat.Y[row] != cls) continue;
      if (limit > 0 && candidates.size() >= limit) break;
      candidates.push_back(explain_row(row, cls));
    }
    if (candidates.empty()) throw DomainError("no cases of class '" + label + "' to explain");
    const auto summary = submodular_pick(candidates, static_cast<std::size_t>(cfg.get_int("budget", 5)));
    auto j = to_json(summary, w.flat.feature_names);
    j["class"] = label;
    j["candidates"] = candidates.size();
    set.json("pick_" + file_stem(label) + ".json", j);
    set.svg("pick_" + file_stem(label) + ".svg", global_summary_svg(summary, w.flat.feature_names, 15, label, comment));
  } else if (method == "surrogate") {
    const std::string kind = cfg.get("surrogate", "tree");
    SurrogateKind k;
    double param;
    if (kind == "tree") {
      k = SurrogateKind::kTree;
      param = cfg.get_double("surrogate-param", 4);
    } else if (kind == "linear") {
      k = SurrogateKind::kLinear;
      param = cfg.get_double("surrogate-param", 1e-3);
    } else {
      throw DomainError("surrogate must be tree or linear");
    }
    auto j = to_json(fit_global_surrogate(box.predict, background, k, param));
    j["black_box"] = box.kind;
    set.json("surrogate_" + kind + ".json", j);
  } else if (method == "pdp" || method == "ice" || method == "ale") {
    const std::string feature = require(cfg, "feature");
    auto it = std::find(w.flat.feature_names.begin(), w.flat.feature_names.end(), feature);
    if (it == w.flat.feature_names.end()) throw DomainError("unknown feature '" + feature + "'");
    const auto col = static_cast<Eigen::Index>(it - w.flat.feature_names.begin());
    const int cls = cfg.has("class") ? label_index(names, cfg.get("class")) : 0;
    CurveSet c;
    if (method == "ale") {
      c = ale(box.predict, background, col, static_cast<std::size_t>(cfg.get_int("intervals", 10)), cls, feature);
    } else {
      const auto grid = default_grid(background, col, static_cast<std::size_t>(cfg.get_int("points", 20)));
      c = method == "pdp" ? pdp(box.predict, background, col, grid, cls, feature) : ice(box.predict, background, col, grid, cls, feature);
    }
    auto j = to_json(c);
    j["class_name"] = names[static_cast<std::size_t>(cls)];
    const std::string stem = method + "_" + file_stem(feature);
    set.json(stem + ".json", j);
    set.csv(stem + ".csv", to_csv(c));
    set.svg(stem + ".svg", curve_svg(c, comment));
  } else {
    throw DomainError("unknown method '" + method + "' (lime, surrogate, pdp, ice, ale, pick)");
  }
  set.commit();
  std::cout << "explain: " << method << " on " << box.kind << ", " << set.written().size() << " files written to " << g.out
            << "\n";
  return 0;
}

int cmd_project(const RunConfig& cfg, const Globals& g) {
  const auto w = load_workspace(cfg);
  const auto seed = w.seed;
  const fs::path dir = require(cfg, "model-dir");
  const auto m = seqnet_from_container(load_container((dir / "model.xlg").string()));
  if (cfg.get_int("bottleneck", 2) != 2) throw DomainError("only a 2-unit bottleneck is supported");
  ArtifactSet set(g.out, Provenance::of(cfg, seed));
  const std::string comment = set.provenance().line();

  const auto data = cfg.get("rows", "all") == "test" ? w.seq.subset(w.split.test) : w.seq;
  const int layer = static_cast<int>(cfg.get_int("layer", 0));
  const auto acts = capture_activations(m, data, layer, g.threads);
  const int k = static_cast<int>(cfg.get_int("k", static_cast<long long>(m.label_names.size())));

  AutoencoderOptions ao;
  ao.n1 = cfg.get_int("n1", ao.n1);
  ao.epochs = static_cast<int>(cfg.get_int("epochs", ao.epochs));
  ao.learning_rate = cfg.get_double("lr", ao.learning_rate);
  ao.seed = seed;
  Autoencoder ae;
  LatentProjection proj;
  if (cfg.has("grid")) {
    std::vector<Eigen::Index> candidates;
    for (const auto& c : split_list(cfg.get("grid"))) candidates.push_back(std::stol(c));
    auto res = grid_search_ae(acts, candidates, ao, k, g.threads);
    set.json("ae_grid.json", to_json(res.table));
    ae = std::move(res.models.front());
    proj = std::move(res.projections.front());
  } else {
    ae = fit_autoencoder(acts.values, ao);
    proj = make_projection(ae, acts);
  }
  const auto report = analyze_misclassifications(proj, k, seed, g.threads);
  auto j = to_json(report, proj);
  j["layer"] = layer;
  j["activation_width"] = acts.values.cols();
  j["architecture"] = to_string(m.config.arch);
  j["autoencoder"] = {{"n1", ae.n1}, {"final_mse", ae.final_mse}, {"diverged", ae.diverged}};
  if (m.config.arch == Arch::kBiLstm && layer == 0) {
    j["note"] = "bidirectional summary: forward and backward states concatenated (2H columns)";
  }
  set.json("clusters.json", j);
  set.csv("projection.csv", to_csv(proj));
  set.svg("projection.svg", projection_svg(proj, "Latent projection, layer " + std::to_string(layer), comment));
  set.svg("reconstruction.svg", reconstruction_svg(ae, comment));
  set.commit();
  std::cout << "project: purity " << format_fixed(report.purity, 4) << " over " << k << " clusters\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg, const Globals& g) {
  const auto seed = seed_of(cfg);
  const SyntheticSpec spec =
      cfg.has("spec") ? synthetic_spec_from_json(nlohmann::json::parse(read_file(cfg.get("spec")))) : SyntheticSpec{};
  ArtifactSet set(g.out, Provenance::of(cfg, seed));
  const auto s = generate_synthetic(spec, seed);
  set.raw("synthetic.csv", log_to_csv(s.log));
  set.json("manifest.json", s.manifest);
  set.json("schema.json", Schema::hospital_log().to_json());
  set.commit();
  std::cout << "synth: " << s.log.cases.size() << " cases, " << s.log.event_count() << " events, written to " << g.out << "\n";
  return 0;
}

int cmd_bench(const RunConfig& cfg, const Globals& g, bool skip_determinism) {
  const auto seed = seed_of(cfg);
  ArtifactSet set(g.out, Provenance::of(cfg, seed));
  acceptance::BenchOptions opt{seed, g.threads, set.provenance().line()};

  std::vector<acceptance::CriterionResult> results;
  bool all = true;
  for (auto fn : acceptance::in_process_criteria()) {
    results.push_back(acceptance::timed(fn, opt));
    std::cout << acceptance::status_line(results.back()) << std::endl;
    all = all && results.back().passed();
  }
  const auto files = acceptance::render_artifacts(results, set.provenance());
  if (!skip_determinism) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<acceptance::CriterionResult> again;
    for (auto fn : acceptance::in_process_criteria()) again.push_back(acceptance::timed(fn, opt));
    const auto second = acceptance::render_artifacts(again, set.provenance());
    std::size_t same = 0;
    for (const auto& [name, bytes] : files) {
      auto it = second.find(name);
      same += it != second.end() && it->second == bytes;
    }
    acceptance::CriterionResult r{11, "determinism"};
    r.values_ok = same == files.size() && second.size() == files.size();
    r.detail = std::to_string(same) + "/" + std::to_string(files.size()) + " artifacts byte-identical across two runs";
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << acceptance::status_line(r) << std::endl;
    all = all && r.passed();
  }
  for (const auto& [name, bytes] : files) set.raw(name, bytes);
  set.commit();
  return all ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xlog: explainable predictive models over clinical event logs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  std::string config_path;
  app.add_option("--config", config_path, "Settings file (key = value); flags override it")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  Command ingest(app, "ingest", "Parse, clean and encode an event log CSV");
  ingest.add("csv", "Event log CSV");
  ingest.add("schema", "Schema JSON mapping fields to column names");
  ingest.add("min-class", "Drop classes with fewer cases (default 30)");
  ingest.add("window", "Window length T (default 64)");
  ingest.add("split", "Test fraction used for scaling statistics (default 0.2)");
  ingest.add("seed", "Seed");

  Command train_cmd(app, "train", "Train a forest or sequence model");
  train_cmd.add("data", "Directory written by ingest");
  train_cmd.add("model", "forest, dense, lstm or bilstm (default lstm)");
  train_cmd.add("grid", "forest: trees:max_features,...  seqnet: arch:nodes:epochs,...");
  train_cmd.add("split", "Test fraction");
  train_cmd.add("seed", "Seed");
  train_cmd.add("trees", "Forest size (default 100)");
  train_cmd.add("max-features", "Features per split (default round(sqrt(F)))");
  train_cmd.add("folds", "Cross-validation folds for the forest grid (default 5)");
  train_cmd.add("nodes", "Hidden units (default 20)");
  train_cmd.add("epochs", "Epochs (default 200)");
  train_cmd.add("lr", "Learning rate (default 0.5)");
  train_cmd.add("batch", "Minibatch size (default 32)");
  train_cmd.add("embed", "Embedding width (default 8)");

  Command explain_cmd(app, "explain", "Explain a trained model");
  explain_cmd.add("data", "Directory written by ingest");
  explain_cmd.add("model-dir", "Directory written by train");
  explain_cmd.add("method", "lime, surrogate, pdp, ice, ale or pick");
  explain_cmd.add("instance", "Case ids for lime, comma separated");
  explain_cmd.add("class", "Target class label");
  explain_cmd.add("feature", "Flattened feature name for pdp, ice and ale");
  explain_cmd.add("K", "Features per explanation (default 10)");
  explain_cmd.add("samples", "Perturbations per explanation (default 5000)");
  explain_cmd.add("sigma", "Kernel width (default 0.75 sqrt(F))");
  explain_cmd.add("selection", "forward or lasso (default forward)");
  explain_cmd.add("budget", "Explanations picked for a class summary (default 5)");
  explain_cmd.add("candidates", "Cap on explained cases for pick (default all)");
  explain_cmd.add("rows", "Candidate rows for pick: test or all (default test)");
  explain_cmd.add("surrogate", "tree or linear (default tree)");
  explain_cmd.add("surrogate-param", "Tree depth or ridge lambda");
  explain_cmd.add("points", "Grid points for pdp and ice (default 20)");
  explain_cmd.add("intervals", "ALE intervals (default 10)");
  explain_cmd.add("split", "Test fraction");
  explain_cmd.add("seed", "Seed");

  Command project_cmd(app, "project", "Project activations to 2-D and cluster them");
  project_cmd.add("data", "Directory written by ingest");
  project_cmd.add("model-dir", "Directory holding a sequence model");
  project_cmd.add("layer", "0 = recurrent summary, 1 = dense layer (default 0)");
  project_cmd.add("bottleneck", "Latent width (only 2)");
  project_cmd.add("k", "Clusters (default: number of classes)");
  project_cmd.add("n1", "Autoencoder hidden width (default 8)");
  project_cmd.add("grid", "Candidate hidden widths, comma separated");
  project_cmd.add("epochs", "Autoencoder epochs (default 2000)");
  project_cmd.add("lr", "Autoencoder learning rate (default 0.5)");
  project_cmd.add("rows", "all or test (default all)");
  project_cmd.add("split", "Test fraction");
  project_cmd.add("seed", "Seed");

  Command synth_cmd(app, "synth", "Generate a synthetic event log with planted signal");
  synth_cmd.add("spec", "Synthetic spec JSON (default: three classes with an age rule)");
  synth_cmd.add("seed", "Seed");

  Command bench_cmd(app, "bench", "Run the acceptance criteria and write their artifacts");
  bench_cmd.add("seed", "Seed");
  bool skip_determinism = false;
  bench_cmd.app()->add_flag("--skip-determinism", skip_determinism, "Run the criteria once");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig file = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (ingest.parsed()) return cmd_ingest(ingest.resolve(file), g);
    if (train_cmd.parsed()) return cmd_train(train_cmd.resolve(file), g);
    if (explain_cmd.parsed()) return cmd_explain(explain_cmd.resolve(file), g);
    if (project_cmd.parsed()) return cmd_project(project_cmd.resolve(file), g);
    if (synth_cmd.parsed()) return cmd_synth(synth_cmd.resolve(file), g);
    if (bench_cmd.parsed()) return cmd_bench(bench_cmd.resolve(file), g, skip_determinism);
  } catch (const std::exception& e) {
    std::cerr << "xlog: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
