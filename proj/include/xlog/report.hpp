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

// Run configuration, provenance stamping and artifact output.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xlog/core.hpp"
#include "xlog/csv.hpp"
#include "xlog/explain.hpp"
#include "xlog/forest.hpp"
#include "xlog/latent.hpp"
#include "xlog/seqnet.hpp"
#include "xlog/svg.hpp"

namespace xlog {

// ---------------------------------------------------------------------------
// Configuration: `key = value` lines, `#` comments, optional double quotes.

class RunConfig {
 public:
  static RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto hash = line.find('#');
      if (hash != std::string::npos && line.find('"') == std::string::npos) line.erase(hash);
      line = csv::trim(line);
      if (line.empty()) {
        if (end == text.size()) break;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
      std::string key = csv::trim(line.substr(0, eq));
      std::string value = csv::trim(line.substr(eq + 1));
      if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      cfg.values_[key] = value;
      if (end == text.size()) break;
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config file: " + path);
    return parse(std::string(std::istreambuf_iterator<char>(in), {}));
  }

  // Flags win over file values.
  void override_with(const std::map<std::string, std::string>& flags) {
    for (const auto& [k, v] : flags) values_[k] = v;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw FormatError("config key '" + key + "' is not a number: " + it->second);
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw FormatError("config key '" + key + "' is not an integer: " + it->second);
    }
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  // Canonical text: sorted `key=value` lines.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  std::string hash() const { return hex64(fnv1a(canonical())); }

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Provenance

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version{kVersion};

  static Provenance of(const RunConfig& cfg, std::uint64_t seed) { return {cfg.hash(), seed, std::string(kVersion)}; }

  nlohmann::json to_json() const { return {{"config_hash", config_hash}, {"seed", seed}, {"version", version}}; }

  std::string line() const {
    return "xlog " + version + " config=" + config_hash + " seed=" + std::to_string(seed);
  }
};

// Object reports get a "provenance" member; anything else is wrapped.
inline nlohmann::json stamp(nlohmann::json report, const Provenance& p) {
  if (!report.is_object()) report = nlohmann::json{{"data", std::move(report)}};
  report["provenance"] = p.to_json();
  return report;
}

inline std::string stamp_csv(const std::string& csv, const Provenance& p) { return "# " + p.line() + "\n" + csv; }

// ---------------------------------------------------------------------------
// Output

// Writes to `path.tmp` and renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw Error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Collects the artifacts of one command. Files are written as they are
// added; rollback() removes every file written so far, so a failing command
// leaves no partial output behind.
class ArtifactSet {
 public:
  ArtifactSet(std::filesystem::path dir, Provenance prov) : dir_(std::move(dir)), prov_(std::move(prov)) {}

  ~ArtifactSet() {
    if (!committed_) rollback();
  }

  ArtifactSet(const ArtifactSet&) = delete;
  ArtifactSet& operator=(const ArtifactSet&) = delete;

  const Provenance& provenance() const { return prov_; }
  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path json(const std::string& name, const nlohmann::json& report) {
    return raw(name, stamp(report, prov_).dump(2) + "\n");
  }

  std::filesystem::path csv(const std::string& name, const std::string& body) { return raw(name, stamp_csv(body, prov_)); }

  // SVG text must come from an svg:: function given provenance().line() as
  // its comment.
  std::filesystem::path svg(const std::string& name, const std::string& body) { return raw(name, body); }

  std::filesystem::path raw(const std::string& name, const std::string& body) {
    const auto path = dir_ / name;
    write_file_atomic(path, body);
    written_.push_back(path);
    return path;
  }

  void commit() { committed_ = true; }

  void rollback() {
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    written_.clear();
  }

  const std::vector<std::filesystem::path>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  Provenance prov_;
  std::vector<std::filesystem::path> written_;
  bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Domain plots

inline std::string importance_svg(const ImportanceReport& r, std::size_t k, const std::string& comment) {
  std::vector<std::string> labels;
  std::vector<double> values;
  for (auto i : r.top(k)) {
    labels.push_back(r.feature_names.size() > i ? r.feature_names[i] : "x" + std::to_string(i));
    values.push_back(r.importance[i]);
  }
  return svg::bar_chart(labels, values, "Feature importance (mean decrease in gini)", comment);
}

inline std::string explanation_svg(const Explanation& e, const std::string& comment) {
  std::vector<std::string> labels;
  std::vector<double> values;
  for (auto col : e.ranked()) {
    const auto i = static_cast<std::size_t>(std::find(e.features.begin(), e.features.end(), col) - e.features.begin());
    labels.push_back(e.labels[i]);
    values.push_back(e.weights[i]);
  }
  const std::string who = e.instance.empty() ? "instance" : e.instance;
  return svg::bar_chart(labels, values, "Local explanation of " + (e.class_name.empty() ? std::to_string(e.target_class) : e.class_name) + " for " + who,
                        comment);
}

inline std::string global_summary_svg(const GlobalSummary& s, const std::vector<std::string>& names, std::size_t k,
                                      const std::string& class_name, const std::string& comment) {
  std::vector<std::pair<double, std::size_t>> order;
  for (const auto& [f, v] : s.importance) order.emplace_back(-v, f);
  std::sort(order.begin(), order.end());
  std::vector<std::string> labels;
  std::vector<double> values;
  for (std::size_t i = 0; i < order.size() && i < k; ++i) {
    labels.push_back(order[i].second < names.size() ? names[order[i].second] : "x" + std::to_string(order[i].second));
    values.push_back(-order[i].first);
  }
  return svg::bar_chart(labels, values, "Global interpretation of class " + class_name, comment);
}

inline std::string curve_svg(const CurveSet& c, const std::string& comment, std::size_t max_ice_lines = 50) {
  std::vector<svg::Series> series;
  if (c.kind == CurveKind::kIce) {
    for (std::size_t r = 0; r < c.values.size() && r < max_ice_lines; ++r) {
      series.push_back({"row " + std::to_string(r), c.grid, c.values[r]});
    }
  } else {
    series.push_back({to_string(c.kind), c.grid, c.values.front()});
  }
  return svg::line_plot(series, to_string(c.kind) + " of " + c.feature, c.feature, "effect on class " + std::to_string(c.target_class),
                        comment);
}

inline std::string training_curve_svg(const SeqNetModel& m, const std::string& comment) {
  svg::Series train_loss{"train loss", {}, {}}, val_loss{"validation loss", {}, {}};
  svg::Series train_acc{"train accuracy", {}, {}}, val_acc{"validation accuracy", {}, {}};
  for (const auto& r : m.curve) {
    train_loss.x.push_back(r.epoch);
    train_loss.y.push_back(r.train_loss);
    train_acc.x.push_back(r.epoch);
    train_acc.y.push_back(r.train_accuracy);
    if (r.val_loss) {
      val_loss.x.push_back(r.epoch);
      val_loss.y.push_back(*r.val_loss);
      val_acc.x.push_back(r.epoch);
      val_acc.y.push_back(*r.val_accuracy);
    }
  }
  std::vector<svg::Series> series{train_loss, train_acc};
  if (!val_loss.x.empty()) {
    series.push_back(val_loss);
    series.push_back(val_acc);
  }
  return svg::line_plot(series, "Training curve (" + to_string(m.config.arch) + ")", "epoch", "loss / accuracy", comment);
}

inline std::string reconstruction_svg(const Autoencoder& ae, const std::string& comment) {
  svg::Series s{"mse", {}, ae.curve};
  for (std::size_t i = 0; i < ae.curve.size(); ++i) s.x.push_back(static_cast<double>(i));
  return svg::line_plot({s}, "Autoencoder reconstruction error (n1 = " + std::to_string(ae.n1) + ")", "epoch", "mse", comment);
}

// Colour by true label, marker by predicted label.
inline std::string projection_svg(const LatentProjection& p, const std::string& title, const std::string& comment) {
  std::vector<double> x, y;
  for (Eigen::Index i = 0; i < p.coords.rows(); ++i) {
    x.push_back(p.coords(i, 0));
    y.push_back(p.coords(i, 1));
  }
  return svg::scatter(x, y, p.true_labels, p.predicted_labels, p.label_names, title, comment);
}

}  // namespace xlog
