// Copyright 2026 The vqar Authors. All Rights Reserved.
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

// Plain-text tables for terminals.

#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqar/corpus.hpp"
#include "vqar/diagnosis.hpp"
#include "vqar/metrics.hpp"

namespace vqar::report {

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  // `highlight` rows are wrapped in ANSI red when rendering with color.
  void add(std::vector<std::string> row, bool highlight = false) {
    row.resize(header_.size());
    rows_.push_back({std::move(row), highlight});
  }

  std::string render(bool color = false) const {
    std::vector<std::size_t> width(header_.size());
    for (std::size_t c = 0; c < header_.size(); ++c) width[c] = header_[c].size();
    for (const auto& r : rows_)
      for (std::size_t c = 0; c < r.cells.size(); ++c) width[c] = std::max(width[c], r.cells[c].size());
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        os << (c ? "  " : "") << cells[c];
        if (c + 1 < cells.size()) os << std::string(width[c] - cells[c].size(), ' ');
      }
    };
    line(header_);
    os << "\n";
    std::size_t total = 0;
    for (auto w : width) total += w;
    os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    for (const auto& r : rows_) {
      if (color && r.highlight) os << "\x1b[31m";
      line(r.cells);
      if (color && r.highlight) os << "\x1b[0m";
      os << "\n";
    }
    return os.str();
  }

 private:
  struct Row {
    std::vector<std::string> cells;
    bool highlight;
  };
  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string out = buf;
  if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

inline std::string scalar(const json& v) {
  if (v.is_string()) {
    auto s = v.get<std::string>();
    auto nl = s.find('\n');
    if (nl == std::string::npos) return s;
    return s.substr(0, nl) + " ... (" + std::to_string(std::count(s.begin(), s.end(), '\n')) + " lines)";
  }
  if (v.is_number_float()) return fixed(v.get<double>());
  return v.dump();
}

inline std::string render_eval(const EvalReport& r, bool color = false) {
  Table t({"type", "metric", "count", "mean"});
  for (const auto& [type, s] : r.per_type)
    t.add({std::string(type_name(type)), std::string(metric_name(metric_for(type))),
           std::to_string(s.count), fixed(s.mean_score)});
  t.add({"overall", "weighted", std::to_string(r.instances), fixed(r.overall)});
  std::ostringstream os;
  os << t.render(color);
  os << "missing predictions: " << r.missing << "   tau: " << fixed(r.tau, 2) << "\n";
  return os.str();
}

inline std::string render_diagnosis(const DiagnosisReport& d, bool color = false) {
  Table t({"type", "score", "shortcoming", "w"});
  for (const auto& [type, s] : d.per_type_scores) {
    bool flagged = d.shortcomings.count(type) > 0;
    t.add({std::string(type_name(type)), fixed(s), flagged ? "yes" : "no",
           fixed(d.derived_config.amplification_for(type), 2)},
          flagged);
  }
  std::ostringstream os;
  os << t.render(color);
  os << "threshold: " << fixed(d.threshold, 2) << "\n";
  if (!d.uncovered.empty()) {
    os << "uncovered:";
    for (auto u : d.uncovered) os << " " << type_name(u);
    os << "\n";
  }
  return os.str();
}

inline std::string render_summary(const CorpusSummary& s) {
  Table t({"type", "questions"});
  for (auto type : kAllQuestionTypes)
    t.add({std::string(type_name(type)), std::to_string(s.per_type.count(type) ? s.per_type.at(type) : 0)});
  std::ostringstream os;
  os << "records: " << s.records << "\nquestions: " << s.questions << "\n" << t.render();
  return os.str();
}

namespace detail {

inline void flatten(const json& j, const std::string& prefix, Table& t) {
  if (j.is_object() && !j.empty()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, t);
  } else if (j.is_array() && !j.empty() &&
             std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); })) {
    std::string joined;
    for (const auto& e : j) joined += (joined.empty() ? "" : ", ") + scalar(e);
    t.add({prefix, joined});
  } else if (j.is_array() && !j.empty()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", t);
  } else {
    t.add({prefix, scalar(j)});
  }
}

}  // namespace detail

// Renders any JSON document as a key/value table. Evaluation and diagnosis
// reports get their dedicated layouts.
inline std::string render_any(const json& j, bool color = false) {
  if (j.is_object() && j.contains("per_type") && j.contains("overall"))
    return render_eval(EvalReport::from_json(j), color);
  Table t({"key", "value"});
  detail::flatten(j, "", t);
  return t.render(color);
}

}  // namespace vqar::report
