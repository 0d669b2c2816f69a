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

// Composite answer reward: keyword Jaccard overlap and embedding similarity,
// mixed with per-type weights and amplified for shortcoming types.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vqar/corpus.hpp"
#include "vqar/embedding.hpp"
#include "vqar/error.hpp"
#include "vqar/text.hpp"

namespace vqar {

inline const std::set<std::string, std::less<>>& keyword_stopwords() {
  static const std::set<std::string, std::less<>> kStop = {
      "the", "a", "an", "of", "is", "to", "by", "with", "and", "or", "on", "in", "vase"};
  return kStop;
}

using KeywordSet = std::set<std::string>;

inline KeywordSet extract_keywords(std::string_view s) {
  KeywordSet out;
  const auto& stop = keyword_stopwords();
  for (auto& tok : text::word_tokens(s))
    if (!stop.count(tok)) out.insert(std::move(tok));
  return out;
}

inline double jaccard(const KeywordSet& a, const KeywordSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline double keyword_score(std::string_view prediction, std::string_view reference) {
  return jaccard(extract_keywords(prediction), extract_keywords(reference));
}

inline double semantic_score(const EmbeddingVector& prediction, const EmbeddingVector& reference) {
  return (cosine(prediction, reference) + 1.0) / 2.0;
}

inline double semantic_score(std::string_view prediction, std::string_view reference,
                             const Embedder& embedder) {
  std::vector<std::string> texts = {std::string(prediction), std::string(reference)};
  auto v = embedder.embed_batch(texts);
  return semantic_score(v[0], v[1]);
}

struct TypeWeights {
  double keyword = 0.5;   // beta_1
  double semantic = 0.5;  // beta_2
  bool operator==(const TypeWeights&) const = default;
};

inline bool is_descriptive(QuestionType t) {
  return t == QuestionType::Decoration || t == QuestionType::General;
}

inline TypeWeights default_weights(QuestionType t) {
  return is_descriptive(t) ? TypeWeights{0.3, 0.7} : TypeWeights{0.7, 0.3};
}

inline constexpr double kDefaultAmplification = 2.0;

struct RewardConfig {
  std::map<QuestionType, TypeWeights> betas;
  std::set<QuestionType> shortcomings;
  std::map<QuestionType, double> amplification;
  std::map<std::string, std::string> metadata;

  static RewardConfig defaults() {
    RewardConfig c;
    for (auto t : kAllQuestionTypes) {
      c.betas[t] = default_weights(t);
      c.amplification[t] = 1.0;
    }
    return c;
  }

  const TypeWeights& weights(QuestionType t) const {
    auto it = betas.find(t);
    if (it == betas.end())
      throw ConfigError("reward config has no weights for '" + std::string(type_name(t)) + "'");
    return it->second;
  }

  double amplification_for(QuestionType t) const {
    auto it = amplification.find(t);
    return it == amplification.end() ? 1.0 : it->second;
  }

  void validate() const {
    for (auto t : kAllQuestionTypes) {
      auto name = std::string(type_name(t));
      const auto& w = weights(t);
      if (!(w.keyword >= 0.0 && w.semantic >= 0.0))
        throw ConfigError("betas." + name + ": weights must be non-negative");
      if (std::abs(w.keyword + w.semantic - 1.0) > 1e-9)
        throw ConfigError("betas." + name + ": weights must sum to 1");
      double a = amplification_for(t);
      bool short_type = shortcomings.count(t) > 0;
      if (short_type && !(a > 1.0))
        throw ConfigError("amplification." + name + " must exceed 1 for a shortcoming type");
      if (!short_type && a != 1.0)
        throw ConfigError("amplification." + name + " must be 1 for a non-shortcoming type");
    }
  }

  bool operator==(const RewardConfig& o) const {
    return betas == o.betas && shortcomings == o.shortcomings && amplification == o.amplification;
  }

  // Key-value text form:
  //   betas.<type> = [b1, b2]
  //   shortcomings = [<type>, ...]
  //   amplification.<type> = w
  //   metadata.<key> = "..."
  std::string to_text() const {
    std::ostringstream os;
    auto num = [](double v) { return json(v).dump(); };
    os << "# reward configuration\n";
    for (const auto& [k, v] : metadata) os << "metadata." << k << " = " << json(v).dump() << "\n";
    for (auto t : kAllQuestionTypes) {
      auto it = betas.find(t);
      if (it == betas.end()) continue;
      os << "betas." << type_name(t) << " = [" << num(it->second.keyword) << ", "
         << num(it->second.semantic) << "]\n";
    }
    os << "shortcomings = [";
    bool first = true;
    for (auto t : kAllQuestionTypes) {
      if (!shortcomings.count(t)) continue;
      os << (first ? "" : ", ") << type_name(t);
      first = false;
    }
    os << "]\n";
    for (auto t : kAllQuestionTypes) os << "amplification." << type_name(t) << " = " << num(amplification_for(t)) << "\n";
    return os.str();
  }

  json metadata_json() const {
    json m = json::object();
    for (const auto& [k, v] : metadata) m[k] = v;
    return m;
  }

  static RewardConfig from_text(std::string_view raw);
};

namespace detail {

struct ConfigValue {
  std::vector<std::string> items;  // list elements, or the single scalar
  bool is_list = false;
};

inline std::string unquote(std::string_view s) {
  auto t = text::trim_view(s);
  if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) {
    if (t.front() == '"') {
      try {
        return json::parse(t).get<std::string>();
      } catch (const json::exception&) {
      }
    }
    return std::string(t.substr(1, t.size() - 2));
  }
  return std::string(t);
}

// Strips a '#' comment that is not inside a quoted string.
inline std::string_view strip_comment(std::string_view line) {
  bool in_quote = false;
  char q = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quote) {
      if (c == '\\') ++i;
      else if (c == q) in_quote = false;
    } else if (c == '"' || c == '\'') {
      in_quote = true;
      q = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

inline ConfigValue parse_config_value(std::string_view raw, std::size_t line_no) {
  auto v = text::trim_view(raw);
  ConfigValue out;
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']')
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated list");
    out.is_list = true;
    auto inner = text::trim_view(v.substr(1, v.size() - 2));
    if (!inner.empty())
      for (auto& item : text::split_trimmed(inner, ',')) out.items.push_back(unquote(item));
  } else {
    out.items.push_back(unquote(v));
  }
  return out;
}

inline double parse_number(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + s + "' is not a number");
  }
}

}  // namespace detail

// Missing betas fall back to the per-type defaults; a shortcoming type with
// no explicit amplification gets kDefaultAmplification; other types get 1.
// The result is validated.
inline RewardConfig RewardConfig::from_text(std::string_view raw) {
  RewardConfig c;
  c.betas.clear();
  std::map<QuestionType, double> amp;
  std::string section;
  std::size_t line_no = 0;
  for (const auto& line_raw : text::split_trimmed(raw, '\n')) {
    ++line_no;
    auto line = text::trim(detail::strip_comment(line_raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = text::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    auto key = text::lower(text::trim_view(std::string_view(line).substr(0, eq)));
    if (!section.empty()) key = text::lower(section) + "." + key;
    auto value = detail::parse_config_value(std::string_view(line).substr(eq + 1), line_no);

    auto dot = key.find('.');
    auto head = key.substr(0, dot);
    auto tail = dot == std::string::npos ? std::string() : key.substr(dot + 1);
    auto type_of_tail = [&]() {
      auto t = parse_type_name(tail);
      if (!t) throw ConfigError("line " + std::to_string(line_no) + ": unknown question type '" + tail + "'");
      return *t;
    };
    if (head == "betas" && !tail.empty()) {
      if (!value.is_list || value.items.size() != 2)
        throw ConfigError(key + ": expected [beta1, beta2]");
      c.betas[type_of_tail()] = {detail::parse_number(value.items[0], key),
                                 detail::parse_number(value.items[1], key)};
    } else if (head == "amplification" && !tail.empty()) {
      if (value.is_list || value.items.size() != 1) throw ConfigError(key + ": expected a number");
      amp[type_of_tail()] = detail::parse_number(value.items[0], key);
    } else if (key == "shortcomings") {
      for (const auto& name : value.items) {
        auto t = parse_type_name(name);
        if (!t) throw ConfigError("shortcomings: unknown question type '" + name + "'");
        c.shortcomings.insert(*t);
      }
    } else if (head == "metadata" && !tail.empty()) {
      c.metadata[tail] = value.items.empty() ? "" : text::join(value.items, ", ");
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  for (auto t : kAllQuestionTypes) {
    if (!c.betas.count(t)) c.betas[t] = default_weights(t);
    auto it = amp.find(t);
    c.amplification[t] = it != amp.end() ? it->second
                         : c.shortcomings.count(t) ? kDefaultAmplification
                                                   : 1.0;
  }
  c.validate();
  return c;
}

struct RewardBreakdown {
  QuestionType question_type = QuestionType::General;
  double keyword = 0.0;   // s_kw
  double semantic = 0.0;  // s_sem
  double combined = 0.0;  // R
  double shaped = 0.0;    // R~ = w * R
  double amplification = 1.0;

  json to_json() const {
    return {{"question_type", std::string(type_name(question_type))},
            {"s_kw", keyword},
            {"s_sem", semantic},
            {"R", combined},
            {"R_shaped", shaped},
            {"w", amplification}};
  }
};

// Combines precomputed component scores. Shared by `score` and callers that
// cache embeddings.
inline RewardBreakdown combine(QuestionType type, double s_kw, double s_sem,
                               const RewardConfig& config) {
  const auto& w = config.weights(type);
  RewardBreakdown b;
  b.question_type = type;
  b.keyword = s_kw;
  b.semantic = s_sem;
  b.combined = w.keyword * s_kw + w.semantic * s_sem;
  b.amplification = config.amplification_for(type);
  b.shaped = b.amplification * b.combined;
  return b;
}

// Component scores take the max over reference alternatives independently.
inline RewardBreakdown score(QuestionType type, std::string_view prediction,
                             std::span<const std::string> alternatives,
                             const RewardConfig& config, const Embedder& embedder) {
  if (alternatives.empty()) throw InputError("score: empty reference alternatives");
  config.validate();
  std::vector<std::string> texts;
  texts.reserve(alternatives.size() + 1);
  texts.emplace_back(prediction);
  texts.insert(texts.end(), alternatives.begin(), alternatives.end());
  auto vecs = embedder.embed_batch(texts);
  if (vecs.size() != texts.size()) throw Error("embedder returned the wrong number of vectors");
  auto pred_kw = extract_keywords(prediction);
  double s_kw = 0.0, s_sem = 0.0;
  for (std::size_t i = 0; i < alternatives.size(); ++i) {
    s_kw = std::max(s_kw, jaccard(pred_kw, extract_keywords(alternatives[i])));
    s_sem = std::max(s_sem, semantic_score(vecs[0], vecs[i + 1]));
  }
  return combine(type, s_kw, s_sem, config);
}

inline RewardBreakdown score(QuestionType type, std::string_view prediction,
                             std::string_view reference, const RewardConfig& config,
                             const Embedder& embedder) {
  auto alts = text::split_trimmed(reference, '|');
  return score(type, prediction, std::span<const std::string>(alts), config, embedder);
}

}  // namespace vqar
