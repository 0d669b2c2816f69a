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

// Data model, ingestion and splitting for conversation-format VQA corpora.
//
// A corpus file is a JSON array of records:
//
//   { "id": ..., "image": ..., "conversations": [
//       {"from": "human", "value": <question>},
//       {"from": "gpt",   "value": <reference answer>}, ... ] }
//
// Prediction files are JSON Lines: {"id": ..., "question_type": ..., "prediction": ...}.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vqar/error.hpp"
#include "vqar/text.hpp"

namespace vqar {

using nlohmann::json;

enum class QuestionType {
  Fabric,
  Technique,
  Shape,
  Provenance,
  Date,
  Attribution,
  Decoration,
  General,
};

inline constexpr std::array<QuestionType, 8> kAllQuestionTypes = {
    QuestionType::Fabric,      QuestionType::Technique, QuestionType::Shape,
    QuestionType::Provenance,  QuestionType::Date,      QuestionType::Attribution,
    QuestionType::Decoration,  QuestionType::General,
};

constexpr std::string_view type_name(QuestionType t) {
  switch (t) {
    case QuestionType::Fabric: return "fabric";
    case QuestionType::Technique: return "technique";
    case QuestionType::Shape: return "shape";
    case QuestionType::Provenance: return "provenance";
    case QuestionType::Date: return "date";
    case QuestionType::Attribution: return "attribution";
    case QuestionType::Decoration: return "decoration";
    case QuestionType::General: return "general";
  }
  return "general";
}

// Accepts canonical names case-insensitively, plus the alternate column
// labels seen in published tables (material, origin, attribute).
inline std::optional<QuestionType> parse_type_name(std::string_view name) {
  auto n = text::lower(text::trim_view(name));
  for (auto t : kAllQuestionTypes)
    if (n == type_name(t)) return t;
  if (n == "material") return QuestionType::Fabric;
  if (n == "origin") return QuestionType::Provenance;
  if (n == "attribute") return QuestionType::Attribution;
  if (n == "shape name") return QuestionType::Shape;
  return std::nullopt;
}

inline QuestionType type_from_name(std::string_view name) {
  auto t = parse_type_name(name);
  if (!t) throw InputError("unknown question type '" + std::string(name) + "'");
  return *t;
}

// Keyword match on the attribute noun of a templated question.
inline QuestionType infer_question_type(std::string_view question) {
  auto toks = text::word_tokens(question);
  auto has = [&](std::string_view w) {
    return std::find(toks.begin(), toks.end(), w) != toks.end();
  };
  if (has("fabric")) return QuestionType::Fabric;
  if (has("technique")) return QuestionType::Technique;
  if (has("shape")) return QuestionType::Shape;
  if (has("provenance")) return QuestionType::Provenance;
  if (has("date")) return QuestionType::Date;
  if (has("attribution") || has("attributed")) return QuestionType::Attribution;
  if (has("decoration")) return QuestionType::Decoration;
  return QuestionType::General;
}

namespace detail {

inline bool attribute_matches(QuestionType t, std::string_view attr) {
  switch (t) {
    case QuestionType::Shape: return attr == "shape" || attr == "shape name";
    case QuestionType::General: return !attr.empty();
    default: return attr == type_name(t);
  }
}

}  // namespace detail

// Strips the dataset's answer sentence template ("The <attr> of the vase is
// X." / "The vase is attributed to X.") and a trailing period. For General
// any attribute phrase is accepted; otherwise the phrase must name `type`.
inline std::string extract_answer_core(std::string_view answer,
                                       QuestionType type = QuestionType::General) {
  std::string s = text::trim(answer);
  std::string low = text::lower(s);
  constexpr std::string_view kAttributed = "the vase is attributed to ";
  constexpr std::string_view kOfTheVase = " of the vase is ";
  if ((type == QuestionType::Attribution || type == QuestionType::General) &&
      low.starts_with(kAttributed)) {
    s = text::trim(std::string_view(s).substr(kAttributed.size()));
  } else if (low.starts_with("the ")) {
    auto pos = low.find(kOfTheVase, 5);
    if (pos != std::string::npos) {
      auto attr = text::collapse_whitespace(std::string_view(low).substr(4, pos - 4));
      if (detail::attribute_matches(type, attr))
        s = text::trim(std::string_view(s).substr(pos + kOfTheVase.size()));
    }
  }
  if (!s.empty() && s.back() == '.') s = text::trim(std::string_view(s).substr(0, s.size() - 1));
  return s;
}

struct QaPair {
  std::string question;
  std::string reference_answer;
  QuestionType question_type = QuestionType::General;
  std::vector<std::string> alternatives;

  bool operator==(const QaPair&) const = default;
};

inline QaPair make_qa_pair(std::string question, std::string reference) {
  QaPair p;
  p.question_type = infer_question_type(question);
  p.alternatives = text::split_trimmed(reference, '|');
  p.question = std::move(question);
  p.reference_answer = std::move(reference);
  return p;
}

struct VqaRecord {
  std::string id;
  std::string image_ref;
  std::vector<QaPair> qa_pairs;

  bool operator==(const VqaRecord&) const = default;
};

enum class SplitLabel { Unsplit, Train, Test };

constexpr std::string_view split_name(SplitLabel s) {
  switch (s) {
    case SplitLabel::Train: return "train";
    case SplitLabel::Test: return "test";
    case SplitLabel::Unsplit: return "unsplit";
  }
  return "unsplit";
}

struct Corpus {
  std::vector<VqaRecord> records;
  SplitLabel split_label = SplitLabel::Unsplit;

  std::size_t question_count() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.qa_pairs.size();
    return n;
  }

  const VqaRecord* find(std::string_view id) const {
    for (const auto& r : records)
      if (r.id == id) return &r;
    return nullptr;
  }

  bool operator==(const Corpus&) const = default;
};

struct PredictionRecord {
  std::string id;
  QuestionType question_type = QuestionType::General;
  std::string prediction;

  bool operator==(const PredictionRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Parsing and validation

struct CorpusIssue {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Error;
  std::size_t line = 0;  // 1-based line of the record's opening brace; 0 if unknown
  std::string record_id;
  std::string message;

  std::string to_string() const {
    std::ostringstream os;
    os << (severity == Severity::Error ? "error" : "warning");
    if (line) os << ": line " << line;
    if (!record_id.empty()) os << ": record '" << record_id << "'";
    os << ": " << message;
    return os.str();
  }
};

struct CorpusLoad {
  Corpus corpus;
  std::vector<CorpusIssue> issues;

  bool ok() const {
    return std::none_of(issues.begin(), issues.end(), [](const CorpusIssue& i) {
      return i.severity == CorpusIssue::Severity::Error;
    });
  }
};

namespace detail {

// Byte offsets of the first character of each element of the top-level JSON
// array in `raw`, found with a string-aware bracket scan. Assumes `raw`
// already parsed successfully.
inline std::vector<std::size_t> top_level_element_offsets(std::string_view raw) {
  std::vector<std::size_t> offsets;
  int depth = 0;
  bool in_string = false, escape = false, expect_element = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (in_string) {
      if (escape) escape = false;
      else if (c == '\\') escape = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (text::is_space(c)) continue;
    if (depth == 1 && expect_element && c != ']') {
      offsets.push_back(i);
      expect_element = false;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[':
      case '{':
        ++depth;
        if (depth == 1) expect_element = true;
        break;
      case ']':
      case '}': --depth; break;
      case ',':
        if (depth == 1) expect_element = true;
        break;
      default: break;
    }
  }
  return offsets;
}

inline std::size_t line_of(std::string_view raw, std::size_t offset) {
  return 1 + static_cast<std::size_t>(
                 std::count(raw.begin(), raw.begin() + std::min(offset, raw.size()), '\n'));
}

inline std::optional<std::string> id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  return std::nullopt;
}

inline json parse_json_or_throw(std::string_view raw) {
  try {
    return json::parse(raw.begin(), raw.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON at byte ") + std::to_string(e.byte) +
                         ": " + e.what(),
                     e.byte);
  }
}

}  // namespace detail

// Lenient loader: collects every schema problem instead of stopping at the
// first. Malformed JSON still throws ParseError since nothing can be loaded.
inline CorpusLoad load_corpus(std::string_view raw) {
  using Sev = CorpusIssue::Severity;
  CorpusLoad out;
  json doc = detail::parse_json_or_throw(raw);
  if (!doc.is_array()) {
    out.issues.push_back({Sev::Error, 1, "", "top-level value must be an array of records"});
    return out;
  }
  auto offsets = detail::top_level_element_offsets(raw);
  std::set<std::string> seen;
  // Offsets are increasing, so line numbers are counted incrementally.
  std::size_t counted_to = 0, line_at = 1;
  for (std::size_t idx = 0; idx < doc.size(); ++idx) {
    const json& obj = doc[idx];
    std::size_t line = 0;
    if (idx < offsets.size()) {
      line_at += detail::line_of(raw.substr(counted_to), offsets[idx] - counted_to) - 1;
      counted_to = offsets[idx];
      line = line_at;
    }
    auto error = [&](const std::string& id, std::string msg) {
      out.issues.push_back({Sev::Error, line, id, std::move(msg)});
    };
    if (!obj.is_object()) {
      error("", "record #" + std::to_string(idx) + " is not an object");
      continue;
    }
    std::optional<std::string> id;
    if (obj.contains("id")) id = detail::id_string(obj["id"]);
    if (!id || id->empty()) {
      error("", "record #" + std::to_string(idx) + " has a missing or empty 'id'");
      continue;
    }
    if (!seen.insert(*id).second) {
      error(*id, "duplicate record id '" + *id + "'");
      continue;
    }
    VqaRecord rec;
    rec.id = *id;
    if (!obj.contains("image") || !obj["image"].is_string()) {
      error(*id, "missing string field 'image'");
      continue;
    }
    rec.image_ref = obj["image"].get<std::string>();
    if (!obj.contains("conversations") || !obj["conversations"].is_array()) {
      error(*id, "missing array field 'conversations'");
      continue;
    }
    const json& conv = obj["conversations"];
    bool bad = false;
    for (std::size_t k = 0; k < conv.size() && !bad; ++k) {
      const json& turn = conv[k];
      const char* expected = (k % 2 == 0) ? "human" : "gpt";
      if (!turn.is_object() || !turn.contains("from") || !turn["from"].is_string() ||
          !turn.contains("value") || !turn["value"].is_string()) {
        error(*id, "conversation turn " + std::to_string(k) +
                       " must be an object with string 'from' and 'value'");
        bad = true;
      } else if (turn["from"].get<std::string>() != expected) {
        error(*id, "conversations must alternate human/gpt; turn " + std::to_string(k) +
                       " is '" + turn["from"].get<std::string>() + "', expected '" +
                       expected + "'");
        bad = true;
      }
    }
    if (bad) continue;
    if (conv.size() % 2 != 0) {
      error(*id, "conversation ends with an unanswered question");
      continue;
    }
    if (conv.empty()) {
      error(*id, "record has no question/answer pairs");
      continue;
    }
    for (std::size_t k = 0; k < conv.size(); k += 2) {
      auto q = conv[k]["value"].get<std::string>();
      if (text::trim_view(q).empty()) {
        error(*id, "empty question text at turn " + std::to_string(k));
        bad = true;
        break;
      }
      auto pair = make_qa_pair(std::move(q), conv[k + 1]["value"].get<std::string>());
      if (pair.question_type == QuestionType::General)
        out.issues.push_back({Sev::Warning, line, *id,
                              "question '" + pair.question +
                                  "' matches no known template; typed as general"});
      rec.qa_pairs.push_back(std::move(pair));
    }
    if (bad) continue;
    out.corpus.records.push_back(std::move(rec));
  }
  return out;
}

// Strict loader: throws on the first error. Warnings are appended to
// `warnings` when provided.
inline Corpus parse_corpus(std::string_view raw, std::vector<std::string>* warnings = nullptr) {
  auto load = load_corpus(raw);
  for (const auto& issue : load.issues) {
    if (issue.severity == CorpusIssue::Severity::Error)
      throw SchemaError(issue.to_string(), issue.record_id);
    if (warnings) warnings->push_back(issue.to_string());
  }
  return std::move(load.corpus);
}

inline json corpus_to_json(const Corpus& corpus) {
  json arr = json::array();
  for (const auto& r : corpus.records) {
    json conv = json::array();
    for (const auto& p : r.qa_pairs) {
      conv.push_back({{"from", "human"}, {"value", p.question}});
      conv.push_back({{"from", "gpt"}, {"value", p.reference_answer}});
    }
    arr.push_back({{"id", r.id}, {"image", r.image_ref}, {"conversations", std::move(conv)}});
  }
  return arr;
}

inline std::string serialize_corpus(const Corpus& corpus, int indent = 2) {
  return corpus_to_json(corpus).dump(indent);
}

// ---------------------------------------------------------------------------
// Predictions

inline std::vector<PredictionRecord> parse_predictions(std::string_view raw) {
  std::vector<PredictionRecord> out;
  std::set<std::pair<std::string, QuestionType>> seen;
  std::size_t line_no = 0, start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    auto line = raw.substr(start, end == std::string_view::npos ? std::string_view::npos
                                                                : end - start);
    ++line_no;
    start = end == std::string_view::npos ? raw.size() + 1 : end + 1;
    if (text::trim_view(line).empty()) continue;
    auto where = "predictions line " + std::to_string(line_no) + ": ";
    json obj;
    try {
      obj = json::parse(line.begin(), line.end());
    } catch (const json::parse_error& e) {
      throw ParseError(where + "malformed JSON at byte " + std::to_string(e.byte), e.byte);
    }
    if (!obj.is_object()) throw SchemaError(where + "expected an object", "");
    std::optional<std::string> id;
    if (obj.contains("id")) id = detail::id_string(obj["id"]);
    if (!id) throw SchemaError(where + "missing 'id'", "");
    if (!obj.contains("question_type") || !obj["question_type"].is_string())
      throw SchemaError(where + "missing string 'question_type'", *id);
    auto t = parse_type_name(obj["question_type"].get<std::string>());
    if (!t)
      throw SchemaError(where + "unknown question_type '" +
                            obj["question_type"].get<std::string>() + "'",
                        *id);
    if (!obj.contains("prediction") || !obj["prediction"].is_string())
      throw SchemaError(where + "missing string 'prediction'", *id);
    if (!seen.emplace(*id, *t).second)
      throw SchemaError(where + "duplicate prediction for (" + *id + ", " +
                            std::string(type_name(*t)) + ")",
                        *id);
    out.push_back({*id, *t, obj["prediction"].get<std::string>()});
  }
  return out;
}

inline std::string serialize_predictions(const std::vector<PredictionRecord>& preds) {
  std::string out;
  for (const auto& p : preds) {
    json obj = {{"id", p.id},
                {"question_type", std::string(type_name(p.question_type))},
                {"prediction", p.prediction}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct CorpusSplit {
  Corpus train;
  Corpus test;
  std::uint64_t seed = 0;
  double test_fraction = 0;

  json manifest() const {
    json train_ids = json::array(), test_ids = json::array();
    for (const auto& r : train.records) train_ids.push_back(r.id);
    for (const auto& r : test.records) test_ids.push_back(r.id);
    return {{"train_ids", std::move(train_ids)},
            {"test_ids", std::move(test_ids)},
            {"seed", seed},
            {"fraction", test_fraction}};
  }
};

// Record-level partition. The test side receives ceil(n * test_fraction)
// records (at most n - 1), the train side the remainder; each side keeps the
// corpus order. The permutation is a Fisher-Yates shuffle over
// std::mt19937_64 with rejection-sampled indices, so it is identical on
// every platform.
inline CorpusSplit split_corpus(const Corpus& corpus, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  const std::size_t n = corpus.records.size();
  if (n < 2) throw InputError("split_corpus needs at least 2 records");
  auto n_test = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-9));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do x = rng(); while (x >= limit);
    std::swap(order[i], order[static_cast<std::size_t>(x % bound)]);
  }
  std::vector<char> is_test(n, 0);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;

  CorpusSplit out;
  out.seed = seed;
  out.test_fraction = test_fraction;
  out.train.split_label = SplitLabel::Train;
  out.test.split_label = SplitLabel::Test;
  for (std::size_t i = 0; i < n; ++i)
    (is_test[i] ? out.test : out.train).records.push_back(corpus.records[i]);
  return out;
}

// Table-style summary: records, questions and per-type counts.
struct CorpusSummary {
  std::size_t records = 0;
  std::size_t questions = 0;
  std::map<QuestionType, std::size_t> per_type;

  json to_json() const {
    json pt = json::object();
    for (auto t : kAllQuestionTypes) pt[std::string(type_name(t))] = per_type.count(t) ? per_type.at(t) : 0;
    return {{"records", records}, {"questions", questions}, {"per_type", pt}};
  }
};

inline CorpusSummary summarize(const Corpus& corpus) {
  CorpusSummary s;
  s.records = corpus.records.size();
  for (const auto& r : corpus.records)
    for (const auto& p : r.qa_pairs) {
      ++s.questions;
      ++s.per_type[p.question_type];
    }
  return s;
}

}  // namespace vqar
