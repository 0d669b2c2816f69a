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

// Type-routed evaluation metrics: ANLS-based accuracy for short factual
// answers, exact date-range accuracy for dates, BLEU@1 for descriptions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "vqar/corpus.hpp"
#include "vqar/error.hpp"
#include "vqar/text.hpp"

namespace vqar {

// Unit-cost edit distance, two-row dynamic program.
template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Distance over Unicode code points of two UTF-8 strings.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  auto ua = text::utf8_decode(a), ub = text::utf8_decode(b);
  return levenshtein(std::span<const char32_t>(ua), std::span<const char32_t>(ub));
}

enum class MetricKind { AnlsAccuracy, DateAccuracy, Bleu1 };

constexpr std::string_view metric_name(MetricKind m) {
  switch (m) {
    case MetricKind::AnlsAccuracy: return "anls_accuracy";
    case MetricKind::DateAccuracy: return "date_accuracy";
    case MetricKind::Bleu1: return "bleu1";
  }
  return "anls_accuracy";
}

constexpr MetricKind metric_for(QuestionType t) {
  switch (t) {
    case QuestionType::Date: return MetricKind::DateAccuracy;
    case QuestionType::Decoration:
    case QuestionType::General: return MetricKind::Bleu1;
    default: return MetricKind::AnlsAccuracy;
  }
}

// ---------------------------------------------------------------------------
// ANLS

// Case-fold, collapse whitespace, strip the answer sentence template.
inline std::string anls_normalize(std::string_view s) {
  return extract_answer_core(text::lower(text::collapse_whitespace(s)));
}

inline double normalized_similarity(std::string_view a, std::string_view b) {
  auto ua = text::utf8_decode(a), ub = text::utf8_decode(b);
  std::size_t len = std::max(ua.size(), ub.size());
  if (len == 0) return 1.0;
  auto d = levenshtein(std::span<const char32_t>(ua), std::span<const char32_t>(ub));
  return 1.0 - static_cast<double>(d) / static_cast<double>(len);
}

inline double anls_score(std::string_view prediction, std::span<const std::string> alternatives,
                         double tau = 0.5) {
  if (alternatives.empty()) throw InputError("anls_score: empty alternatives list");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("anls_score: tau must lie in (0, 1]");
  auto pred = anls_normalize(prediction);
  double best = 0.0;
  for (const auto& alt : alternatives) {
    double sim = normalized_similarity(pred, anls_normalize(alt));
    double s = (1.0 - sim) < tau ? sim : 0.0;
    best = std::max(best, s);
  }
  return best;
}

inline double anls_score(std::string_view prediction,
                         std::initializer_list<std::string> alternatives, double tau = 0.5) {
  std::vector<std::string> v(alternatives);
  return anls_score(prediction, std::span<const std::string>(v), tau);
}

// ---------------------------------------------------------------------------
// Dates

struct DateRange {
  int start_year = 0;  // negative = BCE
  int end_year = 0;

  bool has_year_zero() const { return start_year == 0 || end_year == 0; }
  bool operator==(const DateRange&) const = default;
};

// Canonical form: "S to E", or "S" for a single year.
inline std::string format_date(const DateRange& r) {
  if (r.start_year == r.end_year) return std::to_string(r.start_year);
  return std::to_string(r.start_year) + " to " + std::to_string(r.end_year);
}

namespace detail {

enum class DateTok { Number, EraBce, EraCe, Separator };

struct DateToken {
  DateTok kind;
  long long value = 0;
};

inline bool starts_with_dash(std::string_view s, std::size_t i, std::size_t* len) {
  if (s[i] == '-') {
    *len = 1;
    return true;
  }
  // en dash, em dash, minus sign
  for (std::string_view d : {"\xE2\x80\x93", "\xE2\x80\x94", "\xE2\x88\x92"})
    if (s.substr(i, d.size()) == d) {
      *len = d.size();
      return true;
    }
  return false;
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline std::vector<DateToken> tokenize_date(std::string_view s) {
  std::vector<DateToken> toks;
  auto prev_is_sep = [&] { return toks.empty() || toks.back().kind == DateTok::Separator; };
  auto read_word = [&](std::size_t& j) {
    std::string word;
    while (j < s.size() && (is_alpha(s[j]) || s[j] == '.')) {
      if (s[j] != '.') word.push_back(text::to_lower(s[j]));
      ++j;
    }
    return word;
  };
  // Reads digits at `j`. Only an era may be glued to a number ("450BC");
  // "5th" and similar are rejected.
  auto read_number = [&](std::size_t& j) {
    long long v = 0;
    while (j < s.size() && is_digit(s[j])) {
      v = v * 10 + (s[j] - '0');
      if (v > 100000) throw ParseError("year out of range");
      ++j;
    }
    if (j < s.size() && is_alpha(s[j])) {
      std::size_t k = j;
      auto word = read_word(k);
      if (word != "bc" && word != "bce" && word != "ad" && word != "ce")
        throw ParseError("unexpected suffix '" + word + "' after year");
    }
    return v;
  };
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    std::size_t dash_len = 0;
    if (starts_with_dash(s, i, &dash_len)) {
      bool sign = i + dash_len < s.size() && is_digit(s[i + dash_len]) && prev_is_sep();
      i += dash_len;
      if (sign)
        toks.push_back({DateTok::Number, -read_number(i)});
      else
        toks.push_back({DateTok::Separator});
    } else if (is_digit(c)) {
      toks.push_back({DateTok::Number, read_number(i)});
    } else if (is_alpha(c)) {
      auto word = read_word(i);
      if (word == "bc" || word == "bce")
        toks.push_back({DateTok::EraBce});
      else if (word == "ad" || word == "ce")
        toks.push_back({DateTok::EraCe});
      else if (word == "to" || word == "and" || word == "until" || word == "through")
        toks.push_back({DateTok::Separator});
      // Remaining words ("circa", "about", ...) carry no date information.
    } else {
      ++i;  // whitespace and punctuation
    }
  }
  return toks;
}

}  // namespace detail

// Grammar after template stripping, over tokens {number, era, separator}:
//   [era] NUMBER [era] ( SEPARATOR [era] NUMBER [era] )?
// BC/BCE makes a year negative (absolute value negated); an era written on
// only one side of a range applies to both. The result is ordered so that
// start <= end.
inline DateRange date_parse(std::string_view raw) {
  using detail::DateTok;
  std::string s = extract_answer_core(raw);
  auto toks = detail::tokenize_date(s);
  struct Year {
    long long value;
    int era = 0;  // -1 BCE, +1 CE, 0 none
  };
  std::vector<Year> years;
  std::size_t i = 0;
  auto parse_year = [&]() -> bool {
    int era = 0;
    if (i < toks.size() && (toks[i].kind == DateTok::EraBce || toks[i].kind == DateTok::EraCe)) {
      era = toks[i].kind == DateTok::EraBce ? -1 : 1;
      ++i;
    }
    if (i >= toks.size() || toks[i].kind != DateTok::Number) return false;
    long long v = toks[i++].value;
    if (i < toks.size() && (toks[i].kind == DateTok::EraBce || toks[i].kind == DateTok::EraCe)) {
      int suffix = toks[i].kind == DateTok::EraBce ? -1 : 1;
      if (era != 0 && era != suffix) return false;
      era = suffix;
      ++i;
    }
    years.push_back({v, era});
    return true;
  };
  if (!parse_year()) throw ParseError("no parsable year in '" + std::string(raw) + "'");
  if (i < toks.size()) {
    if (toks[i].kind != DateTok::Separator || (++i, !parse_year()))
      throw ParseError("unrecognized date expression '" + std::string(raw) + "'");
  }
  if (i != toks.size()) throw ParseError("trailing tokens in date '" + std::string(raw) + "'");

  if (years.size() == 2) {
    if (years[0].era == 0) years[0].era = years[1].era;
    if (years[1].era == 0) years[1].era = years[0].era;
  }
  auto resolve = [](const Year& y) {
    long long v = y.era < 0 ? -std::llabs(y.value) : y.value;
    return static_cast<int>(v);
  };
  DateRange r;
  r.start_year = resolve(years.front());
  r.end_year = resolve(years.back());
  if (r.start_year > r.end_year) std::swap(r.start_year, r.end_year);
  return r;
}

inline std::optional<DateRange> try_date_parse(std::string_view s) {
  try {
    return date_parse(s);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

struct DateNotes {
  std::size_t unparsable_predictions = 0;
  std::size_t unparsable_references = 0;
  std::size_t all_references_unparsable = 0;
  std::size_t year_zero = 0;
};

// Overlap credit (|intersection| / |union| of the inclusive year intervals)
// is only used when `partial_credit` is set; the default is exact equality.
inline double date_accuracy(std::string_view prediction, std::span<const std::string> alternatives,
                            bool partial_credit = false, DateNotes* notes = nullptr) {
  if (alternatives.empty()) return 0.0;
  auto pred = try_date_parse(prediction);
  if (pred && pred->has_year_zero() && notes) ++notes->year_zero;
  if (!pred) {
    if (notes) ++notes->unparsable_predictions;
  }
  bool any_ref = false;
  double best = 0.0;
  for (const auto& alt : alternatives) {
    auto ref = try_date_parse(alt);
    if (!ref) {
      if (notes) ++notes->unparsable_references;
      continue;
    }
    any_ref = true;
    if (!pred) continue;
    if (*pred == *ref) return 1.0;
    if (partial_credit) {
      long long lo = std::max(pred->start_year, ref->start_year);
      long long hi = std::min(pred->end_year, ref->end_year);
      long long inter = std::max(0LL, hi - lo + 1);
      long long uni = (static_cast<long long>(pred->end_year) - pred->start_year + 1) +
                      (static_cast<long long>(ref->end_year) - ref->start_year + 1) - inter;
      best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
    }
  }
  if (!any_ref && notes) ++notes->all_references_unparsable;
  return best;
}

inline double date_accuracy(std::string_view prediction,
                            std::initializer_list<std::string> alternatives) {
  std::vector<std::string> v(alternatives);
  return date_accuracy(prediction, std::span<const std::string>(v));
}

// ---------------------------------------------------------------------------
// BLEU@1

using TokenCounts = std::map<std::string, std::size_t>;

inline TokenCounts count_tokens(const std::vector<std::string>& toks) {
  TokenCounts c;
  for (const auto& t : toks) ++c[t];
  return c;
}

// Reference length closest to `c`, ties to the shorter one.
inline std::size_t closest_ref_length(std::size_t c, std::span<const std::size_t> ref_lengths) {
  std::size_t best = ref_lengths.front();
  for (auto r : ref_lengths) {
    auto d = [c](std::size_t x) { return x > c ? x - c : c - x; };
    if (d(r) < d(best) || (d(r) == d(best) && r < best)) best = r;
  }
  return best;
}

// Clipped unigram precision against `max_ref_counts`, times the brevity
// penalty computed from `ref_lengths`. Exposed so callers can vary the
// clipping table independently of the effective reference length.
inline double bleu1_from_counts(const std::vector<std::string>& candidate,
                                const TokenCounts& max_ref_counts,
                                std::span<const std::size_t> ref_lengths,
                                bool brevity_penalty = true) {
  if (candidate.empty() || ref_lengths.empty()) return 0.0;
  std::size_t clipped = 0;
  for (const auto& [tok, n] : count_tokens(candidate)) {
    auto it = max_ref_counts.find(tok);
    if (it != max_ref_counts.end()) clipped += std::min(n, it->second);
  }
  const double c = static_cast<double>(candidate.size());
  double precision = static_cast<double>(clipped) / c;
  double bp = 1.0;
  if (brevity_penalty) {
    auto r = static_cast<double>(closest_ref_length(candidate.size(), ref_lengths));
    if (c < r) bp = std::exp(1.0 - r / c);
  }
  return precision * bp;
}

inline double bleu1(std::string_view prediction, std::span<const std::string> alternatives,
                    bool brevity_penalty = true) {
  if (alternatives.empty()) throw InputError("bleu1: empty alternatives list");
  auto cand = text::word_tokens(prediction);
  TokenCounts max_counts;
  std::vector<std::size_t> lengths;
  for (const auto& alt : alternatives) {
    auto toks = text::word_tokens(alt);
    lengths.push_back(toks.size());
    for (const auto& [tok, n] : count_tokens(toks)) max_counts[tok] = std::max(max_counts[tok], n);
  }
  return bleu1_from_counts(cand, max_counts, lengths, brevity_penalty);
}

inline double bleu1(std::string_view prediction, std::initializer_list<std::string> alternatives,
                    bool brevity_penalty = true) {
  std::vector<std::string> v(alternatives);
  return bleu1(prediction, std::span<const std::string>(v), brevity_penalty);
}

// ---------------------------------------------------------------------------
// Evaluation

struct MetricSettings {
  double tau = 0.5;
  bool brevity_penalty = true;
  bool date_partial_credit = false;

  json to_json() const {
    return {{"tau", tau},
            {"brevity_penalty", brevity_penalty},
            {"date_partial_credit", date_partial_credit}};
  }
};

// Scores one answer with the metric routed from `type`.
inline double score_instance(QuestionType type, std::string_view prediction,
                             std::span<const std::string> alternatives,
                             const MetricSettings& settings = {}, DateNotes* notes = nullptr) {
  switch (metric_for(type)) {
    case MetricKind::AnlsAccuracy: return anls_score(prediction, alternatives, settings.tau);
    case MetricKind::DateAccuracy:
      return date_accuracy(prediction, alternatives, settings.date_partial_credit, notes);
    case MetricKind::Bleu1: {
      std::vector<std::string> refs;
      refs.reserve(alternatives.size());
      for (const auto& a : alternatives) refs.push_back(extract_answer_core(a));
      return bleu1(extract_answer_core(prediction), refs, settings.brevity_penalty);
    }
  }
  return 0.0;
}

struct TypeScore {
  double mean_score = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::map<QuestionType, TypeScore> per_type;
  double overall = 0.0;
  std::size_t instances = 0;
  std::size_t missing = 0;
  double tau = 0.5;
  DateNotes date_notes;
  json metadata = json::object();

  json to_json() const {
    json pt = json::object();
    for (const auto& [t, s] : per_type)
      pt[std::string(type_name(t))] = {{"mean_score", s.mean_score},
                                       {"count", s.count},
                                       {"metric", std::string(metric_name(metric_for(t)))}};
    return {{"per_type", pt},
            {"overall", overall},
            {"overall_definition", "instance-weighted mean of per-type means"},
            {"instances", instances},
            {"missing", missing},
            {"tau", tau},
            {"date_validation",
             {{"unparsable_predictions", date_notes.unparsable_predictions},
              {"unparsable_references", date_notes.unparsable_references},
              {"all_references_unparsable", date_notes.all_references_unparsable},
              {"year_zero", date_notes.year_zero}}},
            {"metadata", metadata}};
  }

  // Accepts either the full serialized report or a bare
  // {"per_type": {"fabric": 0.99, ...}} map of means.
  static EvalReport from_json(const json& j) {
    EvalReport r;
    if (!j.is_object() || !j.contains("per_type") || !j["per_type"].is_object())
      throw SchemaError("evaluation report needs an object field 'per_type'", "");
    std::size_t total = 0;
    double weighted = 0.0;
    for (const auto& [name, v] : j["per_type"].items()) {
      auto t = parse_type_name(name);
      if (!t) throw SchemaError("unknown question type '" + name + "' in report", "");
      TypeScore s;
      if (v.is_number()) {
        s.mean_score = v.get<double>();
        s.count = 1;
      } else if (v.is_object() && v.contains("mean_score") && v["mean_score"].is_number()) {
        s.mean_score = v["mean_score"].get<double>();
        s.count = v.value("count", std::size_t{1});
      } else {
        throw SchemaError("per_type entry '" + name + "' must be a number or hold 'mean_score'", "");
      }
      if (!(s.mean_score >= 0.0 && s.mean_score <= 1.0))
        throw SchemaError("per_type score for '" + name + "' outside [0, 1]", "");
      total += s.count;
      weighted += s.mean_score * static_cast<double>(s.count);
      r.per_type[*t] = s;
    }
    r.instances = j.value("instances", total);
    r.missing = j.value("missing", std::size_t{0});
    r.tau = j.value("tau", 0.5);
    r.overall = j.contains("overall") && j["overall"].is_number()
                    ? j["overall"].get<double>()
                    : (total ? weighted / static_cast<double>(total) : 0.0);
    if (j.contains("metadata")) r.metadata = j["metadata"];
    return r;
  }
};

// Scores every QA pair of `corpus`. A prediction keyed (id, type) applies to
// every pair of that type in the record; pairs without a prediction score 0
// and are counted as missing. Accumulation runs in (record id, type, pair
// index) order so results do not depend on input ordering.
inline EvalReport evaluate(const Corpus& corpus, std::span<const PredictionRecord> predictions,
                           const MetricSettings& settings = {}) {
  std::map<std::pair<std::string, QuestionType>, const PredictionRecord*> by_key;
  for (const auto& p : predictions) by_key[{p.id, p.question_type}] = &p;

  std::set<std::pair<std::string, QuestionType>> known;
  for (const auto& r : corpus.records)
    for (const auto& q : r.qa_pairs) known.emplace(r.id, q.question_type);
  std::vector<std::string> offenders;
  for (const auto& p : predictions)
    if (!known.count({p.id, p.question_type}))
      offenders.push_back("(" + p.id + ", " + std::string(type_name(p.question_type)) + ")");
  if (!offenders.empty())
    throw InputError("predictions reference unknown (id, question_type): " +
                     text::join(offenders, ", "));

  struct Instance {
    const std::string* id;
    QuestionType type;
    std::size_t index;
    const QaPair* pair;
  };
  std::vector<Instance> instances;
  for (const auto& r : corpus.records)
    for (std::size_t i = 0; i < r.qa_pairs.size(); ++i)
      instances.push_back({&r.id, r.qa_pairs[i].question_type, i, &r.qa_pairs[i]});
  std::sort(instances.begin(), instances.end(), [](const Instance& a, const Instance& b) {
    return std::tie(*a.id, a.type, a.index) < std::tie(*b.id, b.type, b.index);
  });

  EvalReport report;
  report.tau = settings.tau;
  std::map<QuestionType, double> sums;
  double total = 0.0;
  for (const auto& inst : instances) {
    auto& ts = report.per_type[inst.type];
    ++ts.count;
    ++report.instances;
    auto it = by_key.find({*inst.id, inst.type});
    double s = 0.0;
    if (it == by_key.end()) {
      ++report.missing;
    } else {
      s = score_instance(inst.type, it->second->prediction, inst.pair->alternatives, settings,
                         &report.date_notes);
    }
    sums[inst.type] += s;
    total += s;
  }
  for (auto& [t, ts] : report.per_type) ts.mean_score = sums[t] / static_cast<double>(ts.count);
  report.overall = report.instances ? total / static_cast<double>(report.instances) : 0.0;
  report.metadata["settings"] = settings.to_json();
  return report;
}

inline EvalReport evaluate(const Corpus& corpus, const std::vector<PredictionRecord>& predictions,
                           const MetricSettings& settings = {}) {
  return evaluate(corpus, std::span<const PredictionRecord>(predictions), settings);
}

}  // namespace vqar
