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

// Reference implementations used only by the tests. None of them call into
// the library's metric, reward or policy code; they recompute each quantity
// from its definition with different machinery (full DP tables, regexes,
// explicit set algebra, long-double sums).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace oracle {

inline std::u32string decode(const std::string& s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    int n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    char32_t cp = n == 1 ? c : n == 2 ? (c & 0x1F) : n == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; k < n && i + k < s.size(); ++k)
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += n;
  }
  return out;
}

// Full (n+1) x (m+1) Wagner-Fischer table.
inline std::size_t edit_distance(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t best = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      best = std::min(best, d[i - 1][j] + 1);
      best = std::min(best, d[i][j - 1] + 1);
      d[i][j] = best;
    }
  return d[a.size()][b.size()];
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  return edit_distance(decode(a), decode(b));
}

inline std::string ascii_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](char c) { return (c >= 'A' && c <= 'Z') ? char(c + 32) : c; });
  return s;
}

inline std::string regex_trim(const std::string& s) {
  static const std::regex edges(R"(^[ \t\n\r\f\v]+|[ \t\n\r\f\v]+$)");
  return std::regex_replace(s, edges, "");
}

// Lowercase, collapse whitespace, drop the answer template and one
// trailing period.
inline std::string anls_normalize(const std::string& raw) {
  static const std::regex ws(R"([ \t\n\r\f\v]+)");
  static const std::regex attributed(R"(^the vase is attributed to ([\s\S]*)$)");
  static const std::regex of_the_vase(R"(^the ([\s\S]+?) of the vase is ([\s\S]*)$)");
  std::string s = regex_trim(std::regex_replace(ascii_lower(raw), ws, " "));
  std::smatch m;
  if (std::regex_match(s, m, attributed)) s = regex_trim(m[1].str());
  else if (std::regex_match(s, m, of_the_vase)) s = regex_trim(m[2].str());
  if (!s.empty() && s.back() == '.') s = regex_trim(s.substr(0, s.size() - 1));
  return s;
}

inline double anls(const std::string& pred, const std::vector<std::string>& alts, double tau = 0.5) {
  double best = 0.0;
  auto p = decode(anls_normalize(pred));
  for (const auto& alt : alts) {
    auto r = decode(anls_normalize(alt));
    std::size_t len = std::max(p.size(), r.size());
    double sim = len == 0 ? 1.0 : 1.0 - double(edit_distance(p, r)) / double(len);
    if (1.0 - sim < tau) best = std::max(best, sim);
  }
  return best;
}

// Date normalization by pattern matching on the whole string.
inline std::optional<std::pair<int, int>> date(const std::string& raw) {
  static const std::string era = R"((bce|bc|b\.c\.e\.|b\.c\.|ce|ad|a\.d\.|c\.e\.))";
  static const std::regex tmpl(R"(^the date of the vase is\s+)");
  static const std::regex circa(R"(^(circa|about|c\.)\s+)");
  static const std::regex range("^(?:" + era + R"(\s*)?(-?\d+)\s*)" + "(?:" + era + R"()?\s*(?:to|-|–|—|until)\s*)" +
                                "(?:" + era + R"(\s*)?(-?\d+)\s*)" + "(?:" + era + ")?$");
  static const std::regex single("^(?:" + era + R"(\s*)?(-?\d+)\s*)" + "(?:" + era + ")?$");
  std::string s = regex_trim(ascii_lower(raw));
  s = std::regex_replace(s, tmpl, "");
  if (!s.empty() && s.back() == '.' && !std::regex_search(s, std::regex(R"((b\.c\.|a\.d\.|c\.e\.|b\.c\.e\.)$)")))
    s = regex_trim(s.substr(0, s.size() - 1));
  s = std::regex_replace(s, circa, "");
  auto sign = [](const std::string& e) {
    if (e.empty()) return 0;
    return e[0] == 'b' ? -1 : 1;
  };
  auto resolve = [](int v, int e) { return e < 0 ? -std::abs(v) : v; };
  std::smatch m;
  if (std::regex_match(s, m, range)) {
    int e1 = sign(m[1].str()), e1s = sign(m[3].str()), e2 = sign(m[4].str()), e2s = sign(m[6].str());
    if ((e1 && e1s && e1 != e1s) || (e2 && e2s && e2 != e2s)) return std::nullopt;
    int a_era = e1 ? e1 : e1s, b_era = e2 ? e2 : e2s;
    if (!a_era) a_era = b_era;
    if (!b_era) b_era = a_era;
    int a = resolve(std::stoi(m[2].str()), a_era), b = resolve(std::stoi(m[5].str()), b_era);
    return std::make_pair(std::min(a, b), std::max(a, b));
  }
  if (std::regex_match(s, m, single)) {
    int e1 = sign(m[1].str()), e1s = sign(m[3].str());
    if (e1 && e1s && e1 != e1s) return std::nullopt;
    int a = resolve(std::stoi(m[2].str()), e1 ? e1 : e1s);
    return std::make_pair(a, a);
  }
  return std::nullopt;
}

inline std::vector<std::string> regex_tokens(const std::string& s) {
  static const std::regex word(R"([a-z0-9\x80-\xff]+)");
  std::string low = ascii_lower(s);
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(low.begin(), low.end(), word); it != std::sregex_iterator(); ++it)
    out.push_back(it->str());
  return out;
}

inline std::set<std::string> keywords(const std::string& s) {
  static const std::set<std::string> stop = {"the", "a",    "an", "of", "is", "to", "by",
                                             "with", "and", "or", "on", "in", "vase"};
  std::set<std::string> out;
  for (auto& t : regex_tokens(s))
    if (!stop.count(t)) out.insert(t);
  return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::set<std::string> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
  return double(inter.size()) / double(uni.size());
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += static_cast<long double>(p[i]) * std::log(static_cast<long double>(p[i]) / q[i]);
  return static_cast<double>(s);
}

inline std::vector<double> softmax(const std::vector<double>& z, double t) {
  long double mx = *std::max_element(z.begin(), z.end()), sum = 0.0L;
  std::vector<long double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) sum += e[i] = std::exp((z[i] - mx) / t);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
  return out;
}

}  // namespace oracle

// ---------------------------------------------------------------------------
// Corpus fixtures

namespace fixture {

using nlohmann::json;

inline const std::vector<std::pair<std::string, std::string>>& sample_exchange() {
  static const std::vector<std::pair<std::string, std::string>> kQa = {
      {"What is the fabric of the vase?", "The fabric of the vase is ATHENIAN."},
      {"What is the technique of the vase?", "The technique of the vase is RED-FIGURE."},
      {"What is the shape name of the vase?", "The shape name of the vase is CUP B."},
      {"What is the provenance of the vase?", "The provenance of the vase is not available."},
      {"What is the date of the vase?", "The date of the vase is -450 to -400."},
      {"What is the attribution of the vase?",
       "The vase is attributed to CODRUS P by BURN | CODRUS P by UNKNOWN."},
      {"What is the decoration of the vase?",
       "The decoration of the vase is A,B: THEATRICAL, DRAPED SATYRS, WITH STORK, BOX AND SANDAL, "
       "ARYBALLOI, OINOCHOE, LYRE AND STAFFS, ONE CONFRONTING DRAPED YOUTH | I: AMAZON ON HORSEBACK."},
      {"Describe the vase in detail.",
       "An Athenian red-figure cup with draped satyrs and an Amazon on horseback."},
  };
  return kQa;
}

inline json record(const std::string& id, const std::string& image,
                   const std::vector<std::pair<std::string, std::string>>& qa) {
  json conv = json::array();
  for (const auto& [q, a] : qa) {
    conv.push_back({{"from", "human"}, {"value", q}});
    conv.push_back({{"from", "gpt"}, {"value", a}});
  }
  return {{"id", id}, {"image", image}, {"conversations", conv}};
}

inline std::string sample_corpus() {
  json doc = json::array();
  doc.push_back(record("vase_0001", "images/vase_0001.jpg", sample_exchange()));
  return doc.dump(2);
}

// Records with every exchange; used for the split-size and summary checks.
inline std::string manifest(std::size_t records) {
  std::string out = "[";
  for (std::size_t i = 0; i < records; ++i) {
    if (i) out += ",\n";
    out += record("v" + std::to_string(i), "img/" + std::to_string(i) + ".jpg", sample_exchange()).dump();
  }
  return out + "]";
}

inline const std::vector<std::pair<std::string, double>>& sft_row() {
  static const std::vector<std::pair<std::string, double>> kRow = {
      {"fabric", 0.9996},     {"technique", 0.9499},   {"shape", 0.8398},   {"provenance", 0.7167},
      {"date", 0.3796},       {"attribution", 0.5696}, {"decoration", 0.0257}};
  return kRow;
}

// A 10,000-record corpus plus predictions whose routed per-type means are
// exactly the supplied row: the first round(score * 10000) records of each
// type get the reference back, the rest get an answer that scores 0.
struct ScoredFixture {
  std::string corpus;
  std::string predictions;
};

inline ScoredFixture scored_fixture(const std::vector<std::pair<std::string, double>>& row,
                                    std::size_t n = 10000) {
  static const std::map<std::string, std::pair<std::string, std::string>> kQa = {
      {"fabric", {"What is the fabric of the vase?", "The fabric of the vase is ATHENIAN."}},
      {"technique", {"What is the technique of the vase?", "The technique of the vase is RED-FIGURE."}},
      {"shape", {"What is the shape name of the vase?", "The shape name of the vase is CUP B."}},
      {"provenance", {"What is the provenance of the vase?", "The provenance of the vase is VULCI."}},
      {"date", {"What is the date of the vase?", "The date of the vase is -450 to -400."}},
      {"attribution", {"What is the attribution of the vase?", "The vase is attributed to CODRUS P."}},
      {"decoration", {"What is the decoration of the vase?", "The decoration of the vase is DRAPED SATYRS."}},
  };
  static const std::map<std::string, std::string> kWrong = {
      {"fabric", "QQQQQQQQQQ"},      {"technique", "QQQQQQQQQQ"}, {"shape", "QQQQQQQQQQ"},
      {"provenance", "QQQQQQQQQQ"},  {"date", "1200 to 1300"},    {"attribution", "QQQQQQQQQQ"},
      {"decoration", "lyre"}};
  ScoredFixture f;
  f.corpus = "[";
  std::vector<std::size_t> correct;
  for (const auto& [t, s] : row) correct.push_back(static_cast<std::size_t>(std::llround(s * double(n))));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<std::string, std::string>> qa;
    for (const auto& [t, s] : row) qa.push_back(kQa.at(t));
    if (i) f.corpus += ",\n";
    std::string id = "r" + std::to_string(i);
    f.corpus += record(id, id + ".jpg", qa).dump();
    for (std::size_t k = 0; k < row.size(); ++k) {
      const auto& t = row[k].first;
      std::string pred = i < correct[k] ? kQa.at(t).second : kWrong.at(t);
      f.predictions += json({{"id", id}, {"question_type", t}, {"prediction", pred}}).dump() + "\n";
    }
  }
  f.corpus += "]";
  return f;
}

}  // namespace fixture
