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

// Turns a per-type evaluation into a shortcoming set and a reward config
// that amplifies those types.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqar/corpus.hpp"
#include "vqar/error.hpp"
#include "vqar/metrics.hpp"
#include "vqar/reward.hpp"

namespace vqar {

enum class SelectionRule {
  Threshold,  // every covered type scoring below theta
  BottomK,    // the k lowest-scoring covered types
};

inline constexpr double kDefaultDiagnosisThreshold = 0.6;

struct DiagnosisOptions {
  double threshold = kDefaultDiagnosisThreshold;
  SelectionRule rule = SelectionRule::Threshold;
  std::size_t bottom_k = 2;
  double amplification = kDefaultAmplification;
};

struct DiagnosisReport {
  std::map<QuestionType, double> per_type_scores;
  double threshold = kDefaultDiagnosisThreshold;
  SelectionRule rule = SelectionRule::Threshold;
  std::set<QuestionType> shortcomings;
  std::set<QuestionType> uncovered;
  RewardConfig derived_config = RewardConfig::defaults();

  json to_json() const {
    json scores = json::object(), shorts = json::array(), unc = json::array();
    for (const auto& [t, s] : per_type_scores) scores[std::string(type_name(t))] = s;
    for (auto t : kAllQuestionTypes) {
      if (shortcomings.count(t)) shorts.push_back(std::string(type_name(t)));
      if (uncovered.count(t)) unc.push_back(std::string(type_name(t)));
    }
    return {{"per_type_scores", scores},
            {"threshold", threshold},
            {"selection_rule", rule == SelectionRule::Threshold ? "threshold" : "bottom_k"},
            {"shortcomings", shorts},
            {"uncovered", unc},
            {"reward_config", derived_config.to_text()}};
  }
};

inline RewardConfig derive_reward_config(const std::set<QuestionType>& shortcomings,
                                         const std::map<QuestionType, TypeWeights>& base_betas,
                                         double w_amp) {
  if (!(w_amp > 1.0)) throw ConfigError("amplification factor must be > 1");
  RewardConfig c;
  c.betas = base_betas;
  c.shortcomings = shortcomings;
  for (auto t : kAllQuestionTypes) c.amplification[t] = shortcomings.count(t) ? w_amp : 1.0;
  c.validate();
  return c;
}

inline RewardConfig derive_reward_config(const DiagnosisReport& diagnosis,
                                         const std::map<QuestionType, TypeWeights>& base_betas,
                                         double w_amp) {
  auto c = derive_reward_config(diagnosis.shortcomings, base_betas, w_amp);
  c.metadata["diagnosis_threshold"] = json(diagnosis.threshold).dump();
  return c;
}

inline DiagnosisReport diagnose(const EvalReport& report, const DiagnosisOptions& options,
                                const std::map<QuestionType, TypeWeights>& base_betas =
                                    RewardConfig::defaults().betas) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0))
    throw ConfigError("diagnosis threshold must lie in (0, 1)");
  if (report.per_type.empty()) throw InputError("evaluation report covers no question type");
  DiagnosisReport d;
  d.threshold = options.threshold;
  d.rule = options.rule;
  for (const auto& [t, s] : report.per_type) d.per_type_scores[t] = s.mean_score;
  for (auto t : kAllQuestionTypes)
    if (!d.per_type_scores.count(t)) d.uncovered.insert(t);

  if (options.rule == SelectionRule::Threshold) {
    for (const auto& [t, s] : d.per_type_scores)
      if (s < options.threshold) d.shortcomings.insert(t);
  } else {
    std::vector<std::pair<double, QuestionType>> ranked;
    for (const auto& [t, s] : d.per_type_scores) ranked.emplace_back(s, t);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < ranked.size() && i < options.bottom_k; ++i)
      d.shortcomings.insert(ranked[i].second);
  }
  d.derived_config = derive_reward_config(d, base_betas, options.amplification);
  return d;
}

inline DiagnosisReport diagnose(const EvalReport& report,
                                double threshold = kDefaultDiagnosisThreshold) {
  DiagnosisOptions o;
  o.threshold = threshold;
  return diagnose(report, o);
}

// Reads either a reward-config text file or a serialized DiagnosisReport
// (whose "reward_config" field holds the same text).
inline RewardConfig load_reward_config(std::string_view raw) {
  auto t = text::trim_view(raw);
  if (!t.empty() && t.front() == '{') {
    json j = detail::parse_json_or_throw(t);
    if (!j.contains("reward_config") || !j["reward_config"].is_string())
      throw ConfigError("JSON reward config must carry a 'reward_config' string");
    return RewardConfig::from_text(j["reward_config"].get<std::string>());
  }
  return RewardConfig::from_text(raw);
}

}  // namespace vqar
