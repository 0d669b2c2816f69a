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

// Synthetic question-answering environment for exercising the optimizer:
// each prompt is a (question type, context id) pair whose answer is drawn
// from a small per-type candidate vocabulary.

#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqar/corpus.hpp"
#include "vqar/error.hpp"

namespace vqar {

struct Prompt {
  QuestionType type = QuestionType::General;
  std::string context_id;

  auto operator<=>(const Prompt&) const = default;
  bool operator==(const Prompt&) const = default;

  std::string label() const { return std::string(type_name(type)) + "/" + context_id; }
  json to_json() const { return {{"question_type", std::string(type_name(type))}, {"context_id", context_id}}; }
};

inline Prompt prompt_from_json(const json& j) {
  if (!j.is_object() || !j.contains("question_type") || !j.contains("context_id") ||
      !j["question_type"].is_string() || !j["context_id"].is_string())
    throw SchemaError("prompt needs string 'question_type' and 'context_id'", "");
  return {type_from_name(j["question_type"].get<std::string>()), j["context_id"].get<std::string>()};
}

struct Demonstration {
  Prompt prompt;
  std::string answer;
};

struct ToyEnvironment {
  std::vector<Prompt> contexts;
  std::map<QuestionType, std::vector<std::string>> vocab;
  std::map<Prompt, std::string> reference_answers;
  // Supervised data used to build the reference policy, with its schedule.
  std::vector<Demonstration> demonstrations;
  int sft_steps = 0;
  double sft_learning_rate = 0.5;

  const std::vector<std::string>& candidates(QuestionType t) const {
    auto it = vocab.find(t);
    if (it == vocab.end()) throw InputError("no vocabulary for type '" + std::string(type_name(t)) + "'");
    return it->second;
  }

  std::size_t index_of(QuestionType t, std::string_view answer) const {
    const auto& c = candidates(t);
    auto it = std::find(c.begin(), c.end(), answer);
    if (it == c.end())
      throw InputError("answer '" + std::string(answer) + "' is not in the " +
                       std::string(type_name(t)) + " vocabulary");
    return static_cast<std::size_t>(it - c.begin());
  }

  const std::string& reference(const Prompt& p) const {
    auto it = reference_answers.find(p);
    if (it == reference_answers.end()) throw InputError("no reference answer for " + p.label());
    return it->second;
  }

  std::set<QuestionType> covered_types() const {
    std::set<QuestionType> s;
    for (const auto& p : contexts) s.insert(p.type);
    return s;
  }

  void validate() const {
    if (contexts.empty()) throw InputError("environment has no contexts");
    std::set<Prompt> seen;
    for (const auto& p : contexts) {
      if (!seen.insert(p).second) throw InputError("duplicate context " + p.label());
      const auto& c = candidates(p.type);
      if (c.size() < 2)
        throw InputError("type '" + std::string(type_name(p.type)) + "' needs at least 2 candidates");
      index_of(p.type, reference(p));
    }
    for (const auto& d : demonstrations) {
      if (!seen.count(d.prompt)) throw InputError("demonstration for unknown context " + d.prompt.label());
      index_of(d.prompt.type, d.answer);
    }
  }

  // Round-robin over types: the first context of each type, then the second,
  // and so on.
  std::vector<std::size_t> schedule() const {
    std::map<QuestionType, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < contexts.size(); ++i) by_type[contexts[i].type].push_back(i);
    std::vector<std::size_t> order;
    for (std::size_t round = 0; order.size() < contexts.size(); ++round)
      for (const auto& [t, idx] : by_type)
        if (round < idx.size()) order.push_back(idx[round]);
    return order;
  }

  json to_json() const {
    json ctx = json::array(), voc = json::object(), refs = json::array(), demos = json::array();
    for (const auto& p : contexts) ctx.push_back(p.to_json());
    for (const auto& [t, words] : vocab) voc[std::string(type_name(t))] = words;
    for (const auto& p : contexts) {
      auto j = p.to_json();
      j["answer"] = reference(p);
      refs.push_back(std::move(j));
    }
    for (const auto& d : demonstrations) {
      auto j = d.prompt.to_json();
      j["answer"] = d.answer;
      demos.push_back(std::move(j));
    }
    return {{"contexts", ctx},
            {"vocab", voc},
            {"reference_answers", refs},
            {"demonstrations", demos},
            {"sft", {{"steps", sft_steps}, {"learning_rate", sft_learning_rate}}}};
  }

  static ToyEnvironment from_json(const json& j) {
    ToyEnvironment env;
    if (!j.is_object()) throw SchemaError("environment must be a JSON object", "");
    for (const char* key : {"contexts", "vocab", "reference_answers"})
      if (!j.contains(key)) throw SchemaError(std::string("environment is missing '") + key + "'", "");
    for (const auto& c : j["contexts"]) env.contexts.push_back(prompt_from_json(c));
    for (const auto& [name, words] : j["vocab"].items())
      env.vocab[type_from_name(name)] = words.get<std::vector<std::string>>();
    for (const auto& r : j["reference_answers"]) {
      if (!r.contains("answer") || !r["answer"].is_string())
        throw SchemaError("reference answer entry needs a string 'answer'", "");
      env.reference_answers[prompt_from_json(r)] = r["answer"].get<std::string>();
    }
    if (j.contains("demonstrations"))
      for (const auto& d : j["demonstrations"]) {
        if (!d.contains("answer") || !d["answer"].is_string())
          throw SchemaError("demonstration entry needs a string 'answer'", "");
        env.demonstrations.push_back({prompt_from_json(d), d["answer"].get<std::string>()});
      }
    if (j.contains("sft")) {
      env.sft_steps = j["sft"].value("steps", 0);
      env.sft_learning_rate = j["sft"].value("learning_rate", 0.5);
    }
    env.validate();
    return env;
  }
};

inline const std::vector<std::string>& answer_bank(QuestionType t) {
  static const std::map<QuestionType, std::vector<std::string>> kBank = {
      {QuestionType::Fabric,
       {"ATHENIAN", "CORINTHIAN", "LACONIAN", "BOEOTIAN", "ETRUSCAN", "EUBOEAN", "CHALCIDIAN",
        "APULIAN"}},
      {QuestionType::Technique,
       {"RED-FIGURE", "BLACK-FIGURE", "WHITE GROUND", "BLACK GLAZE", "SILHOUETTE", "OUTLINE",
        "SIX'S TECHNIQUE", "BILINGUAL"}},
      {QuestionType::Shape,
       {"CUP B", "AMPHORA A", "HYDRIA", "LEKYTHOS", "KRATER CALYX", "OINOCHOE", "PELIKE",
        "SKYPHOS"}},
      {QuestionType::Provenance,
       {"VULCI", "ATHENS", "CAPUA", "NOLA", "GELA", "CERVETERI", "TARQUINIA", "RHODES"}},
      {QuestionType::Date,
       {"-450 to -400", "-500 to -450", "-550 to -500", "-600 to -550", "-400 to -350",
        "-525 to -475", "-475 to -425", "-350 to -300"}},
      {QuestionType::Attribution,
       {"CODRUS P", "BERLIN P", "AMASIS P", "EXEKIAS", "ACHILLES P", "PAN P", "BRYGOS P",
        "MEIDIAS P"}},
      {QuestionType::Decoration,
       {"DRAPED SATYRS WITH STORK", "AMAZON ON HORSEBACK", "OWL BETWEEN OLIVE SPRAYS",
        "ATHLETES AND TRAINER", "WARRIOR DEPARTING CHARIOT", "DIONYSOS WITH MAENADS",
        "HERAKLES AND LION", "WOMEN AT FOUNTAIN"}},
      {QuestionType::General,
       {"RED-FIGURE CUP FROM ATHENS", "BLACK-FIGURE AMPHORA WITH WARRIORS",
        "FRAGMENT OF A KRATER", "LEKYTHOS WITH FUNERARY SCENE", "HYDRIA WITH WOMEN",
        "SKYPHOS WITH OWL", "PELIKE WITH ATHLETES", "OINOCHOE WITH SATYR"}},
  };
  return kBank.at(t);
}

struct EnvironmentParams {
  std::vector<QuestionType> types = {QuestionType::Fabric, QuestionType::Technique,
                                     QuestionType::Decoration};
  std::size_t contexts_per_type = 2;
  std::size_t vocab_size = 4;
  std::uint64_t seed = 7;
  // Probability that a context's demonstration is its reference answer;
  // types not listed default to 1.
  std::map<QuestionType, double> demo_accuracy = {{QuestionType::Decoration, 0.5}};
  int sft_steps = 3;
  double sft_learning_rate = 0.5;

  json to_json() const {
    json t = json::array(), acc = json::object();
    for (auto x : types) t.push_back(std::string(type_name(x)));
    for (const auto& [k, v] : demo_accuracy) acc[std::string(type_name(k))] = v;
    return {{"types", t},
            {"contexts_per_type", contexts_per_type},
            {"vocab_size", vocab_size},
            {"seed", seed},
            {"demo_accuracy", acc},
            {"sft_steps", sft_steps},
            {"sft_learning_rate", sft_learning_rate}};
  }
};

// Draws are made with std::mt19937_64 and explicit rejection sampling so the
// same parameters produce the same environment on every platform. With
// demo_accuracy in (0, 1), at least one context of the type gets a wrong
// demonstration and at least one a right one when contexts_per_type >= 2.
inline ToyEnvironment generate_environment(const EnvironmentParams& params) {
  if (params.types.empty()) throw ConfigError("generator needs at least one question type");
  if (params.contexts_per_type < 1) throw ConfigError("contexts_per_type must be >= 1");
  if (params.vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  std::mt19937_64 rng(params.seed);
  auto below = [&rng](std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do x = rng(); while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  };
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  ToyEnvironment env;
  env.sft_steps = params.sft_steps;
  env.sft_learning_rate = params.sft_learning_rate;
  std::set<QuestionType> done;
  for (auto t : params.types) {
    if (!done.insert(t).second) continue;
    auto bank = answer_bank(t);
    if (params.vocab_size > bank.size())
      throw ConfigError("vocab_size exceeds the " + std::to_string(bank.size()) +
                        "-answer bank for " + std::string(type_name(t)));
    for (std::size_t i = bank.size() - 1; i > 0; --i) std::swap(bank[i], bank[below(i + 1)]);
    bank.resize(params.vocab_size);
    env.vocab[t] = bank;

    double acc = params.demo_accuracy.count(t) ? params.demo_accuracy.at(t) : 1.0;
    std::vector<bool> correct(params.contexts_per_type);
    for (std::size_t c = 0; c < params.contexts_per_type; ++c) correct[c] = unit() < acc;
    if (params.contexts_per_type >= 2 && acc > 0.0 && acc < 1.0) {
      if (std::all_of(correct.begin(), correct.end(), [](bool b) { return b; })) correct.back() = false;
      if (std::none_of(correct.begin(), correct.end(), [](bool b) { return b; })) correct.front() = true;
    }
    for (std::size_t c = 0; c < params.contexts_per_type; ++c) {
      Prompt p{t, "ctx" + std::to_string(c)};
      std::size_t ref = below(bank.size());
      env.contexts.push_back(p);
      env.reference_answers[p] = bank[ref];
      std::size_t demo = ref;
      if (!correct[c]) demo = (ref + 1 + below(bank.size() - 1)) % bank.size();
      env.demonstrations.push_back({p, bank[demo]});
    }
  }
  env.validate();
  return env;
}

inline ToyEnvironment bundled_environment() { return generate_environment(EnvironmentParams{}); }

inline std::string question_for(QuestionType t) {
  switch (t) {
    case QuestionType::Shape: return "What is the shape name of the vase?";
    case QuestionType::General: return "Describe the vase.";
    default: return "What is the " + std::string(type_name(t)) + " of the vase?";
  }
}

// One record per context id, one templated question per type.
inline Corpus environment_corpus(const ToyEnvironment& env) {
  Corpus c;
  std::map<std::string, std::size_t> index;
  for (const auto& p : env.contexts) {
    auto [it, fresh] = index.emplace(p.context_id, c.records.size());
    if (fresh) c.records.push_back({p.context_id, "synthetic://" + p.context_id, {}});
    c.records[it->second].qa_pairs.push_back(make_qa_pair(question_for(p.type), env.reference(p)));
  }
  return c;
}

}  // namespace vqar
