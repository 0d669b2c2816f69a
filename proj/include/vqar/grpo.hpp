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

// Group-relative policy optimization over tabular softmax policies.
//
// The optimized objective per batch of rollout groups is
//
//   J = mean_k min(rho_k A_k, clip(rho_k, 1 - eps, 1 + eps) A_k)
//       - lambda * mean_groups KL(pi_theta || pi_ref)
//
// with rho_k = pi_theta(a_k) / pi_old(a_k) and A_k = r_k - mean(r). KL is
// exact over the finite candidate set. Gradients are analytic.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqar/error.hpp"
#include "vqar/reward.hpp"
#include "vqar/toy_env.hpp"

namespace vqar {

using LogitTable = std::map<Prompt, std::vector<double>>;

// Sampling RNG. std::mt19937_64 output is fully specified by the standard;
// uniforms are built from its raw bits rather than std:: distributions,
// whose algorithms are implementation-defined.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Sub-seed for stream `stream` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

inline std::vector<double> softmax(std::span<const double> logits, double temperature) {
  std::vector<double> p(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (double z : logits) mx = std::max(mx, z / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] / temperature - mx);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return p;
}

struct ToyPolicy {
  LogitTable logits;
  double temperature = 1.0;

  static ToyPolicy uniform(const ToyEnvironment& env, double temperature = 1.0) {
    ToyPolicy p;
    p.temperature = temperature;
    for (const auto& c : env.contexts) p.logits[c].assign(env.candidates(c.type).size(), 0.0);
    return p;
  }

  const std::vector<double>& logits_for(const Prompt& prompt) const {
    auto it = logits.find(prompt);
    if (it == logits.end()) throw InputError("policy has no entry for prompt " + prompt.label());
    return it->second;
  }

  std::vector<double> probabilities(const Prompt& prompt) const {
    return softmax(logits_for(prompt), temperature);
  }

  double log_prob(const Prompt& prompt, std::size_t answer) const {
    const auto& z = logits_for(prompt);
    if (answer >= z.size()) throw InputError("answer index out of range for " + prompt.label());
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : z) mx = std::max(mx, v / temperature);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v / temperature - mx);
    return z[answer] / temperature - mx - std::log(sum);
  }

  std::size_t greedy(const Prompt& prompt) const {
    const auto& z = logits_for(prompt);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  }

  json to_json() const {
    json entries = json::array();
    for (const auto& [p, z] : logits) {
      auto j = p.to_json();
      j["logits"] = z;
      j["probabilities"] = softmax(z, temperature);
      entries.push_back(std::move(j));
    }
    return {{"temperature", temperature}, {"prompts", entries}};
  }

  static ToyPolicy from_json(const json& j) {
    ToyPolicy p;
    p.temperature = j.at("temperature").get<double>();
    for (const auto& e : j.at("prompts")) p.logits[prompt_from_json(e)] = e.at("logits").get<std::vector<double>>();
    return p;
  }

  bool operator==(const ToyPolicy&) const = default;
};

struct GrpoConfig {
  std::size_t group_size = 8;      // K
  double temperature = 0.9;
  double kl_coef = 0.04;           // lambda
  double clip_epsilon = 0.2;
  double learning_rate = 1e-6;
  std::size_t epochs = 2;
  std::size_t iterations_per_batch = 1;
  std::uint64_t seed = 0;
  bool normalize_advantages_by_std = false;

  void validate() const {
    if (group_size < 2) throw ConfigError("group size K must be >= 2");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (!(kl_coef >= 0.0)) throw ConfigError("KL coefficient must be >= 0");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("clip epsilon must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (iterations_per_batch < 1) throw ConfigError("iterations per batch must be >= 1");
  }

  json to_json() const {
    return {{"group_size", group_size},
            {"temperature", temperature},
            {"kl_coef", kl_coef},
            {"clip_epsilon", clip_epsilon},
            {"learning_rate", learning_rate},
            {"epochs", epochs},
            {"iterations_per_batch", iterations_per_batch},
            {"seed", seed},
            {"normalize_advantages_by_std", normalize_advantages_by_std}};
  }
};

struct Completion {
  std::size_t answer = 0;
  std::string text;
  std::optional<double> old_log_prob;
};

struct RolloutGroup {
  Prompt prompt;
  std::vector<Completion> completions;
  std::vector<double> rewards;
  double baseline = 0.0;
  std::vector<double> advantages;
};

// ---------------------------------------------------------------------------
// Sampling and advantages

inline std::vector<Completion> sample_group(const ToyPolicy& policy, const ToyEnvironment& env,
                                            const Prompt& prompt, std::size_t k, Rng& rng) {
  auto probs = policy.probabilities(prompt);
  const auto& words = env.candidates(prompt.type);
  if (words.size() != probs.size()) throw InputError("policy and vocabulary disagree for " + prompt.label());
  std::vector<Completion> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    double u = uniform01(rng), acc = 0.0;
    std::size_t pick = probs.size() - 1;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      acc += probs[j];
      if (u < acc) {
        pick = j;
        break;
      }
    }
    while (probs[pick] == 0.0 && pick > 0) --pick;  // guard rounding at the upper tail
    out.push_back({pick, words[pick], policy.log_prob(prompt, pick)});
  }
  return out;
}

inline std::vector<double> compute_advantages(std::span<const double> rewards,
                                              bool normalize_by_std = false) {
  if (rewards.size() < 2) throw InputError("advantages need a group of at least 2 rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  std::vector<double> a(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) a[i] = rewards[i] - mean;
  if (normalize_by_std) {
    double var = 0.0;
    for (double x : a) var += x * x;
    double sd = std::max(std::sqrt(var / static_cast<double>(a.size())), 1e-8);
    for (auto& x : a) x /= sd;
  }
  return a;
}

inline RolloutGroup make_group(Prompt prompt, std::vector<Completion> completions,
                               std::vector<double> rewards, bool normalize_by_std = false) {
  RolloutGroup g;
  g.prompt = std::move(prompt);
  g.completions = std::move(completions);
  g.advantages = compute_advantages(rewards, normalize_by_std);
  double mean = 0.0;
  for (double r : rewards) mean += r;
  g.baseline = mean / static_cast<double>(rewards.size());
  g.rewards = std::move(rewards);
  return g;
}

// ---------------------------------------------------------------------------
// KL

inline double kl_divergence(std::span<const double> p, std::span<const double> q,
                            const std::vector<std::string>* names = nullptr) {
  if (p.size() != q.size()) throw InputError("KL: distributions have different supports");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0)
      throw NumericError("KL: reference assigns zero probability to candidate '" +
                         (names && i < names->size() ? (*names)[i] : std::to_string(i)) + "'");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

inline double kl_divergence(const ToyPolicy& p, const ToyPolicy& q, const Prompt& prompt,
                            const ToyEnvironment* env = nullptr) {
  auto pp = p.probabilities(prompt), qq = q.probabilities(prompt);
  const std::vector<std::string>* names = nullptr;
  if (env && env->vocab.count(prompt.type)) names = &env->candidates(prompt.type);
  return kl_divergence(pp, qq, names);
}

inline double mean_kl(const ToyPolicy& p, const ToyPolicy& q, std::span<const Prompt> prompts) {
  if (prompts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& pr : prompts) s += kl_divergence(p, q, pr);
  return s / static_cast<double>(prompts.size());
}

// ---------------------------------------------------------------------------
// Surrogate

namespace detail {

inline void check_groups(std::span<const RolloutGroup> groups) {
  if (groups.empty()) throw InputError("surrogate needs at least one rollout group");
  for (const auto& g : groups) {
    if (g.advantages.size() != g.completions.size())
      throw InputError("group for " + g.prompt.label() + " has mismatched advantages");
    for (const auto& c : g.completions)
      if (!c.old_log_prob)
        throw InputError("completion '" + c.text + "' for " + g.prompt.label() +
                         " has no sampling-time log-probability");
  }
}

inline std::size_t completion_count(std::span<const RolloutGroup> groups) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.completions.size();
  return n;
}

}  // namespace detail

inline double clipped_term(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

inline double surrogate_objective(const ToyPolicy& policy, std::span<const RolloutGroup> groups,
                                  const ToyPolicy& ref_policy, double kl_coef, double eps) {
  detail::check_groups(groups);
  double total = 0.0;
  for (const auto& g : groups)
    for (std::size_t k = 0; k < g.completions.size(); ++k) {
      const auto& c = g.completions[k];
      double ratio = std::exp(policy.log_prob(g.prompt, c.answer) - *c.old_log_prob);
      total += clipped_term(ratio, g.advantages[k], eps);
    }
  double obj = total / static_cast<double>(detail::completion_count(groups));
  if (kl_coef != 0.0) {
    double kl = 0.0;
    for (const auto& g : groups) kl += kl_divergence(policy, ref_policy, g.prompt);
    obj -= kl_coef * kl / static_cast<double>(groups.size());
  }
  return obj;
}

// d/dz of surrogate_objective. A term sits in the clipped (flat) region when
// A > 0 and rho > 1 + eps, or A < 0 and rho < 1 - eps; everywhere else,
// including exactly at a kink, the unclipped branch rho * A is
// differentiated.
inline LogitTable surrogate_gradient(const ToyPolicy& policy, std::span<const RolloutGroup> groups,
                                     const ToyPolicy& ref_policy, double kl_coef, double eps) {
  detail::check_groups(groups);
  LogitTable grad;
  for (const auto& [p, z] : policy.logits) grad[p].assign(z.size(), 0.0);
  const double inv_t = 1.0 / policy.temperature;
  const double inv_n = 1.0 / static_cast<double>(detail::completion_count(groups));
  const double inv_g = 1.0 / static_cast<double>(groups.size());

  for (const auto& g : groups) {
    auto probs = policy.probabilities(g.prompt);
    auto& gz = grad.at(g.prompt);
    for (std::size_t k = 0; k < g.completions.size(); ++k) {
      const auto& c = g.completions[k];
      double a = g.advantages[k];
      if (a == 0.0) continue;
      double ratio = std::exp(policy.log_prob(g.prompt, c.answer) - *c.old_log_prob);
      bool flat = (a > 0.0 && ratio > 1.0 + eps) || (a < 0.0 && ratio < 1.0 - eps);
      if (flat) continue;
      double scale = a * ratio * inv_t * inv_n;
      for (std::size_t j = 0; j < gz.size(); ++j)
        gz[j] += scale * ((j == c.answer ? 1.0 : 0.0) - probs[j]);
    }
    if (kl_coef != 0.0) {
      auto q = ref_policy.probabilities(g.prompt);
      double kl = kl_divergence(probs, q);
      for (std::size_t j = 0; j < gz.size(); ++j) {
        if (probs[j] <= 0.0) continue;
        gz[j] -= kl_coef * inv_g * inv_t * probs[j] * (std::log(probs[j] / q[j]) - kl);
      }
    }
  }
  return grad;
}

inline double gradient_norm(const LogitTable& g) {
  double s = 0.0;
  for (const auto& [p, v] : g)
    for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Supervised fit of the reference policy

// Full-batch gradient ascent on sum log pi(answer | prompt) from zero
// logits. Prompts without a demonstration stay uniform.
inline ToyPolicy sft_fit(const ToyEnvironment& env, std::span<const Demonstration> demonstrations,
                         int steps, double learning_rate, double temperature = 1.0) {
  if (steps < 0) throw ConfigError("sft steps must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  std::map<Prompt, std::size_t> target;
  for (const auto& d : demonstrations) {
    if (!env.reference_answers.count(d.prompt))
      throw InputError("demonstration for unknown prompt " + d.prompt.label());
    auto idx = env.index_of(d.prompt.type, d.answer);
    auto [it, fresh] = target.emplace(d.prompt, idx);
    if (!fresh && it->second != idx)
      throw InputError("contradictory demonstrations for " + d.prompt.label());
  }
  auto policy = ToyPolicy::uniform(env, temperature);
  for (int s = 0; s < steps; ++s) {
    for (const auto& [prompt, idx] : target) {
      auto probs = policy.probabilities(prompt);
      auto& z = policy.logits.at(prompt);
      for (std::size_t j = 0; j < z.size(); ++j)
        z[j] += learning_rate * ((j == idx ? 1.0 : 0.0) - probs[j]) / temperature;
    }
  }
  return policy;
}

inline ToyPolicy sft_fit(const ToyEnvironment& env, double temperature = 1.0) {
  return sft_fit(env, env.demonstrations, env.sft_steps, env.sft_learning_rate, temperature);
}

// ---------------------------------------------------------------------------
// Training

// Shaped and combined reward of every candidate of every prompt, scored
// against the prompt's reference answer.
struct RewardTable {
  std::map<Prompt, std::vector<RewardBreakdown>> entries;

  static RewardTable build(const ToyEnvironment& env, const RewardConfig& config,
                           const Embedder& embedder) {
    RewardTable t;
    for (const auto& p : env.contexts) {
      auto alts = text::split_trimmed(env.reference(p), '|');
      auto& row = t.entries[p];
      for (const auto& cand : env.candidates(p.type))
        row.push_back(score(p.type, cand, std::span<const std::string>(alts), config, embedder));
    }
    return t;
  }

  const std::vector<RewardBreakdown>& at(const Prompt& p) const { return entries.at(p); }
};

struct TrainStep {
  std::size_t step = 0;
  std::size_t epoch = 0;
  Prompt prompt;
  double surrogate = 0.0;
  std::map<QuestionType, double> mean_shaped_reward;
  double mean_kl = 0.0;
  double grad_norm = 0.0;

  json to_json() const {
    json r = json::object();
    for (const auto& [t, v] : mean_shaped_reward) r[std::string(type_name(t))] = v;
    return {{"type", "step"},     {"step", step},         {"epoch", epoch},
            {"prompt", prompt.to_json()}, {"surrogate", surrogate}, {"mean_shaped_reward", r},
            {"mean_kl", mean_kl}, {"grad_norm", grad_norm}};
  }
};

struct TrainTrace {
  std::vector<TrainStep> steps;
};

struct TrainResult {
  ToyPolicy policy;
  TrainTrace trace;
};

// Episode schedule: `epochs` passes over env.schedule(), one prompt per
// batch. Step (epoch e, context index i) samples from
// Rng(derive_seed(seed, e * |contexts| + i)), so every prompt sees the
// same random stream regardless of what happened on other prompts. Both the
// working policy and the reference are evaluated at the sampling
// temperature.
inline TrainResult train(const ToyEnvironment& env, const ToyPolicy& ref_policy,
                         const RewardConfig& reward_config, const GrpoConfig& config,
                         const Embedder& embedder) {
  reward_config.validate();
  config.validate();
  env.validate();
  ToyPolicy ref = ref_policy;
  ref.temperature = config.temperature;
  for (const auto& c : env.contexts)
    if (ref.logits_for(c).size() != env.candidates(c.type).size())
      throw InputError("reference policy and vocabulary disagree for " + c.label());
  ToyPolicy policy = ref;
  TrainResult result;
  if (config.epochs == 0) {
    result.policy = ref_policy;
    return result;
  }
  auto rewards = RewardTable::build(env, reward_config, embedder);
  auto order = env.schedule();
  const std::size_t n = env.contexts.size();
  std::size_t step = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    for (std::size_t idx : order) {
      const Prompt& prompt = env.contexts[idx];
      Rng rng(derive_seed(config.seed, e * n + idx));
      auto completions = sample_group(policy, env, prompt, config.group_size, rng);
      std::vector<double> r;
      r.reserve(completions.size());
      const auto& row = rewards.at(prompt);
      for (const auto& c : completions) r.push_back(row[c.answer].shaped);
      std::vector<RolloutGroup> groups{
          make_group(prompt, std::move(completions), r, config.normalize_advantages_by_std)};

      TrainStep rec;
      rec.step = step++;
      rec.epoch = e;
      rec.prompt = prompt;
      rec.surrogate = surrogate_objective(policy, groups, ref, config.kl_coef, config.clip_epsilon);
      rec.mean_shaped_reward[prompt.type] = groups.front().baseline;
      for (std::size_t it = 0; it < config.iterations_per_batch; ++it) {
        auto grad = surrogate_gradient(policy, groups, ref, config.kl_coef, config.clip_epsilon);
        if (it == 0) rec.grad_norm = gradient_norm(grad);
        for (auto& [p, z] : policy.logits) {
          const auto& gz = grad.at(p);
          for (std::size_t j = 0; j < z.size(); ++j) z[j] += config.learning_rate * gz[j];
        }
      }
      rec.mean_kl = mean_kl(policy, ref, env.contexts);
      result.trace.steps.push_back(std::move(rec));
    }
  }
  result.policy = std::move(policy);
  return result;
}

// Exact expectation of the combined and shaped rewards under `policy`.
struct ExpectedReward {
  double combined = 0.0;
  double shaped = 0.0;
};

inline ExpectedReward expected_reward(const ToyPolicy& policy, const RewardTable& table,
                                      const Prompt& prompt) {
  auto probs = policy.probabilities(prompt);
  const auto& row = table.at(prompt);
  ExpectedReward e;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    e.combined += probs[j] * row[j].combined;
    e.shaped += probs[j] * row[j].shaped;
  }
  return e;
}

inline std::map<QuestionType, ExpectedReward> expected_reward_by_type(const ToyPolicy& policy,
                                                                      const RewardTable& table,
                                                                      const ToyEnvironment& env) {
  std::map<QuestionType, ExpectedReward> sums;
  std::map<QuestionType, std::size_t> counts;
  for (const auto& p : env.contexts) {
    auto e = expected_reward(policy, table, p);
    sums[p.type].combined += e.combined;
    sums[p.type].shaped += e.shaped;
    ++counts[p.type];
  }
  for (auto& [t, e] : sums) {
    e.combined /= static_cast<double>(counts[t]);
    e.shaped /= static_cast<double>(counts[t]);
  }
  return sums;
}

// Greedy answers as a prediction file over environment_corpus(env).
inline std::vector<PredictionRecord> greedy_predictions(const ToyPolicy& policy,
                                                        const ToyEnvironment& env) {
  std::vector<PredictionRecord> out;
  for (const auto& p : env.contexts)
    out.push_back({p.context_id, p.type, env.candidates(p.type)[policy.greedy(p)]});
  return out;
}

}  // namespace vqar
