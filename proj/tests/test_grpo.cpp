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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "grad_cases.hpp"
#include "support.hpp"
#include "vqar/diagnosis.hpp"
#include "vqar/grpo.hpp"

namespace vqar {
namespace {

ToyEnvironment two_word_env() {
  ToyEnvironment env;
  Prompt p{QuestionType::Fabric, "c0"};
  env.contexts = {p};
  env.vocab[QuestionType::Fabric] = {"ATHENIAN", "CORINTHIAN"};
  env.reference_answers[p] = "ATHENIAN";
  env.demonstrations = {{p, "ATHENIAN"}};
  env.sft_steps = 60;
  env.sft_learning_rate = 1.0;
  return env;
}

TEST(Advantages, Examples) {
  std::vector<double> r = {1, 0, 0, 1};
  EXPECT_EQ(compute_advantages(r), (std::vector<double>{0.5, -0.5, -0.5, 0.5}));
  std::vector<double> same = {0.3, 0.3, 0.3};
  for (double a : compute_advantages(same)) EXPECT_EQ(a, 0.0);
  std::vector<double> r2 = {0.9, 0.1, 0.5, 0.5};
  auto a2 = compute_advantages(r2);
  EXPECT_NEAR(a2[0], 0.4, 1e-15);
  EXPECT_NEAR(a2[1], -0.4, 1e-15);
  std::vector<double> one = {1.0};
  EXPECT_THROW(compute_advantages(one), InputError);
  auto norm = compute_advantages(r, true);
  EXPECT_NEAR(norm[0], 1.0, 1e-12);
  for (double a : compute_advantages(same, true)) EXPECT_EQ(a, 0.0);
}

TEST(Sampling, DeterministicAndDegenerate) {
  auto env = two_word_env();
  auto pol = ToyPolicy::uniform(env);
  Prompt p = env.contexts[0];
  Rng a(5), b(5);
  auto sa = sample_group(pol, env, p, 20, a), sb = sample_group(pol, env, p, 20, b);
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(sa[i].answer, sb[i].answer);
  pol.logits[p] = {50.0, -50.0};
  Rng c(1);
  for (const auto& comp : sample_group(pol, env, p, 16, c)) EXPECT_EQ(comp.answer, 0u);
  EXPECT_THROW(pol.probabilities({QuestionType::Date, "c0"}), InputError);
}

TEST(Sampling, UniformFrequencies) {
  ToyEnvironment env;
  Prompt p{QuestionType::Fabric, "c"};
  env.contexts = {p};
  env.vocab[QuestionType::Fabric] = {"a", "b", "c", "d"};
  env.reference_answers[p] = "a";
  auto pol = ToyPolicy::uniform(env, 0.9);
  Rng rng(77);
  std::vector<int> counts(4);
  for (const auto& c : sample_group(pol, env, p, 10000, rng)) ++counts[c.answer];
  for (int n : counts) EXPECT_NEAR(n / 10000.0, 0.25, 0.04);
}

TEST(Kl, Examples) {
  std::vector<double> p = {0.5, 0.5}, q = {0.9, 0.1};
  EXPECT_NEAR(kl_divergence(p, q), 0.5108, 1e-4);
  EXPECT_NEAR(kl_divergence(p, q), oracle::kl(p, q), 1e-15);
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  std::vector<double> z = {1.0, 0.0};
  std::vector<std::string> names = {"ATHENIAN", "CORINTHIAN"};
  try {
    kl_divergence(p, z, &names);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("CORINTHIAN"), std::string::npos);
  }
}

TEST(Surrogate, Examples) {
  auto env = two_word_env();
  auto pol = ToyPolicy::uniform(env);
  Prompt p = env.contexts[0];
  // One completion with rho = 1.5, A = 0.5.
  RolloutGroup g;
  g.prompt = p;
  g.completions = {{0, "ATHENIAN", std::log(pol.probabilities(p)[0] / 1.5)}};
  g.advantages = {0.5};
  std::vector<RolloutGroup> gs = {g};
  EXPECT_NEAR(surrogate_objective(pol, gs, pol, 0.0, 0.2), 0.6, 1e-12);
  EXPECT_NEAR(clipped_term(1.5, 0.5, 0.2), 0.6, 1e-15);

  Rng rng(3);
  auto comps = sample_group(pol, env, p, 8, rng);
  std::vector<double> r = {1, 0, 1, 1, 0, 0, 0.5, 0.2};
  std::vector<RolloutGroup> live = {make_group(p, comps, r)};
  EXPECT_NEAR(surrogate_objective(pol, live, pol, 0.0, 0.2), 0.0, 1e-12);
  EXPECT_NEAR(surrogate_objective(pol, live, pol, 0.04, 0.2), 0.0, 1e-12);

  live[0].completions[0].old_log_prob.reset();
  EXPECT_THROW(surrogate_objective(pol, live, pol, 0.0, 0.2), InputError);
}

// The bound |term| <= (1 + eps)|A| holds for A >= 0 and for rho <= 1 + eps.
// For A < 0 the min keeps the unclipped, more pessimistic rho * A.
TEST(Surrogate, ClippingBoundsTerms) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 3.0), a(-2.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    double rho = u(rng), adv = a(rng);
    double term = clipped_term(rho, adv, 0.2);
    if (adv >= 0.0 || rho <= 1.2) EXPECT_LE(std::abs(term), 1.2 * std::abs(adv) + 1e-15);
    EXPECT_LE(term, rho * adv + 1e-15);
  }
  EXPECT_DOUBLE_EQ(clipped_term(2.0, -1.0, 0.2), -2.0);
}

TEST(Gradient, ZeroAtSymmetricPoint) {
  auto env = two_word_env();
  auto pol = ToyPolicy::uniform(env);
  Prompt p = env.contexts[0];
  Rng rng(2);
  std::vector<RolloutGroup> gs = {make_group(p, sample_group(pol, env, p, 4, rng), {0.5, 0.5, 0.5, 0.5})};
  EXPECT_EQ(gradient_norm(surrogate_gradient(pol, gs, pol, 0.04, 0.2)), 0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 60 && seed < 500; ++seed) {
    auto c = gradcase::random_case(seed);
    if (gradcase::kink_distance(c) < 1e-3) continue;
    auto analytic = surrogate_gradient(c.policy, c.groups, c.ref, c.kl_coef, c.eps);
    EXPECT_NEAR(surrogate_objective(c.policy, c.groups, c.ref, c.kl_coef, c.eps),
                gradcase::objective(c.policy.logits, c.policy.temperature, c), 1e-12);
    EXPECT_LT(gradcase::relative_error(analytic, gradcase::finite_difference(c)), 1e-4) << "seed " << seed;
    ++checked;
  }
  EXPECT_GE(checked, 50);
}

TEST(Gradient, KlOnlyStepDescends) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto c = gradcase::random_case(seed + 1000);
    for (auto& g : c.groups)
      for (auto& a : g.advantages) a = 0.0;
    auto grad = surrogate_gradient(c.policy, c.groups, c.ref, 100.0, c.eps);
    double before = 0.0, after = 0.0;
    auto stepped = c.policy;
    for (auto& [p, z] : stepped.logits)
      for (std::size_t j = 0; j < z.size(); ++j) z[j] += 1e-4 * grad.at(p)[j];
    for (const auto& g : c.groups) {
      before += oracle::kl(c.policy.probabilities(g.prompt), c.ref.probabilities(g.prompt));
      after += oracle::kl(stepped.probabilities(g.prompt), c.ref.probabilities(g.prompt));
    }
    EXPECT_LT(after, before) << seed;
  }
}

TEST(Sft, ConcentratesAndErrors) {
  auto env = two_word_env();
  auto pol = sft_fit(env);
  EXPECT_GT(pol.probabilities(env.contexts[0])[0], 0.99);
  auto zero = sft_fit(env, env.demonstrations, 0, 1.0);
  EXPECT_EQ(zero, ToyPolicy::uniform(env));
  std::vector<Demonstration> bad = {{env.contexts[0], "ATHENIAN"}, {env.contexts[0], "CORINTHIAN"}};
  EXPECT_THROW(sft_fit(env, bad, 3, 1.0), InputError);
  std::vector<Demonstration> oov = {{env.contexts[0], "LACONIAN"}};
  EXPECT_THROW(sft_fit(env, oov, 3, 1.0), InputError);
}

TEST(Environment, GeneratorDeterministicAndJson) {
  auto a = bundled_environment(), b = bundled_environment();
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.covered_types().size(), 3u);
  EXPECT_EQ(ToyEnvironment::from_json(a.to_json()).to_json(), a.to_json());
  EnvironmentParams p;
  p.vocab_size = 100;
  EXPECT_THROW(generate_environment(p), ConfigError);
  auto order = a.schedule();
  EXPECT_EQ(a.contexts[order[0]].type, QuestionType::Fabric);
  EXPECT_EQ(a.contexts[order[1]].type, QuestionType::Technique);
}

TEST(Policy, JsonRoundTrip) {
  auto env = bundled_environment();
  auto pol = sft_fit(env, 0.9);
  EXPECT_EQ(ToyPolicy::from_json(pol.to_json()), pol);
}

TEST(Train, ZeroEpochsAndValidation) {
  auto env = bundled_environment();
  auto ref = sft_fit(env, 0.9);
  HashingEmbedder e;
  GrpoConfig g;
  g.epochs = 0;
  auto r = train(env, ref, RewardConfig::defaults(), g, e);
  EXPECT_EQ(r.policy, ref);
  EXPECT_TRUE(r.trace.steps.empty());
  auto bad = RewardConfig::defaults();
  bad.betas[QuestionType::Fabric] = {2.0, -1.0};
  EXPECT_THROW(train(env, ref, bad, GrpoConfig{}, e), ConfigError);
  g.group_size = 1;
  EXPECT_THROW(train(env, ref, RewardConfig::defaults(), g, e), ConfigError);
}

TEST(Train, TraceAndDeterminism) {
  auto env = bundled_environment();
  auto ref = sft_fit(env, 0.9);
  HashingEmbedder e;
  GrpoConfig g;
  g.learning_rate = 0.1;
  g.epochs = 3;
  g.seed = 12;
  auto a = train(env, ref, RewardConfig::defaults(), g, e), b = train(env, ref, RewardConfig::defaults(), g, e);
  ASSERT_EQ(a.trace.steps.size(), 3 * env.contexts.size());
  EXPECT_EQ(a.policy, b.policy);
  for (std::size_t i = 0; i < a.trace.steps.size(); ++i) {
    EXPECT_EQ(a.trace.steps[i].to_json(), b.trace.steps[i].to_json());
    EXPECT_GE(a.trace.steps[i].mean_kl, 0.0);
  }
}

TEST(Train, LargeKlCoefficientStaysCloser) {
  auto env = bundled_environment();
  auto ref = sft_fit(env, 0.9);
  HashingEmbedder e;
  double free_kl = 0.0, tied_kl = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    GrpoConfig g;
    g.learning_rate = 0.1;
    g.epochs = 30;
    g.seed = s;
    g.kl_coef = 0.0;
    free_kl += mean_kl(train(env, ref, RewardConfig::defaults(), g, e).policy, ref, env.contexts);
    g.kl_coef = 1e3;
    g.learning_rate = 1e-4;  // keeps the stiff KL step stable
    tied_kl += mean_kl(train(env, ref, RewardConfig::defaults(), g, e).policy, ref, env.contexts);
  }
  EXPECT_LT(tied_kl, free_kl);
}

// With lambda = 0, scaling every reward of a type by w changes step sizes
// but not which answer the policy concentrates on.
TEST(Train, UniformAmplificationKeepsArgmax) {
  auto env = bundled_environment();
  auto ref = sft_fit(env, 0.9);
  HashingEmbedder e;
  auto amp = derive_reward_config({QuestionType::Fabric, QuestionType::Technique, QuestionType::Decoration},
                                  RewardConfig::defaults().betas, 2.0);
  GrpoConfig g;
  g.learning_rate = 0.1;
  g.kl_coef = 0.0;
  g.epochs = 300;
  g.seed = 1;
  auto a = train(env, ref, RewardConfig::defaults(), g, e).policy;
  auto b = train(env, ref, amp, g, e).policy;
  for (const auto& p : env.contexts) EXPECT_EQ(a.greedy(p), b.greedy(p)) << p.label();
}

}  // namespace
}  // namespace vqar
