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

// Command-line front end. Kept header-only so the test suite can drive it
// in-process through vqar::cli::run.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqar/corpus.hpp"
#include "vqar/diagnosis.hpp"
#include "vqar/embedding.hpp"
#include "vqar/error.hpp"
#include "vqar/grpo.hpp"
#include "vqar/http_embedder.hpp"
#include "vqar/metrics.hpp"
#include "vqar/report.hpp"
#include "vqar/reward.hpp"
#include "vqar/toy_env.hpp"

namespace vqar::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInvalid = 1, kIo = 2 };

// Sub-seed streams taken from the top-level seed.
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kSplitStream = 2;
inline constexpr std::uint64_t kGeneratorStream = 3;

inline json default_run_config() {
  GrpoConfig g;
  return {
      {"paths",
       {{"corpus", nullptr},
        {"predictions", nullptr},
        {"eval_report", nullptr},
        {"reward_config", nullptr},
        {"environment", nullptr},
        {"output_dir", "vqar-out"}}},
      {"metrics", MetricSettings{}.to_json()},
      {"diagnosis",
       {{"threshold", kDefaultDiagnosisThreshold},
        {"rule", "threshold"},
        {"bottom_k", 2},
        {"amplification", kDefaultAmplification},
        {"base_betas", nullptr}}},
      {"grpo",
       {{"group_size", g.group_size},
        {"temperature", g.temperature},
        {"kl_coef", g.kl_coef},
        {"clip_epsilon", g.clip_epsilon},
        {"learning_rate", g.learning_rate},
        {"epochs", g.epochs},
        {"iterations_per_batch", g.iterations_per_batch},
        {"normalize_advantages_by_std", g.normalize_advantages_by_std},
        {"paper_learning_rate", 1e-6}}},
      {"sft", {{"steps", nullptr}, {"learning_rate", nullptr}}},
      {"generator",
       {{"enabled", false},
        {"types", nullptr},
        {"contexts_per_type", nullptr},
        {"vocab_size", nullptr},
        {"seed", nullptr}}},
      {"embedder",
       {{"kind", "hashing"},
        {"dimension", HashingEmbedder::kDefaultDimension},
        {"url", nullptr},
        {"timeout_seconds", 10.0},
        {"retries", 2}}},
      {"split", {{"fraction", 0.2}}},
      {"score", {{"question_type", nullptr}, {"prediction", nullptr}, {"reference", nullptr}}},
      {"timestamp", nullptr},
      {"seed", 0},
  };
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return ss.str();
}

inline void write_file(const fs::path& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

inline std::string content_id(const std::string& path, const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(text::fnv1a64(bytes)));
  return path + "#fnv1a64:" + buf;
}

// Defaults, then the --config file, then environment overrides, then flags.
// `sources` records which layer supplied each leaf key.
class ResolvedConfig {
 public:
  ResolvedConfig() : value_(default_run_config()) { mark(value_, "", "default"); }

  void merge_file(const json& file) {
    if (!file.is_object()) throw ConfigError("run config file must hold a JSON object");
    check_known(file, value_, "");
    merge(value_, file, "", "file");
  }

  void set(const std::string& dotted, json v, const std::string& source) {
    json* node = &value_;
    std::size_t start = 0;
    while (true) {
      auto dot = dotted.find('.', start);
      auto key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->contains(key)) throw ConfigError("unknown config key '" + dotted + "'");
      node = &(*node)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = std::move(v);
    sources_[dotted] = source;
  }

  const json& at(const std::string& dotted) const {
    const json* node = &value_;
    std::size_t start = 0;
    while (true) {
      auto dot = dotted.find('.', start);
      node = &node->at(dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }

  template <typename T>
  T get(const std::string& dotted) const {
    try {
      return at(dotted).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + dotted + "' has the wrong type");
    }
  }

  bool has(const std::string& dotted) const { return !at(dotted).is_null(); }

  const json& value() const { return value_; }
  const std::map<std::string, std::string>& sources() const { return sources_; }

 private:
  void mark(const json& j, const std::string& prefix, const std::string& source) {
    if (j.is_object() && !j.empty()) {
      for (const auto& [k, v] : j.items()) mark(v, prefix.empty() ? k : prefix + "." + k, source);
    } else {
      sources_[prefix] = source;
    }
  }

  static void check_known(const json& file, const json& defaults, const std::string& prefix) {
    for (const auto& [k, v] : file.items()) {
      auto key = prefix.empty() ? k : prefix + "." + k;
      if (!defaults.contains(k)) throw ConfigError("unknown config key '" + key + "'");
      if (v.is_object() && defaults[k].is_object()) check_known(v, defaults[k], key);
    }
  }

  void merge(json& dst, const json& src, const std::string& prefix, const std::string& source) {
    for (const auto& [k, v] : src.items()) {
      auto key = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object() && dst[k].is_object()) {
        merge(dst[k], v, key, source);
      } else {
        dst[k] = v;
        mark(v, key, source);
      }
    }
  }

  json value_;
  std::map<std::string, std::string> sources_;
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"Type-routed VQA evaluation, diagnosis-driven reward shaping and toy GRPO training"};
    app.name("vqar");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    auto* validate = app.add_subcommand("validate", "Check a corpus file and print its summary");
    auto* split = app.add_subcommand("split", "Partition a corpus into train/test by record");
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions with the type-routed metrics");
    auto* diagnose = app.add_subcommand("diagnose", "Select shortcoming types and emit a reward config");
    auto* score = app.add_subcommand("score", "Reward breakdown for one prediction");
    auto* train = app.add_subcommand("train-toy", "Fit a toy reference policy and train it with GRPO");
    auto* report = app.add_subcommand("report", "Render a JSON or JSON Lines artifact as a table");

    for (auto* sub : {validate, split, evaluate, diagnose, score, train, report}) add_common(sub);

    bind<std::string>(validate, "corpus", "paths.corpus", "Corpus JSON file");
    bind<std::string>(split, "corpus", "paths.corpus", "Corpus JSON file");
    bind<double>(split, "--fraction", "split.fraction", "Test fraction in (0, 1)");

    bind<std::string>(evaluate, "corpus", "paths.corpus", "Corpus JSON file");
    bind<std::string>(evaluate, "predictions", "paths.predictions", "Predictions JSON Lines file");
    add_metric_flags(evaluate);

    bind<std::string>(diagnose, "report", "paths.eval_report", "Evaluation report JSON");
    bind<double>(diagnose, "--threshold", "diagnosis.threshold", "Shortcoming threshold in (0, 1)");
    bind<double>(diagnose, "--amplification", "diagnosis.amplification", "Reward factor w > 1 for shortcomings");
    bind<std::string>(diagnose, "--rule", "diagnosis.rule", "threshold | bottom_k");
    bind<std::size_t>(diagnose, "--bottom-k", "diagnosis.bottom_k", "k for the bottom_k rule");
    bind<std::string>(diagnose, "--base-betas", "diagnosis.base_betas", "Reward config whose betas are kept");

    bind<std::string>(score, "--type", "score.question_type", "Question type name");
    bind<std::string>(score, "--prediction", "score.prediction", "Predicted answer");
    bind<std::string>(score, "--reference", "score.reference", "Reference answer ('|' separates alternatives)");
    add_reward_flags(score);

    bind<std::string>(train, "--env", "paths.environment", "Toy environment JSON");
    add_reward_flags(train);
    bind<std::size_t>(train, "--group-size", "grpo.group_size", "Rollouts per prompt (K)");
    bind<double>(train, "--temperature", "grpo.temperature", "Sampling temperature");
    bind<double>(train, "--lambda", "grpo.kl_coef", "KL coefficient");
    bind<double>(train, "--clip-epsilon", "grpo.clip_epsilon", "Ratio clip epsilon");
    bind<double>(train, "--learning-rate", "grpo.learning_rate", "Step size");
    bind<std::size_t>(train, "--epochs", "grpo.epochs", "Passes over the prompts");
    bind<std::size_t>(train, "--iterations-per-batch", "grpo.iterations_per_batch", "Updates per rollout batch");
    bind<bool>(train, "--normalize-advantages", "grpo.normalize_advantages_by_std", "Divide advantages by group std");
    bind<int>(train, "--sft-steps", "sft.steps", "Override the environment's SFT steps");
    bind<double>(train, "--sft-learning-rate", "sft.learning_rate", "Override the environment's SFT rate");
    bind<bool>(train, "--generate", "generator.enabled", "Generate an environment instead of the bundled one");
    bind<std::vector<std::string>>(train, "--types", "generator.types", "Generator: question types");
    bind<std::size_t>(train, "--contexts-per-type", "generator.contexts_per_type", "Generator: contexts per type");
    bind<std::size_t>(train, "--vocab-size", "generator.vocab_size", "Generator: candidates per type");
    bind<std::uint64_t>(train, "--env-seed", "generator.seed", "Generator: seed");

    bind<std::string>(report, "file", "paths.corpus", "Artifact to render");

    try {
      std::vector<std::string> rev(args.rbegin(), args.rend());
      app.parse(rev);
    } catch (const CLI::ParseError& e) {
      int code = app.exit(e, out_, err_);
      return code == 0 ? kOk : kInvalid;
    }

    try {
      resolve();
      if (validate->parsed()) return cmd_validate();
      if (split->parsed()) return cmd_split();
      if (evaluate->parsed()) return cmd_evaluate();
      if (diagnose->parsed()) return cmd_diagnose();
      if (score->parsed()) return cmd_score();
      if (train->parsed()) return cmd_train_toy();
      if (report->parsed()) return cmd_report();
    } catch (const IoError& e) {
      err_ << "error: " << e.what() << "\n";
      return kIo;
    } catch (const ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      return kInvalid;
    } catch (const Error& e) {
      err_ << "error: " << e.what() << "\n";
      return kInvalid;
    } catch (const json::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return kInvalid;
    }
    return kInvalid;
  }

 private:
  struct Binding {
    CLI::Option* option;
    std::string key;
    std::function<json()> value;
  };

  template <typename T>
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& desc) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *holder, desc);
    bindings_.push_back({opt, key, [holder] { return json(*holder); }});
  }

  void add_common(CLI::App* sub) {
    sub->add_option("--config", config_path_, "Run config JSON (flags override it)");
    sub->add_option("--out", out_dir_flag_, "Output directory (overrides VQAR_OUTPUT_DIR)");
    sub->add_flag("--color,!--no-color", color_flag_, "Colorize tables (default: VQAR_COLOR)");
    sub->add_flag("-v,--verbose", verbose_, "Log the resolved configuration");
    bind<std::uint64_t>(sub, "--seed", "seed", "Top-level seed");
    bind<std::string>(sub, "--timestamp", "timestamp", "Timestamp recorded in report metadata");
    bind<std::string>(sub, "--embedder-url", "embedder.url", "Use an HTTP embedding service");
  }

  void add_metric_flags(CLI::App* sub) {
    bind<double>(sub, "--tau", "metrics.tau", "ANLS threshold");
    bind<bool>(sub, "--brevity-penalty", "metrics.brevity_penalty", "BLEU@1 brevity penalty");
    bind<bool>(sub, "--date-partial-credit", "metrics.date_partial_credit", "Overlap credit for dates");
  }

  void add_reward_flags(CLI::App* sub) {
    bind<std::string>(sub, "--reward-config", "paths.reward_config", "Reward config (.conf or diagnosis JSON)");
  }

  void resolve() {
    if (!config_path_.empty()) {
      auto raw = read_file(config_path_);
      json file;
      try {
        file = json::parse(raw);
      } catch (const json::parse_error& e) {
        throw ParseError("run config '" + config_path_ + "' is not valid JSON at byte " +
                             std::to_string(e.byte),
                         e.byte);
      }
      config_.merge_file(file);
    }
    if (const char* env = std::getenv("VQAR_OUTPUT_DIR"); env && *env)
      config_.set("paths.output_dir", env, "env");
    for (const auto& b : bindings_)
      if (b.option->count() > 0) config_.set(b.key, b.value(), "flag");
    if (!out_dir_flag_.empty()) config_.set("paths.output_dir", out_dir_flag_, "flag");
    if (config_.has("embedder.url") && config_.sources().at("embedder.url") != "default")
      config_.set("embedder.kind", "http", config_.sources().at("embedder.url"));

    if (color_flag_) {
      color_ = *color_flag_;
    } else if (const char* c = std::getenv("VQAR_COLOR"); c && *c) {
      color_ = std::string(c) != "0";
    } else {
      color_ = false;
    }
    if (const char* nc = std::getenv("NO_COLOR"); nc && *nc && !color_flag_) color_ = false;

    if (verbose_)
      for (const auto& [key, source] : config_.sources())
        err_ << "config " << key << " = " << config_.at(key).dump() << " [" << source << "]\n";
  }

  json effective_config() const {
    json sources = json::object();
    for (const auto& [k, v] : config_.sources()) sources[k] = v;
    return {{"values", config_.value()}, {"sources", sources}};
  }

  fs::path out_dir() const { return fs::path(config_.get<std::string>("paths.output_dir")); }

  std::string require_path(const std::string& key, const std::string& what) const {
    if (!config_.has(key)) throw ConfigError("missing " + what + " (pass it or set " + key + ")");
    return config_.get<std::string>(key);
  }

  MetricSettings metric_settings() const {
    MetricSettings m;
    m.tau = config_.get<double>("metrics.tau");
    m.brevity_penalty = config_.get<bool>("metrics.brevity_penalty");
    m.date_partial_credit = config_.get<bool>("metrics.date_partial_credit");
    if (!(m.tau > 0.0 && m.tau <= 1.0)) throw ConfigError("metrics.tau must lie in (0, 1]");
    return m;
  }

  std::unique_ptr<Embedder> make_embedder() const {
    auto kind = config_.get<std::string>("embedder.kind");
    if (kind == "hashing") return std::make_unique<HashingEmbedder>(config_.get<std::size_t>("embedder.dimension"));
    if (kind == "http") {
      HttpEmbedder::Options o;
      o.timeout_seconds = config_.get<double>("embedder.timeout_seconds");
      o.retries = config_.get<int>("embedder.retries");
      return std::make_unique<HttpEmbedder>(require_path("embedder.url", "embedding service url"), o);
    }
    throw ConfigError("embedder.kind must be 'hashing' or 'http'");
  }

  RewardConfig reward_config(const Embedder& embedder) const {
    RewardConfig c = config_.has("paths.reward_config")
                         ? load_reward_config(read_file(config_.get<std::string>("paths.reward_config")))
                         : RewardConfig::defaults();
    c.metadata["keywords"] = "lowercase alphanumeric runs minus fixed stopwords";
    c.metadata["embedder"] = embedder.describe();
    return c;
  }

  // -------------------------------------------------------------------------

  int cmd_validate() {
    auto path = require_path("paths.corpus", "corpus path");
    auto raw = read_file(path);
    CorpusLoad load;
    try {
      load = load_corpus(raw);
    } catch (const ParseError& e) {
      err_ << "error: line " << vqar::detail::line_of(raw, e.offset()) << ": " << e.what() << "\n";
      return kInvalid;
    }
    std::size_t errors = 0;
    json issues = json::array();
    for (const auto& issue : load.issues) {
      if (issue.severity == CorpusIssue::Severity::Error) ++errors;
      (issue.severity == CorpusIssue::Severity::Error ? err_ : out_) << issue.to_string() << "\n";
      issues.push_back(issue.to_string());
    }
    for (const auto& r : load.corpus.records) {
      std::map<QuestionType, int> seen;
      for (const auto& p : r.qa_pairs)
        if (++seen[p.question_type] == 2) {
          auto msg = "warning: record '" + r.id + "': several questions of type " +
                     std::string(type_name(p.question_type)) + " share one prediction key";
          out_ << msg << "\n";
          issues.push_back(msg);
        }
    }
    auto summary = summarize(load.corpus);
    out_ << report::render_summary(summary);
    out_ << (errors ? "INVALID" : "OK") << " (" << errors << " error(s))\n";
    json doc = {{"corpus", content_id(path, raw)},
                {"valid", errors == 0},
                {"errors", errors},
                {"issues", issues},
                {"summary", summary.to_json()},
                {"config", effective_config()}};
    write_file(out_dir(), "validation.json", doc.dump(2) + "\n");
    return errors ? kInvalid : kOk;
  }

  int cmd_split() {
    auto path = require_path("paths.corpus", "corpus path");
    auto corpus = parse_corpus(read_file(path));
    auto seed = config_.get<std::uint64_t>("seed");
    auto s = split_corpus(corpus, config_.get<double>("split.fraction"), derive_seed(seed, kSplitStream));
    auto manifest = s.manifest();
    manifest["seed"] = seed;
    manifest["config"] = effective_config();
    write_file(out_dir(), "split_manifest.json", manifest.dump(2) + "\n");
    write_file(out_dir(), "train.json", serialize_corpus(s.train) + "\n");
    write_file(out_dir(), "test.json", serialize_corpus(s.test) + "\n");
    out_ << "train: " << s.train.records.size() << " records, test: " << s.test.records.size()
         << " records\n";
    return kOk;
  }

  int cmd_evaluate() {
    auto corpus_path = require_path("paths.corpus", "corpus path");
    auto pred_path = require_path("paths.predictions", "predictions path");
    auto corpus_raw = read_file(corpus_path);
    auto pred_raw = read_file(pred_path);
    std::vector<std::string> warnings;
    auto corpus = parse_corpus(corpus_raw, &warnings);
    auto preds = parse_predictions(pred_raw);
    auto rep = vqar::evaluate(corpus, preds, metric_settings());
    rep.metadata["corpus"] = content_id(corpus_path, corpus_raw);
    rep.metadata["predictions"] = content_id(pred_path, pred_raw);
    rep.metadata["timestamp"] = config_.at("timestamp");
    rep.metadata["corpus_warnings"] = warnings.size();
    auto doc = rep.to_json();
    doc["config"] = effective_config();
    auto table = report::render_eval(rep);
    write_file(out_dir(), "eval_report.json", doc.dump(2) + "\n");
    write_file(out_dir(), "eval_report.txt", table);
    out_ << report::render_eval(rep, color_);
    return kOk;
  }

  int cmd_diagnose() {
    auto path = require_path("paths.eval_report", "evaluation report path");
    auto rep = EvalReport::from_json(vqar::detail::parse_json_or_throw(read_file(path)));
    DiagnosisOptions o;
    o.threshold = config_.get<double>("diagnosis.threshold");
    o.amplification = config_.get<double>("diagnosis.amplification");
    o.bottom_k = config_.get<std::size_t>("diagnosis.bottom_k");
    auto rule = config_.get<std::string>("diagnosis.rule");
    if (rule == "threshold") o.rule = SelectionRule::Threshold;
    else if (rule == "bottom_k") o.rule = SelectionRule::BottomK;
    else throw ConfigError("diagnosis.rule must be 'threshold' or 'bottom_k'");
    auto betas = RewardConfig::defaults().betas;
    if (config_.has("diagnosis.base_betas"))
      betas = load_reward_config(read_file(config_.get<std::string>("diagnosis.base_betas"))).betas;
    auto d = vqar::diagnose(rep, o, betas);
    d.derived_config.metadata["source_report"] = path;
    auto doc = d.to_json();
    doc["reward_config"] = d.derived_config.to_text();
    doc["config"] = effective_config();
    write_file(out_dir(), "diagnosis.json", doc.dump(2) + "\n");
    write_file(out_dir(), "reward_config.conf", d.derived_config.to_text());
    out_ << report::render_diagnosis(d, color_);
    return kOk;
  }

  int cmd_score() {
    auto type = type_from_name(require_path("score.question_type", "--type"));
    auto prediction = config_.has("score.prediction") ? config_.get<std::string>("score.prediction") : "";
    auto reference = require_path("score.reference", "--reference");
    auto embedder = make_embedder();
    auto cfg = reward_config(*embedder);
    auto b = vqar::score(type, prediction, reference, cfg, *embedder);
    auto doc = b.to_json();
    doc["config"] = effective_config();
    doc["reward_config"] = cfg.to_text();
    out_ << doc.dump(2) << "\n";
    return kOk;
  }

  ToyEnvironment load_environment() const {
    if (config_.has("paths.environment"))
      return ToyEnvironment::from_json(vqar::detail::parse_json_or_throw(
          read_file(config_.get<std::string>("paths.environment"))));
    bool generate = config_.get<bool>("generator.enabled");
    for (const char* k : {"generator.types", "generator.contexts_per_type", "generator.vocab_size", "generator.seed"})
      generate = generate || config_.has(k);
    if (!generate) return bundled_environment();
    EnvironmentParams p;
    if (config_.has("generator.types")) {
      p.types.clear();
      for (const auto& n : config_.get<std::vector<std::string>>("generator.types")) p.types.push_back(type_from_name(n));
    }
    if (config_.has("generator.contexts_per_type"))
      p.contexts_per_type = config_.get<std::size_t>("generator.contexts_per_type");
    if (config_.has("generator.vocab_size")) p.vocab_size = config_.get<std::size_t>("generator.vocab_size");
    p.seed = config_.has("generator.seed") ? config_.get<std::uint64_t>("generator.seed")
                                           : derive_seed(config_.get<std::uint64_t>("seed"), kGeneratorStream);
    return generate_environment(p);
  }

  GrpoConfig grpo_config() const {
    GrpoConfig g;
    g.group_size = config_.get<std::size_t>("grpo.group_size");
    g.temperature = config_.get<double>("grpo.temperature");
    g.kl_coef = config_.get<double>("grpo.kl_coef");
    g.clip_epsilon = config_.get<double>("grpo.clip_epsilon");
    g.learning_rate = config_.get<double>("grpo.learning_rate");
    g.epochs = config_.get<std::size_t>("grpo.epochs");
    g.iterations_per_batch = config_.get<std::size_t>("grpo.iterations_per_batch");
    g.normalize_advantages_by_std = config_.get<bool>("grpo.normalize_advantages_by_std");
    g.seed = derive_seed(config_.get<std::uint64_t>("seed"), kTrainStream);
    g.validate();
    return g;
  }

  static json reward_summary(const ToyPolicy& policy, const RewardTable& table, const ToyEnvironment& env,
                             const ToyPolicy& ref) {
    json per_type = json::object();
    double total = 0.0;
    for (const auto& [t, e] : expected_reward_by_type(policy, table, env))
      per_type[std::string(type_name(t))] = {{"mean_reward", e.combined}, {"mean_shaped_reward", e.shaped}};
    for (const auto& p : env.contexts) total += expected_reward(policy, table, p).combined;
    return {{"per_type", per_type},
            {"mean_reward", total / static_cast<double>(env.contexts.size())},
            {"mean_kl", mean_kl(policy, ref, env.contexts)}};
  }

  int cmd_train_toy() {
    auto env = load_environment();
    if (config_.has("sft.steps")) env.sft_steps = config_.get<int>("sft.steps");
    if (config_.has("sft.learning_rate")) env.sft_learning_rate = config_.get<double>("sft.learning_rate");
    auto g = grpo_config();
    auto embedder = make_embedder();
    auto cfg = reward_config(*embedder);
    cfg.validate();

    auto ref = sft_fit(env, g.temperature);
    auto result = vqar::train(env, ref, cfg, g, *embedder);
    auto table = RewardTable::build(env, cfg, *embedder);

    json argmax = json::object();
    for (const auto& p : env.contexts) {
      const auto& row = table.at(p);
      std::size_t best = 0;
      for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j].shaped > row[best].shaped) best = j;
      argmax[p.label()] = {{"answer", env.candidates(p.type)[best]},
                           {"reference_probability", ref.probabilities(p)[best]},
                           {"final_probability", result.policy.probabilities(p)[best]}};
    }
    auto eff = effective_config();
    json summary = {{"steps", result.trace.steps.size()},
                    {"initial", reward_summary(ref, table, env, ref)},
                    {"final", reward_summary(result.policy, table, env, ref)},
                    {"argmax_answers", argmax},
                    {"grpo", g.to_json()},
                    {"reward_config", cfg.to_text()},
                    {"config", eff}};

    std::string trace = json({{"type", "config"}, {"config", eff}}).dump() + "\n";
    for (const auto& s : result.trace.steps) trace += s.to_json().dump() + "\n";

    auto wrap = [&](const json& body) {
      json j = body;
      j["config"] = eff;
      return j.dump(2) + "\n";
    };
    auto dir = out_dir();
    write_file(dir, "environment.json", wrap(env.to_json()));
    write_file(dir, "reference_policy.json", wrap(ref.to_json()));
    write_file(dir, "policy.json", wrap(result.policy.to_json()));
    write_file(dir, "trace.jsonl", trace);
    write_file(dir, "summary.json", summary.dump(2) + "\n");
    write_file(dir, "effective_config.json", eff.dump(2) + "\n");

    report::Table t({"type", "initial_reward", "final_reward"});
    for (const auto& [name, v] : summary["final"]["per_type"].items())
      t.add({name, report::fixed(summary["initial"]["per_type"][name]["mean_reward"].get<double>()),
             report::fixed(v["mean_reward"].get<double>())});
    out_ << t.render(color_);
    out_ << "steps: " << result.trace.steps.size()
         << "   final mean KL: " << report::fixed(summary["final"]["mean_kl"].get<double>(), 6) << "\n";
    return kOk;
  }

  int cmd_report() {
    auto path = require_path("paths.corpus", "artifact path");
    auto raw = read_file(path);
    json doc;
    bool single = true;
    try {
      doc = json::parse(raw);
    } catch (const json::parse_error&) {
      single = false;
    }
    if (single) {
      out_ << report::render_any(doc, color_);
      return kOk;
    }
    report::Table steps({"step", "prompt", "surrogate", "mean_kl", "grad_norm"});
    bool any_step = false;
    std::size_t line_no = 0;
    for (const auto& line : text::split_trimmed(raw, '\n')) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(path + ": line " + std::to_string(line_no) + " is not JSON", e.byte);
      }
      if (j.value("type", "") == "step") {
        any_step = true;
        steps.add({std::to_string(j["step"].get<std::size_t>()),
                   prompt_from_json(j["prompt"]).label(), report::fixed(j["surrogate"].get<double>(), 6),
                   report::fixed(j["mean_kl"].get<double>(), 6),
                   report::fixed(j["grad_norm"].get<double>(), 6)});
      } else if (j.value("type", "") != "config") {
        out_ << report::render_any(j, color_);
      }
    }
    if (any_step) out_ << steps.render(color_);
    return kOk;
  }

  std::ostream& out_;
  std::ostream& err_;
  ResolvedConfig config_;
  std::vector<Binding> bindings_;
  std::string config_path_;
  std::string out_dir_flag_;
  std::optional<bool> color_flag_;
  bool verbose_ = false;
  bool color_ = false;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Runner r(out, err);
  return r.run(args);
}

}  // namespace vqar::cli
