#pragma once

// Pipeline configuration: a JSON document checked against a schema of
// defaults, with dotted-key overrides applied on top.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "domaug/classifier.hpp"
#include "domaug/error.hpp"
#include "domaug/mixture.hpp"
#include "domaug/selection.hpp"
#include "domaug/synthesis.hpp"

namespace domaug {

// Every accepted key with its default. A null default marks a key that takes
// any scalar and has no value unless set.
inline const nlohmann::json& config_defaults() {
  static const nlohmann::json d = nlohmann::json::parse(R"({
    "seed": 0,
    "workers": 1,
    "paths": {
      "output": null,
      "in_domain": "",
      "negatives": "",
      "heldout_in_domain": "",
      "heldout_negatives": "",
      "general": [],
      "model": "",
      "task_pools": "",
      "predictions": "",
      "judge_cases": "",
      "rewrites": ""
    },
    "classifier": {
      "dim": 256,
      "learning_rate": 0.1,
      "max_word_ngram": 3,
      "min_count": 3,
      "epochs": 3,
      "bucket_count": 2000000,
      "balance_classes": true
    },
    "selection": {
      "mode": "token_budget",
      "budget_tokens": 15000000000,
      "k": 1000000,
      "min_score": 0.5,
      "batch_docs": 4096
    },
    "quality": {
      "scorer": "heuristic",
      "threshold": 1.5
    },
    "gateway": {
      "kind": "mock",
      "endpoint": "https://api.openai.com/v1/chat/completions",
      "token_env": "DOMAUG_API_KEY",
      "model": "gpt-4",
      "judge_model": "gpt-3.5-turbo",
      "connect_timeout_s": 10,
      "read_timeout_s": 120,
      "max_retries": 3,
      "initial_backoff_ms": 500,
      "max_backoff_ms": 30000,
      "max_in_flight": 4,
      "log": "gateway_log.jsonl",
      "mock_seed": 0
    },
    "synthesis": {
      "mode": "entity_centered",
      "passages": 100,
      "problems_per_passage": 2,
      "min_problems": 2,
      "max_problems": 4,
      "temperature": 0.7,
      "max_tokens": 1200,
      "max_attempts": 3,
      "min_task_words": 20,
      "min_enlightenment_words": 20
    },
    "mixture": {
      "batch_size_tokens": 1048576,
      "interleave": "concatenate_shuffled",
      "in_domain_budget": null,
      "selected_budget": null,
      "synthetic_budget": null
    },
    "schedule": {
      "total_steps": 0,
      "max_lr": 2e-5,
      "warmup_frac": 0.03,
      "decay_frac": 0.10,
      "decay_floor_ratio": 0.10
    },
    "evaluation": {
      "similarity_threshold": 0.8,
      "judge_max_attempts": 3
    }
  })");
  return d;
}

namespace detail {

inline bool same_kind(const nlohmann::json& def, const nlohmann::json& v) {
  if (def.is_null()) return !v.is_object() && !v.is_array();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_array()) return v.is_array();
  return false;
}

inline std::string kind_name(const nlohmann::json& def) {
  if (def.is_null()) return "a scalar";
  if (def.is_number()) return "a number";
  if (def.is_string()) return "a string";
  if (def.is_boolean()) return "a boolean";
  if (def.is_array()) return "an array";
  return "an object";
}

inline void merge_checked(nlohmann::json& into, const nlohmann::json& schema, const nlohmann::json& user,
                          const std::string& prefix) {
  if (!user.is_object()) throw UsageError("config section " + (prefix.empty() ? "<root>" : prefix) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw UsageError("unknown config key: " + path);
    const auto& def = schema[key];
    if (def.is_object()) {
      merge_checked(into[key], def, value, path);
    } else {
      if (!same_kind(def, value)) throw UsageError("config key " + path + " must be " + kind_name(def));
      if (path == "paths.general")
        for (const auto& g : value)
          if (!g.is_string()) throw UsageError("config key paths.general must list strings");
      into[key] = value;
    }
  }
}

}  // namespace detail

class ConfigBuilder {
 public:
  ConfigBuilder() : json_(config_defaults()) {}

  // Relative paths in the file resolve against the file's directory.
  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto user = nlohmann::json::parse(ss.str(), nullptr, false);
    if (user.is_discarded()) throw UsageError("config file is not valid JSON: " + path.string());
    resolve_paths(user, std::filesystem::absolute(path).parent_path());
    detail::merge_checked(json_, config_defaults(), user, "");
  }

  void merge(const nlohmann::json& user) { detail::merge_checked(json_, config_defaults(), user, ""); }

  // "a.b.c=value"; the value is parsed as JSON when possible, else taken as a
  // string. Relative paths resolve against the working directory.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    auto value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    nlohmann::json patch = value;
    std::vector<std::string> parts;
    for (std::size_t start = 0;;) {
      const auto dot = key.find('.', start);
      parts.push_back(key.substr(start, dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    // A bare string for a list key becomes a one-element list.
    const nlohmann::json* def = &config_defaults();
    for (const auto& p : parts) {
      if (!def->is_object() || !def->contains(p)) throw UsageError("unknown config key: " + key);
      def = &(*def)[p];
    }
    if (def->is_array() && value.is_string()) patch = nlohmann::json::array({value});
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = nlohmann::json{{*it, patch}};
    resolve_paths(patch, std::filesystem::current_path());
    merge(patch);
  }

  const nlohmann::json& json() const { return json_; }

 private:
  static void resolve_paths(nlohmann::json& user, const std::filesystem::path& base) {
    if (!user.is_object() || !user.contains("paths") || !user["paths"].is_object()) return;
    for (auto& [key, value] : user["paths"].items()) {
      if (value.is_string() && !value.get<std::string>().empty()) {
        value = (base / value.get<std::string>()).lexically_normal().generic_string();
      } else if (value.is_array()) {
        for (auto& v : value)
          if (v.is_string()) v = (base / v.get<std::string>()).lexically_normal().generic_string();
      }
    }
  }

  nlohmann::json json_;
};

// Typed view of a merged configuration.
struct PipelineConfig {
  nlohmann::json raw;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  struct Paths {
    std::filesystem::path output, in_domain, negatives, heldout_in_domain, heldout_negatives, model, task_pools,
        predictions, judge_cases, rewrites;
    std::vector<std::filesystem::path> general;
  } paths;

  ClassifierConfig classifier;
  bool balance_classes = true;
  SelectionPolicy selection;
  std::size_t selection_batch_docs = 4096;
  std::string quality_scorer;
  double quality_threshold = 1.5;

  struct Gateway {
    std::string kind, endpoint, token_env, model, judge_model;
    int connect_timeout_s = 10, read_timeout_s = 120, max_retries = 3;
    std::int64_t initial_backoff_ms = 500, max_backoff_ms = 30000;
    std::size_t max_in_flight = 4;
    std::string log;
    std::uint64_t mock_seed = 0;
  } gateway;

  struct Synthesis {
    DomainMode mode = DomainMode::entity_centered;
    std::size_t passages = 100, problems_per_passage = 2;
    ProblemLimits limits;
    double temperature = 0.7;
    int max_tokens = 1200;
    GenerateOptions generate;
  } synthesis;

  MixtureOptions mixture;
  std::optional<std::uint64_t> in_domain_budget, selected_budget, synthetic_budget;
  double similarity_threshold = 0.8;
  int judge_max_attempts = 3;

  std::filesystem::path model_path() const { return paths.model.empty() ? paths.output / "model.traitft" : paths.model; }
  std::filesystem::path selected_path() const { return paths.output / "selected.jsonl"; }
  std::filesystem::path passages_path() const { return paths.output / "passages.jsonl"; }
  std::filesystem::path manifest_path() const { return paths.output / "manifest.json"; }
  std::filesystem::path report_path() const { return paths.output / "report.json"; }
};

namespace detail {

template <class T>
T get_as(const nlohmann::json& root, const std::string& dotted) {
  const nlohmann::json* cur = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = dotted.find('.', start);
    cur = &cur->at(dotted.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!cur->is_number_integer() && !(cur->is_number_float() && cur->get<double>() == std::floor(cur->get<double>())))
      throw UsageError("config key " + dotted + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (cur->get<double>() < 0) throw UsageError("config key " + dotted + " must not be negative");
    }
  }
  return cur->get<T>();
}

inline std::optional<std::uint64_t> get_budget(const nlohmann::json& root, const std::string& dotted) {
  const auto& v = root.at("mixture").at(dotted.substr(dotted.find('.') + 1));
  if (v.is_null()) return std::nullopt;
  if (!v.is_number() || v.get<double>() < 0) throw UsageError("config key " + dotted + " must be a token count");
  return v.get<std::uint64_t>();
}

}  // namespace detail

inline PipelineConfig pipeline_config(const nlohmann::json& j) {
  using detail::get_as;
  PipelineConfig c;
  c.raw = j;
  if (j.at("paths").at("output").is_null()) throw UsageError("missing required config key: paths.output");
  if (!j["paths"]["output"].is_string() || j["paths"]["output"].get<std::string>().empty())
    throw UsageError("config key paths.output must be a non-empty path");
  c.seed = get_as<std::uint64_t>(j, "seed");
  c.workers = get_as<std::size_t>(j, "workers");
  if (c.workers == 0) throw UsageError("config key workers must be positive");

  auto path = [&](const char* key) { return std::filesystem::path(get_as<std::string>(j, std::string("paths.") + key)); };
  c.paths.output = path("output");
  c.paths.in_domain = path("in_domain");
  c.paths.negatives = path("negatives");
  c.paths.heldout_in_domain = path("heldout_in_domain");
  c.paths.heldout_negatives = path("heldout_negatives");
  c.paths.model = path("model");
  c.paths.task_pools = path("task_pools");
  c.paths.predictions = path("predictions");
  c.paths.judge_cases = path("judge_cases");
  c.paths.rewrites = path("rewrites");
  for (const auto& g : j["paths"]["general"]) c.paths.general.emplace_back(g.get<std::string>());

  auto& cl = c.classifier;
  cl.dim = get_as<int>(j, "classifier.dim");
  cl.learning_rate = get_as<double>(j, "classifier.learning_rate");
  cl.max_word_ngram = get_as<int>(j, "classifier.max_word_ngram");
  cl.min_count = get_as<int>(j, "classifier.min_count");
  cl.epochs = get_as<int>(j, "classifier.epochs");
  cl.bucket_count = get_as<std::uint32_t>(j, "classifier.bucket_count");
  cl.seed = c.seed;
  cl.workers = static_cast<int>(c.workers);
  c.balance_classes = get_as<bool>(j, "classifier.balance_classes");

  c.selection.mode = parse_selection_mode(get_as<std::string>(j, "selection.mode"));
  c.selection.budget_tokens = get_as<std::uint64_t>(j, "selection.budget_tokens");
  c.selection.k = get_as<std::uint64_t>(j, "selection.k");
  c.selection.min_score = get_as<double>(j, "selection.min_score");
  c.selection_batch_docs = std::max<std::size_t>(1, get_as<std::size_t>(j, "selection.batch_docs"));

  c.quality_scorer = get_as<std::string>(j, "quality.scorer");
  if (c.quality_scorer != "heuristic" && c.quality_scorer != "gateway")
    throw UsageError("config key quality.scorer must be \"heuristic\" or \"gateway\"");
  c.quality_threshold = get_as<double>(j, "quality.threshold");

  auto& g = c.gateway;
  g.kind = get_as<std::string>(j, "gateway.kind");
  if (g.kind != "mock" && g.kind != "http") throw UsageError("config key gateway.kind must be \"mock\" or \"http\"");
  g.endpoint = get_as<std::string>(j, "gateway.endpoint");
  g.token_env = get_as<std::string>(j, "gateway.token_env");
  g.model = get_as<std::string>(j, "gateway.model");
  g.judge_model = get_as<std::string>(j, "gateway.judge_model");
  g.connect_timeout_s = get_as<int>(j, "gateway.connect_timeout_s");
  g.read_timeout_s = get_as<int>(j, "gateway.read_timeout_s");
  g.max_retries = get_as<int>(j, "gateway.max_retries");
  g.initial_backoff_ms = get_as<std::int64_t>(j, "gateway.initial_backoff_ms");
  g.max_backoff_ms = get_as<std::int64_t>(j, "gateway.max_backoff_ms");
  g.max_in_flight = std::max<std::size_t>(1, get_as<std::size_t>(j, "gateway.max_in_flight"));
  g.log = get_as<std::string>(j, "gateway.log");
  g.mock_seed = get_as<std::uint64_t>(j, "gateway.mock_seed");

  auto& s = c.synthesis;
  s.mode = parse_domain_mode(get_as<std::string>(j, "synthesis.mode"));
  s.passages = get_as<std::size_t>(j, "synthesis.passages");
  s.problems_per_passage = get_as<std::size_t>(j, "synthesis.problems_per_passage");
  s.limits.min = get_as<std::size_t>(j, "synthesis.min_problems");
  s.limits.max = get_as<std::size_t>(j, "synthesis.max_problems");
  if (s.limits.min < 1 || s.limits.min > s.limits.max)
    throw UsageError("config keys synthesis.min_problems/max_problems must satisfy 1 <= min <= max");
  s.temperature = get_as<double>(j, "synthesis.temperature");
  s.max_tokens = get_as<int>(j, "synthesis.max_tokens");
  s.generate.max_attempts = get_as<int>(j, "synthesis.max_attempts");
  s.generate.validation.min_task_words = get_as<std::size_t>(j, "synthesis.min_task_words");
  s.generate.validation.min_enlightenment_words = get_as<std::size_t>(j, "synthesis.min_enlightenment_words");

  c.mixture.batch_size_tokens = get_as<std::uint64_t>(j, "mixture.batch_size_tokens");
  c.mixture.interleave = parse_interleave(get_as<std::string>(j, "mixture.interleave"));
  c.mixture.seed = c.seed;
  c.in_domain_budget = detail::get_budget(j, "mixture.in_domain_budget");
  c.selected_budget = detail::get_budget(j, "mixture.selected_budget");
  c.synthetic_budget = detail::get_budget(j, "mixture.synthetic_budget");
  auto& sc = c.mixture.schedule;
  sc.total_steps = get_as<std::int64_t>(j, "schedule.total_steps");
  if (sc.total_steps < 0) throw UsageError("config key schedule.total_steps must not be negative");
  sc.max_lr = get_as<double>(j, "schedule.max_lr");
  sc.warmup_frac = get_as<double>(j, "schedule.warmup_frac");
  sc.decay_frac = get_as<double>(j, "schedule.decay_frac");
  sc.decay_floor_ratio = get_as<double>(j, "schedule.decay_floor_ratio");

  c.similarity_threshold = get_as<double>(j, "evaluation.similarity_threshold");
  c.judge_max_attempts = get_as<int>(j, "evaluation.judge_max_attempts");
  return c;
}

}  // namespace domaug
