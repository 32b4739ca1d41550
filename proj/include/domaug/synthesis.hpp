#pragma once

// Task-oriented passage synthesis: request sampling, prompt rendering,
// response parsing and structural validation.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "domaug/corpus.hpp"
#include "domaug/error.hpp"
#include "domaug/gateway.hpp"
#include "domaug/parallel.hpp"
#include "domaug/rng.hpp"
#include "domaug/text.hpp"

namespace domaug {

enum class DomainMode { entity_centered, knowledge_centered };

inline std::string_view to_string(DomainMode m) {
  return m == DomainMode::entity_centered ? "entity_centered" : "knowledge_centered";
}

inline DomainMode parse_domain_mode(std::string_view s) {
  if (s == "entity_centered" || s == "entity") return DomainMode::entity_centered;
  if (s == "knowledge_centered" || s == "knowledge") return DomainMode::knowledge_centered;
  throw UsageError("unknown domain mode: " + std::string(s));
}

struct TaskDef {
  std::string name;
  std::string description;

  friend bool operator==(const TaskDef&, const TaskDef&) = default;
};

struct ProblemInstance {
  TaskDef task;
  std::string statement;

  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

struct ProblemLimits {
  std::size_t min = 2;
  std::size_t max = 4;
};

struct PassageRequest {
  std::string id;
  DomainMode mode = DomainMode::knowledge_centered;
  std::vector<ProblemInstance> problems;
  GenerationParams params;

  friend bool operator==(const PassageRequest& a, const PassageRequest& b) {
    return a.id == b.id && a.mode == b.mode && a.problems == b.problems;
  }

  void validate(ProblemLimits limits = {}) const {
    if (problems.size() < limits.min || problems.size() > limits.max)
      throw UsageError("request " + id + " has " + std::to_string(problems.size()) + " problems; expected " +
                       std::to_string(limits.min) + ".." + std::to_string(limits.max));
    std::set<std::string> seen;
    for (const auto& p : problems) {
      if (text::trim(p.statement).empty())
        throw UsageError("request " + id + ": empty problem statement for task " + p.task.name);
      if (!seen.insert(p.task.name).second)
        throw UsageError("request " + id + ": task " + p.task.name + " appears twice");
    }
  }
};

struct TaskPool {
  TaskDef task;
  std::vector<ProblemInstance> problems;
};

// Keyed by task name so iteration order is stable.
using TaskPools = std::map<std::string, TaskPool>;

// Reads {task, description?, statement} records, one per line.
inline TaskPools read_task_pools(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open task pools: " + path.string());
  TaskPools pools;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (j.is_discarded() || !j.is_object()) throw DataError(where + ": not a JSON object");
    if (!j.contains("task") || !j["task"].is_string()) throw DataError(where + ": missing string field \"task\"");
    if (!j.contains("statement") || !j["statement"].is_string())
      throw DataError(where + ": missing string field \"statement\"");
    ProblemInstance p;
    p.task.name = j["task"].get<std::string>();
    if (j.contains("description") && j["description"].is_string())
      p.task.description = j["description"].get<std::string>();
    p.statement = j["statement"].get<std::string>();
    if (text::trim(p.statement).empty()) throw DataError(where + ": empty statement");
    auto& pool = pools[p.task.name];
    if (pool.problems.empty()) pool.task = p.task;
    else if (!(pool.task == p.task)) throw DataError(where + ": conflicting description for task " + p.task.name);
    pool.problems.push_back(std::move(p));
  }
  return pools;
}

// Draws k distinct non-empty pools uniformly without replacement, then one
// problem uniformly from each. Problems appear in draw order.
inline PassageRequest sample_request(const TaskPools& pools, std::size_t k, DomainMode mode,
                                     std::uint64_t seed, ProblemLimits limits = {}) {
  if (k < limits.min || k > limits.max)
    throw UsageError("problems per passage must be in " + std::to_string(limits.min) + ".." +
                     std::to_string(limits.max) + ", got " + std::to_string(k));
  std::vector<const TaskPool*> available;
  for (const auto& [name, pool] : pools)
    if (!pool.problems.empty()) available.push_back(&pool);
  if (available.size() < k)
    throw UsageError("need " + std::to_string(k) + " non-empty task pools, have " +
                     std::to_string(available.size()));

  SplitMix64 rng(seed);
  PassageRequest req;
  req.mode = mode;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(available.size() - i));
    std::swap(available[i], available[j]);
    const auto& pool = *available[i];
    req.problems.push_back(pool.problems[rng.below(pool.problems.size())]);
  }
  return req;
}

inline constexpr std::string_view kGuidelineHeading = "Structured Guideline for Passage Generation";
inline constexpr std::string_view kPassageOpen = "<Passage>";
inline constexpr std::string_view kPassageClose = "</Passage>";

inline std::string task_label(const TaskDef& t) {
  return t.description.empty() ? t.name : t.name + " (" + t.description + ")";
}

// The mode does not enter the prompt: both domain kinds use one template and
// differ only in which problems feed it.
inline std::string build_prompt(const PassageRequest& request) {
  std::string p =
      "#### Structured Guideline for Passage Generation\n"
      "\n"
      "#### Inputs Required:\n"
      "\n"
      "- **Questions**: The question for each task.\n"
      "\n"
      "#### Passage Generation Steps:\n"
      "\n"
      "- Task specific: For each of the downstream tasks listed below, write one paragraph analyzing the "
      "potential answers and the reasoning process associated with each. Please list the answer explicitly.\n"
      "\n"
      "- Enlightenment: After writing paragraphs for all tasks, highlighting shared learnings across all tasks "
      "and distinct problem solving tricks for each task, specifically the current problem.\n"
      "\n"
      "#### Quality Considerations:\n"
      "\n"
      "- Ensure coherence and logical flow throughout the passage.\n"
      "\n"
      "- Maintain a concise and clear writing style, avoiding redundancy and focusing on summarizing key "
      "points.\n"
      "\n"
      "#### Input:\n"
      "Please return only the generated passage between tags <Passage></Passage> given below input.\n";
  for (const auto& prob : request.problems) {
    p += "\n- ";
    p += task_label(prob.task);
    p += ": ";
    p += prob.statement;
    p += '\n';
  }
  return p;
}

struct SyntheticPassage {
  std::string request_id;
  std::string raw_text;
  std::vector<std::pair<std::string, std::string>> task_paragraphs;  // (task name, paragraph)
  std::string enlightenment;

  friend bool operator==(const SyntheticPassage&, const SyntheticPassage&) = default;

  // The passage body as training text: task paragraphs then enlightenment.
  std::string text() const {
    std::string out;
    for (const auto& [task, para] : task_paragraphs) {
      out += para;
      out += "\n\n";
    }
    out += enlightenment;
    return out;
  }
};

class PassageParseError : public DataError {
 public:
  enum class Kind { no_tags, too_few_paragraphs };
  PassageParseError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline std::string_view to_string(PassageParseError::Kind k) {
  return k == PassageParseError::Kind::no_tags ? "no_tags" : "too_few_paragraphs";
}

// Paragraphs are separated by one or more blank (whitespace-only) lines.
inline std::vector<std::string> split_paragraphs(std::string_view body) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    auto t = text::trim(current);
    if (!t.empty()) out.emplace_back(t);
    current.clear();
  };
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    std::string_view line = body.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current += line;
    }
    pos = nl + 1;
  }
  flush();
  return out;
}

// Takes the text between the first <Passage> and the last </Passage>. The first
// N-1 paragraphs go to the first N-1 problems, the last paragraph is the
// enlightenment, and everything in between belongs to problem N.
inline SyntheticPassage parse_passage(std::string_view raw, const PassageRequest& request) {
  const auto open = raw.find(kPassageOpen);
  const auto close = raw.rfind(kPassageClose);
  if (open == std::string_view::npos || close == std::string_view::npos || close < open + kPassageOpen.size())
    throw PassageParseError(PassageParseError::Kind::no_tags, "response has no <Passage></Passage> block");
  const auto paras = split_paragraphs(raw.substr(open + kPassageOpen.size(), close - open - kPassageOpen.size()));
  const std::size_t n = request.problems.size();
  if (n == 0) throw UsageError("request " + request.id + " has no problems");
  if (paras.size() < n + 1)
    throw PassageParseError(PassageParseError::Kind::too_few_paragraphs,
                            "passage has " + std::to_string(paras.size()) + " paragraphs, need " +
                                std::to_string(n + 1));
  SyntheticPassage out;
  out.request_id = request.id;
  out.raw_text = std::string(raw);
  for (std::size_t i = 0; i + 1 < n; ++i) out.task_paragraphs.emplace_back(request.problems[i].task.name, paras[i]);
  std::string last = paras[n - 1];
  for (std::size_t i = n; i + 1 < paras.size(); ++i) last += "\n\n" + paras[i];
  out.task_paragraphs.emplace_back(request.problems[n - 1].task.name, std::move(last));
  out.enlightenment = paras.back();
  return out;
}

struct ValidationOptions {
  std::size_t min_task_words = 20;
  std::size_t min_enlightenment_words = 20;
};

struct Violation {
  std::string code;
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
  }
};

inline ValidationReport validate(const SyntheticPassage& passage, const PassageRequest& request,
                                 const ValidationOptions& opts = {}) {
  ValidationReport r;
  const std::size_t n = request.problems.size();
  if (passage.task_paragraphs.size() != n) {
    r.violations.push_back({"paragraph_count_mismatch", "expected " + std::to_string(n) + " task paragraphs, got " +
                                                            std::to_string(passage.task_paragraphs.size())});
  }
  for (std::size_t i = 0; i < passage.task_paragraphs.size(); ++i) {
    const auto& [task, para] = passage.task_paragraphs[i];
    if (i < n && task != request.problems[i].task.name)
      r.violations.push_back({"task_order_mismatch", "paragraph " + std::to_string(i + 1) + " is for " + task +
                                                         ", request has " + request.problems[i].task.name});
    const auto words = text::count_words(para);
    if (words < opts.min_task_words)
      r.violations.push_back({"task_paragraph_too_short", task + ": " + std::to_string(words) + " words"});
  }
  const auto ewords = text::count_words(passage.enlightenment);
  if (ewords == 0) r.violations.push_back({"enlightenment_missing", ""});
  else if (ewords < opts.min_enlightenment_words)
    r.violations.push_back({"enlightenment_too_short", std::to_string(ewords) + " words"});

  // The enlightenment must be the final paragraph of the tagged block.
  const auto open = passage.raw_text.find(kPassageOpen);
  const auto close = passage.raw_text.rfind(kPassageClose);
  if (open == std::string::npos || close == std::string::npos || close < open) {
    r.violations.push_back({"enlightenment_not_last", "raw text has no passage block"});
  } else {
    const auto paras = split_paragraphs(
        std::string_view(passage.raw_text).substr(open + kPassageOpen.size(), close - open - kPassageOpen.size()));
    if (paras.empty() || paras.back() != passage.enlightenment)
      r.violations.push_back({"enlightenment_not_last", "final paragraph differs from the enlightenment"});
  }
  return r;
}

struct GenerationAttempt {
  std::string response;  // empty when the gateway itself failed
  std::string error;
};

struct FailureRecord {
  std::string request_id;
  std::string reason;  // no_tags, too_few_paragraphs, validation, gateway
  std::vector<GenerationAttempt> attempts;
};

struct GenerateOptions {
  int max_attempts = 3;  // total tries with the identical prompt
  ValidationOptions validation;
};

using GenerationOutcome = std::variant<SyntheticPassage, FailureRecord>;

// Prompt, complete, parse, validate. Parse or validation failures retry with
// the same prompt; a gateway failure ends the request immediately.
inline GenerationOutcome generate(ModelGateway& gateway, const PassageRequest& request,
                                  const GenerateOptions& opts = {}) {
  const std::string prompt = build_prompt(request);
  FailureRecord failure{request.id, "", {}};
  for (int attempt = 0; attempt < std::max(1, opts.max_attempts); ++attempt) {
    std::string reply;
    try {
      reply = gateway.complete(prompt, request.params);
    } catch (const GatewayError& e) {
      failure.attempts.push_back({"", e.what()});
      failure.reason = "gateway";
      return failure;
    }
    try {
      auto passage = parse_passage(reply, request);
      auto report = validate(passage, request, opts.validation);
      if (report.ok()) return passage;
      std::string codes;
      for (const auto& v : report.violations) codes += (codes.empty() ? "" : ",") + v.code;
      failure.attempts.push_back({std::move(reply), "validation: " + codes});
      failure.reason = "validation";
    } catch (const PassageParseError& e) {
      failure.attempts.push_back({std::move(reply), e.what()});
      failure.reason = std::string(to_string(e.kind()));
    }
  }
  return failure;
}

struct BatchResult {
  std::vector<SyntheticPassage> passages;  // request order
  std::vector<FailureRecord> failures;     // request order
};

// At most `max_in_flight` requests are outstanding at once.
inline BatchResult generate_batch(ModelGateway& gateway, std::span<const PassageRequest> requests,
                                  const GenerateOptions& opts = {}, std::size_t max_in_flight = 4) {
  std::vector<std::optional<GenerationOutcome>> outcomes(requests.size());
  parallel_for(requests.size(), std::max<std::size_t>(1, max_in_flight),
               [&](std::size_t i) { outcomes[i] = generate(gateway, requests[i], opts); });
  BatchResult out;
  for (auto& o : outcomes) {
    if (auto* p = std::get_if<SyntheticPassage>(&*o)) out.passages.push_back(std::move(*p));
    else out.failures.push_back(std::get<FailureRecord>(std::move(*o)));
  }
  return out;
}

// Deterministic batch of requests: request i uses seed mix64(seed, i).
inline std::vector<PassageRequest> sample_requests(const TaskPools& pools, std::size_t count, std::size_t k,
                                                   DomainMode mode, std::uint64_t seed, const GenerationParams& params,
                                                   ProblemLimits limits = {}) {
  std::vector<PassageRequest> out;
  out.reserve(count);
  const int width = static_cast<int>(std::to_string(count ? count - 1 : 0).size());
  for (std::size_t i = 0; i < count; ++i) {
    auto req = sample_request(pools, k, mode, mix64(seed, i), limits);
    std::string num = std::to_string(i);
    req.id = "passage-" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num;
    req.params = params;
    if (params.seed) req.params.seed = mix64(*params.seed, i);
    out.push_back(std::move(req));
  }
  return out;
}

inline nlohmann::json to_json(const SyntheticPassage& p, const PassageRequest& request) {
  nlohmann::json paras = nlohmann::json::array();
  for (const auto& [task, para] : p.task_paragraphs) paras.push_back({{"task", task}, {"text", para}});
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& prob : request.problems) tasks.push_back(prob.task.name);
  return {{"id", p.request_id},
          {"mode", to_string(request.mode)},
          {"tasks", tasks},
          {"task_paragraphs", paras},
          {"enlightenment", p.enlightenment},
          {"source", "synthetic"},
          {"text", p.text()}};
}

inline nlohmann::json to_json(const FailureRecord& f) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : f.attempts) attempts.push_back({{"response", a.response}, {"error", a.error}});
  return {{"request_id", f.request_id}, {"reason", f.reason}, {"attempts", attempts}};
}

}  // namespace domaug
