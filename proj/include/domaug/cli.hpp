#pragma once

// Command-line driver. Every subcommand reads one merged configuration,
// writes its artifacts under paths.output and records a run entry in
// report.json.

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "domaug/classifier.hpp"
#include "domaug/config.hpp"
#include "domaug/corpus.hpp"
#include "domaug/error.hpp"
#include "domaug/evaluation.hpp"
#include "domaug/gateway.hpp"
#include "domaug/http_gateway.hpp"
#include "domaug/mixture.hpp"
#include "domaug/mock_gateway.hpp"
#include "domaug/quality.hpp"
#include "domaug/selection.hpp"
#include "domaug/synthesis.hpp"
#include "domaug/text.hpp"

namespace domaug::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kGateway = 3 };

// Outermost gateway layer: remembers whether any call failed for good, so a
// subcommand can finish its artifacts and still exit 3.
class CountingGateway final : public ModelGateway {
 public:
  explicit CountingGateway(std::shared_ptr<ModelGateway> inner) : inner_(std::move(inner)) {}

  std::string complete(const std::string& prompt, const GenerationParams& params) override {
    ++calls_;
    try {
      return inner_->complete(prompt, params);
    } catch (const GatewayError&) {
      ++failures_;
      throw;
    }
  }

  std::uint64_t calls() const { return calls_; }
  std::uint64_t failures() const { return failures_; }

 private:
  std::shared_ptr<ModelGateway> inner_;
  std::atomic<std::uint64_t> calls_{0}, failures_{0};
};

inline std::shared_ptr<CountingGateway> make_gateway(const PipelineConfig& cfg) {
  const auto& g = cfg.gateway;
  std::shared_ptr<ModelGateway> base;
  if (g.kind == "mock") {
    base = std::make_shared<MockGateway>(g.mock_seed);
  } else {
    HttpGatewayConfig h;
    h.endpoint = g.endpoint;
    h.token_env = g.token_env;
    h.connect_timeout = std::chrono::seconds(g.connect_timeout_s);
    h.read_timeout = std::chrono::seconds(g.read_timeout_s);
    base = std::make_shared<HttpChatGateway>(h);
  }
  if (!g.log.empty()) {
    std::filesystem::path log = g.log;
    if (log.is_relative()) log = cfg.paths.output / log;
    base = std::make_shared<LoggingGateway>(base, log);
  }
  RetryConfig rc;
  rc.max_retries = g.max_retries;
  rc.initial_backoff = std::chrono::milliseconds(g.initial_backoff_ms);
  rc.max_backoff = std::chrono::milliseconds(g.max_backoff_ms);
  return std::make_shared<CountingGateway>(std::make_shared<RetryingGateway>(base, rc));
}

// ---------------------------------------------------------------------------
// Run reports.

struct RunRecord {
  std::string name;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> artifacts;
  nlohmann::json counts = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();
  nlohmann::json timings_ms = nlohmann::json::object();
  std::shared_ptr<CountingGateway> gateway;

  void time(const std::string& phase, std::chrono::steady_clock::time_point since) {
    timings_ms[phase] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
  }
};

inline std::uint64_t file_digest(const std::filesystem::path& path, std::uint64_t& bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  std::vector<char> buf(1 << 16);
  bytes = 0;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    bytes += n;
  }
  return h;
}

inline nlohmann::json load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (in) {
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_object() && j.contains("runs") && j["runs"].is_object()) return j;
  }
  return {{"runs", nlohmann::json::object()}};
}

inline void write_report(const PipelineConfig& cfg, const RunRecord& rec, int exit_code, const std::string& error) {
  std::filesystem::create_directories(cfg.paths.output);
  auto report = load_report(cfg.report_path());
  nlohmann::json inputs = nlohmann::json::array();
  std::uint64_t combined = 14695981039346656037ull;
  for (const auto& p : rec.inputs) {
    std::uint64_t bytes = 0, d = 0;
    try {
      d = file_digest(p, bytes);
    } catch (const DataError&) {
      inputs.push_back({{"path", p.generic_string()}, {"missing", true}});
      continue;
    }
    combined = text::fnv1a64(text::hex64(d), combined);
    inputs.push_back({{"path", p.generic_string()}, {"bytes", bytes}, {"digest", text::hex64(d)}});
  }
  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& a : rec.artifacts) artifacts.push_back(a.generic_string());
  nlohmann::json entry = {{"subcommand", rec.name},
                          {"exit_code", exit_code},
                          {"inputs", inputs},
                          {"inputs_digest", text::hex64(combined)},
                          {"config", cfg.raw},
                          {"counts", rec.counts},
                          {"artifacts", artifacts},
                          {"timings_ms", rec.timings_ms}};
  if (!rec.details.empty()) entry["details"] = rec.details;
  if (rec.gateway) entry["gateway"] = {{"calls", rec.gateway->calls()}, {"failures", rec.gateway->failures()}};
  if (!error.empty()) entry["error"] = error;
  report["runs"][rec.name] = std::move(entry);
  report["last_run"] = rec.name;
  std::ofstream out(cfg.report_path(), std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + cfg.report_path().string());
  out << report.dump(2) << '\n';
}

inline const std::filesystem::path& require_path(const std::filesystem::path& p, const char* key) {
  if (p.empty()) throw UsageError("missing required config key: " + std::string(key));
  return p;
}

inline int gateway_exit(const RunRecord& rec) {
  return rec.gateway && rec.gateway->failures() > 0 ? kGateway : kOk;
}

// ---------------------------------------------------------------------------
// Subcommands. Each fills `rec` and returns 0 or 3; errors are thrown.

inline int cmd_train_classifier(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  const auto& pos_path = require_path(cfg.paths.in_domain, "paths.in_domain");
  const auto& neg_path = require_path(cfg.paths.negatives, "paths.negatives");
  rec.inputs = {pos_path, neg_path};
  auto t0 = std::chrono::steady_clock::now();
  auto pos = ingest(pos_path, "in_domain");
  auto neg = ingest(neg_path, "negatives");
  if (pos.documents.empty()) throw DataError(pos_path.string() + ": no usable documents");
  if (neg.documents.empty()) throw DataError(neg_path.string() + ": no usable documents");
  rec.details["inputs"] = {to_json(pos.summary), to_json(neg.summary)};

  // Subsample the larger class with the seed so both classes weigh the same.
  if (cfg.balance_classes) {
    auto& big = pos.documents.size() > neg.documents.size() ? pos.documents : neg.documents;
    const auto n = std::min(pos.documents.size(), neg.documents.size());
    if (big.size() > n) {
      SplitMix64 rng(mix64(cfg.seed, 0xba1a));
      shuffle(std::span<Document>(big), rng);
      big.resize(n);
    }
  }
  rec.time("ingest", t0);

  t0 = std::chrono::steady_clock::now();
  auto result = train(pos.documents, neg.documents, cfg.classifier);
  rec.time("train", t0);
  std::filesystem::create_directories(cfg.model_path().parent_path());
  save_model(result.model, cfg.model_path());
  rec.artifacts.push_back(cfg.model_path());
  rec.counts = to_json(result.report);
  rec.counts["balanced"] = cfg.balance_classes;
  rec.details["classifier"] = to_json(cfg.classifier);

  if (!cfg.paths.heldout_in_domain.empty() && !cfg.paths.heldout_negatives.empty()) {
    t0 = std::chrono::steady_clock::now();
    rec.inputs.push_back(cfg.paths.heldout_in_domain);
    rec.inputs.push_back(cfg.paths.heldout_negatives);
    std::vector<LabeledScore> scored;
    std::uint64_t correct = 0;
    auto eval = [&](const std::filesystem::path& p, bool label) {
      JsonlReader reader(p, "heldout");
      while (auto doc = reader.next()) {
        const double s = result.model.score(doc->text);
        scored.push_back({s, label});
        if ((s >= 0.5) == label) ++correct;
      }
    };
    eval(cfg.paths.heldout_in_domain, true);
    eval(cfg.paths.heldout_negatives, false);
    if (scored.empty()) throw DataError("held-out files contain no usable documents");
    rec.counts["heldout_documents"] = scored.size();
    rec.counts["heldout_accuracy"] = static_cast<double>(correct) / static_cast<double>(scored.size());
    try {
      rec.counts["heldout_auc"] = compute_auc(scored);
    } catch (const DataError&) {
      rec.counts["heldout_auc"] = nullptr;  // one class only
    }
    rec.time("heldout", t0);
  }
  out << "train-classifier: " << result.report.examples << " examples, train accuracy "
      << result.report.train_accuracy;
  if (rec.counts.contains("heldout_accuracy")) out << ", held-out accuracy " << rec.counts["heldout_accuracy"];
  out << "\n  model -> " << cfg.model_path().generic_string() << "\n";
  return kOk;
}

inline int cmd_score_select(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  if (cfg.paths.general.empty()) throw UsageError("missing required config key: paths.general");
  rec.inputs = cfg.paths.general;
  rec.inputs.insert(rec.inputs.begin(), cfg.model_path());
  auto t0 = std::chrono::steady_clock::now();
  const auto model = load_model(cfg.model_path());
  rec.time("load_model", t0);

  t0 = std::chrono::steady_clock::now();
  StreamingSelector selector(cfg.selection);
  std::vector<std::uint64_t> histogram(10, 0);
  nlohmann::json shards = nlohmann::json::array();
  std::uint64_t scanned_tokens = 0;
  std::vector<Document> batch;
  for (const auto& shard : cfg.paths.general) {
    JsonlReader reader(shard, "general");
    while (reader.next_batch(batch, cfg.selection_batch_docs)) {
      for (auto& d : score_documents(model, batch, cfg.workers)) {
        histogram[std::min<std::size_t>(9, static_cast<std::size_t>(d.domain_score * 10))]++;
        scanned_tokens += d.document.token_count;
        selector.add(std::move(d));
      }
    }
    shards.push_back(to_json(reader.summary()));
  }
  const auto seen = selector.seen();
  auto selected = std::move(selector).finish();
  rec.time("score_select", t0);

  std::filesystem::create_directories(cfg.paths.output);
  write_scored_jsonl(cfg.selected_path(), selected);
  rec.artifacts.push_back(cfg.selected_path());
  std::uint64_t tokens = 0;
  for (const auto& d : selected) tokens += d.document.token_count;
  rec.counts = {{"scanned_documents", seen},
                {"scanned_tokens", scanned_tokens},
                {"selected_documents", selected.size()},
                {"selected_tokens", tokens},
                {"score_histogram", histogram}};
  rec.details["policy"] = to_json(cfg.selection);
  rec.details["shards"] = shards;
  out << "score-select: " << selected.size() << " of " << seen << " documents (" << tokens << " tokens)\n"
      << "  selected -> " << cfg.selected_path().generic_string() << "\n";
  return kOk;
}

inline int cmd_quality_filter(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  rec.inputs = {cfg.selected_path()};
  if (!std::filesystem::exists(cfg.selected_path()))
    throw DataError(cfg.selected_path().string() + ": not found (run score-select first)");
  auto t0 = std::chrono::steady_clock::now();
  IngestSummary summary;
  auto docs = read_scored_jsonl(cfg.selected_path(), &summary);
  std::unique_ptr<QualityScorer> scorer;
  std::size_t workers = cfg.workers;
  if (cfg.quality_scorer == "heuristic") {
    scorer = std::make_unique<HeuristicQualityScorer>();
  } else {
    rec.gateway = make_gateway(cfg);
    scorer = std::make_unique<GatewayQualityScorer>(
        rec.gateway, GenerationParams{cfg.gateway.model, 0.0, 8, std::nullopt});
    workers = cfg.gateway.max_in_flight;
  }
  auto result = quality_filter(docs, *scorer, cfg.quality_threshold, workers);
  rec.time("filter", t0);
  write_scored_jsonl(cfg.selected_path(), result.retained);
  rec.artifacts.push_back(cfg.selected_path());
  rec.counts = to_json(result.report);
  rec.details["input"] = to_json(summary);
  out << "quality-filter: kept " << result.report.retained << " of " << result.report.inputs << " (threshold "
      << cfg.quality_threshold << ", " << result.report.errors << " scorer errors)\n";
  return gateway_exit(rec);
}

inline int cmd_synthesize(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  const auto& pools_path = require_path(cfg.paths.task_pools, "paths.task_pools");
  rec.inputs = {pools_path};
  const auto pools = read_task_pools(pools_path);
  const auto& s = cfg.synthesis;
  GenerationParams params{cfg.gateway.model, s.temperature, s.max_tokens, cfg.seed};
  auto requests = sample_requests(pools, s.passages, s.problems_per_passage, s.mode, cfg.seed, params, s.limits);

  std::filesystem::create_directories(cfg.paths.output);
  rec.gateway = make_gateway(cfg);
  auto t0 = std::chrono::steady_clock::now();
  auto batch = generate_batch(*rec.gateway, requests, s.generate, cfg.gateway.max_in_flight);
  rec.time("generate", t0);

  std::map<std::string, const PassageRequest*> by_id;
  for (const auto& r : requests) by_id[r.id] = &r;
  {
    std::ofstream f(cfg.passages_path(), std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + cfg.passages_path().string());
    for (const auto& p : batch.passages) write_jsonl_line(f, to_json(p, *by_id.at(p.request_id)));
  }
  rec.artifacts.push_back(cfg.passages_path());

  nlohmann::json reasons = nlohmann::json::object();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : batch.failures) {
    reasons[f.reason] = reasons.value(f.reason, 0) + 1;
    failures.push_back(to_json(f));
  }
  rec.counts = {{"requests", requests.size()},
                {"passages", batch.passages.size()},
                {"failures", batch.failures.size()},
                {"failure_reasons", reasons}};
  rec.details = {{"mode", to_string(s.mode)}, {"failures", failures}};
  out << "synthesize: " << batch.passages.size() << "/" << requests.size() << " passages validated\n"
      << "  passages -> " << cfg.passages_path().generic_string() << "\n";
  return gateway_exit(rec);
}

inline int cmd_plan_mixture(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  const auto& in_path = require_path(cfg.paths.in_domain, "paths.in_domain");
  if (!std::filesystem::exists(cfg.passages_path()))
    throw DataError(cfg.passages_path().string() + ": not found (run synthesize first)");
  auto t0 = std::chrono::steady_clock::now();
  SourceInput in{in_path, SourceOrigin::in_domain, stats_of_file(in_path, "in_domain"), cfg.in_domain_budget};
  rec.inputs = {in_path};
  std::optional<SourceInput> sel;
  if (std::filesystem::exists(cfg.selected_path())) {
    sel = SourceInput{cfg.selected_path(), SourceOrigin::selected, stats_of_file(cfg.selected_path(), "selected"),
                      cfg.selected_budget};
    rec.inputs.push_back(cfg.selected_path());
  }
  SourceInput syn{cfg.passages_path(), SourceOrigin::synthetic, stats_of_file(cfg.passages_path(), "synthetic"),
                  cfg.synthetic_budget};
  rec.inputs.push_back(cfg.passages_path());
  rec.time("stats", t0);

  MixtureOptions options = cfg.mixture;
  std::string steps_source = "configured";
  if (options.schedule.total_steps == 0) {
    // One step per batch of planned tokens across both stages.
    auto budget = [](const SourceInput& s) { return s.budget_tokens.value_or(s.stats.token_count); };
    std::uint64_t tokens = budget(in) + budget(syn) + (sel ? budget(*sel) : 0);
    options.schedule.total_steps =
        static_cast<std::int64_t>(std::max<std::uint64_t>(1, (tokens + options.batch_size_tokens - 1) / options.batch_size_tokens));
    steps_source = "derived from planned tokens / batch size";
  }
  auto plan = plan_two_stage(in, sel, syn, options);
  write_manifest(cfg.manifest_path(), plan);
  rec.artifacts.push_back(cfg.manifest_path());
  rec.counts = {{"stage1_tokens", plan.stage1_tokens()},
                {"stage2_tokens", plan.stage2_tokens()},
                {"stage1_shards", plan.stage1_order.size()},
                {"stage2_shards", plan.stage2_order.size()},
                {"total_steps", options.schedule.total_steps}};
  rec.details = {{"total_steps_source", steps_source}, {"replay_note", plan.replay_note}};
  out << "plan-mixture: stage 1 " << plan.stage1_tokens() << " tokens, stage 2 " << plan.stage2_tokens()
      << " tokens; " << plan.replay_note << "\n  manifest -> " << cfg.manifest_path().generic_string() << "\n";
  return kOk;
}

inline int cmd_evaluate_auc(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  const auto& p = require_path(cfg.paths.predictions, "paths.predictions");
  rec.inputs = {p};
  const auto preds = read_predictions(p);
  std::uint64_t positives = 0;
  for (const auto& x : preds) positives += x.positive ? 1 : 0;
  const double auc = compute_auc(preds);
  rec.counts = {{"n", preds.size()}, {"positives", positives}, {"negatives", preds.size() - positives}, {"auc", auc}};
  rec.details = {{"ties", "Mann-Whitney, tied pairs count 0.5"}};
  out << "evaluate auc: " << auc << " over " << preds.size() << " predictions\n";
  return kOk;
}

inline int cmd_evaluate_winrate(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  const auto& p = require_path(cfg.paths.judge_cases, "paths.judge_cases");
  rec.inputs = {p};
  const auto cases = read_judge_cases(p);
  std::filesystem::create_directories(cfg.paths.output);
  rec.gateway = make_gateway(cfg);
  JudgeOptions opts;
  opts.params.model = cfg.gateway.judge_model;
  opts.max_attempts = cfg.judge_max_attempts;
  opts.max_in_flight = cfg.gateway.max_in_flight;
  auto t0 = std::chrono::steady_clock::now();
  const auto report = judge_winrate(*rec.gateway, cases, opts);
  rec.time("judge", t0);
  rec.details = to_json(report);
  rec.counts = rec.details["overall"];
  out << "evaluate winrate: " << rec.counts["win_rate"].dump() << " over " << report.overall.cases << " cases ("
      << report.overall.abstentions << " abstentions)\n";
  return gateway_exit(rec);
}

inline int cmd_evaluate_rewrites(const PipelineConfig& cfg, RunRecord& rec, std::ostream& out) {
  const auto& p = require_path(cfg.paths.rewrites, "paths.rewrites");
  rec.inputs = {p};
  auto sets = read_rewrite_sets(p);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < sets.size(); ++i)
    if (sets[i].good_flags.empty()) pending.push_back(i);
  nlohmann::json judging = {{"judged", 0}, {"unresolved", 0}};
  if (!pending.empty()) {
    std::filesystem::create_directories(cfg.paths.output);
    rec.gateway = make_gateway(cfg);
    std::vector<RewriteSet> todo;
    for (auto i : pending) todo.push_back(sets[i]);
    auto t0 = std::chrono::steady_clock::now();
    const auto jr = judge_rewrites(*rec.gateway, todo, {cfg.gateway.judge_model, 0.0, 8, std::nullopt},
                                   cfg.judge_max_attempts, cfg.gateway.max_in_flight);
    rec.time("judge", t0);
    for (std::size_t k = 0; k < pending.size(); ++k) sets[pending[k]] = std::move(todo[k]);
    judging = {{"judged", jr.judged}, {"unresolved", jr.unresolved}, {"replies", jr.replies}};
  }
  const double density = compute_density(sets);
  const double diversity = compute_diversity(sets, trigram_embedding, cfg.similarity_threshold);
  nlohmann::json per_query = nlohmann::json::array();
  for (const auto& s : sets)
    per_query.push_back({{"query", s.query},
                         {"good", s.good_flags},
                         {"clusters", cluster_count(s.rewrites, trigram_embedding, cfg.similarity_threshold)}});
  rec.counts = {{"queries", sets.size()}, {"density", density}, {"diversity", diversity}};
  rec.details = {{"clustering",
                  {{"embedding", "character trigram term frequency"},
                   {"algorithm", "greedy leader clustering in input order"},
                   {"threshold", cfg.similarity_threshold}}},
                 {"judging", judging},
                 {"per_query", per_query}};
  out << "evaluate rewrites: density " << density << ", diversity " << diversity << " over " << sets.size()
      << " queries\n";
  return gateway_exit(rec);
}

// Human-readable summary of report.json; never touches the network.
inline void render_report(const nlohmann::json& report, std::ostream& out) {
  if (!report.contains("runs") || !report["runs"].is_object() || report["runs"].empty()) {
    out << "no runs recorded\n";
    return;
  }
  for (const auto& [name, run] : report["runs"].items()) {
    out << name << ": exit " << run.value("exit_code", -1) << ", inputs " << run.value("inputs_digest", "?") << "\n";
    if (run.contains("error")) out << "  error: " << run["error"].get<std::string>() << "\n";
    if (run.contains("counts") && run["counts"].is_object())
      for (const auto& [k, v] : run["counts"].items()) out << "  " << k << ": " << v.dump() << "\n";
    if (run.contains("artifacts"))
      for (const auto& a : run["artifacts"]) out << "  artifact: " << a.get<std::string>() << "\n";
    if (run.contains("timings_ms") && run["timings_ms"].is_object())
      for (const auto& [k, v] : run["timings_ms"].items())
        out << "  time " << k << ": " << static_cast<long long>(std::llround(v.get<double>())) << " ms\n";
  }
}

// ---------------------------------------------------------------------------

using Command = int (*)(const PipelineConfig&, RunRecord&, std::ostream&);

inline int run_recorded(const PipelineConfig& cfg, const std::string& name, Command cmd, std::ostream& out,
                        std::ostream& err) {
  RunRecord rec;
  rec.name = name;
  int code = kOk;
  std::string error;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    code = cmd(cfg, rec, out);
  } catch (const UsageError& e) {
    code = kUsage, error = e.what();
  } catch (const GatewayError& e) {
    code = kGateway, error = e.what();
  } catch (const DataError& e) {
    code = kData, error = e.what();
  } catch (const nlohmann::json::exception& e) {
    code = kData, error = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    code = kData, error = e.what();
  }
  rec.time("total", t0);
  if (!error.empty()) err << "error: " << error << "\n";
  else if (code == kGateway) err << "error: " << rec.gateway->failures() << " gateway call(s) failed; see the run report\n";
  try {
    write_report(cfg, rec, code, error);
  } catch (const std::exception& e) {
    err << "error: cannot write run report: " << e.what() << "\n";
    if (code == kOk) code = kData;
  }
  return code;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Domain-adaptation data pipeline: classifier-based selection, quality filtering, "
               "task-oriented synthesis, mixture planning and evaluation."};
  app.name("domaug");
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path, output, report_file;
  std::vector<std::string> overrides;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  app.add_option("-c,--config", config_path, "JSON configuration file");
  app.add_option("--set", overrides, "Override a config key, e.g. --set selection.mode=top_k_docs (repeatable)")
      ->take_all();
  app.add_option("-o,--output", output, "Output directory (paths.output)");
  app.add_option("-w,--workers", workers, "Worker threads (workers)");
  app.add_option("--seed", seed, "Random seed (seed)");

  struct Sub {
    const char* name;
    Command cmd;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {"train-classifier", cmd_train_classifier, "Train the domain classifier; writes model.traitft"},
      {"score-select", cmd_score_select, "Score general-corpus shards and select; writes selected.jsonl"},
      {"quality-filter", cmd_quality_filter, "Drop selected documents scoring <= quality.threshold"},
      {"synthesize", cmd_synthesize, "Generate task-oriented passages; writes passages.jsonl"},
      {"plan-mixture", cmd_plan_mixture, "Plan two-stage training; writes manifest.json"},
  };
  std::vector<CLI::App*> sub_apps;
  for (const auto& s : subs) sub_apps.push_back(app.add_subcommand(s.name, s.help));
  auto* evaluate = app.add_subcommand("evaluate", "Evaluation metrics");
  evaluate->require_subcommand(1);
  auto* ev_auc = evaluate->add_subcommand("auc", "ROC AUC of paths.predictions");
  auto* ev_win = evaluate->add_subcommand("winrate", "Position-debiased pairwise win rate of paths.judge_cases");
  auto* ev_rw = evaluate->add_subcommand("rewrites", "Density and diversity of paths.rewrites");
  auto* report = app.add_subcommand("report", "Print a run report (report.json)");
  report->add_option("file", report_file, "Report file; default <output>/report.json");
  auto* pipeline = app.add_subcommand(
      "pipeline", "train-classifier, score-select, quality-filter, synthesize and plan-mixture in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    ConfigBuilder builder;
    if (!config_path.empty()) builder.load_file(config_path);
    for (const auto& o : overrides) builder.set(o);
    // Dedicated flags win over --set.
    if (!output.empty()) builder.set("paths.output=" + nlohmann::json(output).dump());
    if (workers) builder.merge({{"workers", *workers}});
    if (seed) builder.merge({{"seed", *seed}});

    if (report->parsed()) {
      std::filesystem::path file = report_file;
      if (file.empty()) {
        const auto& o = builder.json()["paths"]["output"];
        if (!o.is_string()) throw UsageError("missing required config key: paths.output");
        file = std::filesystem::path(o.get<std::string>()) / "report.json";
      }
      std::ifstream in(file, std::ios::binary);
      if (!in) throw DataError("cannot read " + file.string());
      std::stringstream ss;
      ss << in.rdbuf();
      auto j = nlohmann::json::parse(ss.str(), nullptr, false);
      if (j.is_discarded()) throw DataError(file.string() + ": not valid JSON");
      render_report(j, out);
      return kOk;
    }

    const auto cfg = pipeline_config(builder.json());
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (sub_apps[i]->parsed()) return run_recorded(cfg, subs[i].name, subs[i].cmd, out, err);
    if (ev_auc->parsed()) return run_recorded(cfg, "evaluate auc", cmd_evaluate_auc, out, err);
    if (ev_win->parsed()) return run_recorded(cfg, "evaluate winrate", cmd_evaluate_winrate, out, err);
    if (ev_rw->parsed()) return run_recorded(cfg, "evaluate rewrites", cmd_evaluate_rewrites, out, err);
    if (pipeline->parsed()) {
      int worst = kOk;
      for (const auto& s : subs) {
        const int code = run_recorded(cfg, s.name, s.cmd, out, err);
        if (code == kGateway) worst = kGateway;
        else if (code != kOk) return code;
      }
      return worst;
    }
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const GatewayError& e) {
    err << "error: " << e.what() << "\n";
    return kGateway;
  }
}

}  // namespace domaug::cli
