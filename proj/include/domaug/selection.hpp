#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "domaug/classifier.hpp"
#include "domaug/corpus.hpp"
#include "domaug/error.hpp"
#include "domaug/parallel.hpp"
#include "domaug/quality.hpp"

namespace domaug {

struct ScoredDocument {
  Document document;
  double domain_score = 0.0;
  std::optional<double> quality_score;

  friend bool operator==(const ScoredDocument&, const ScoredDocument&) = default;
};

// Selection order: domain score descending, then id ascending, then source.
inline bool ranks_before(const ScoredDocument& a, const ScoredDocument& b) {
  if (a.domain_score != b.domain_score) return a.domain_score > b.domain_score;
  if (a.document.id != b.document.id) return a.document.id < b.document.id;
  return a.document.source < b.document.source;
}

struct SelectionPolicy {
  enum class Mode { token_budget, top_k_docs, score_threshold };

  Mode mode = Mode::token_budget;
  std::uint64_t budget_tokens = 0;
  std::uint64_t k = 0;
  double min_score = 0.0;

  static SelectionPolicy token_budget(std::uint64_t tokens) {
    return {Mode::token_budget, tokens, 0, 0.0};
  }
  static SelectionPolicy top_k(std::uint64_t k) { return {Mode::top_k_docs, 0, k, 0.0}; }
  static SelectionPolicy threshold(double min_score) {
    return {Mode::score_threshold, 0, 0, min_score};
  }

  void validate() const {
    switch (mode) {
      case Mode::token_budget:
        if (budget_tokens == 0) throw UsageError("selection.budget_tokens must be positive");
        break;
      case Mode::top_k_docs:
        if (k == 0) throw UsageError("selection.k must be positive");
        break;
      case Mode::score_threshold:
        if (!(min_score >= 0.0 && min_score <= 1.0))
          throw UsageError("selection.min_score must be in [0, 1]");
        break;
    }
  }
};

inline std::string_view to_string(SelectionPolicy::Mode m) {
  switch (m) {
    case SelectionPolicy::Mode::token_budget: return "token_budget";
    case SelectionPolicy::Mode::top_k_docs: return "top_k_docs";
    case SelectionPolicy::Mode::score_threshold: return "score_threshold";
  }
  return "?";
}

inline SelectionPolicy::Mode parse_selection_mode(std::string_view s) {
  if (s == "token_budget") return SelectionPolicy::Mode::token_budget;
  if (s == "top_k_docs" || s == "top_k") return SelectionPolicy::Mode::top_k_docs;
  if (s == "score_threshold" || s == "threshold") return SelectionPolicy::Mode::score_threshold;
  throw UsageError("unknown selection mode: " + std::string(s));
}

inline nlohmann::json to_json(const SelectionPolicy& p) {
  nlohmann::json j = {{"mode", to_string(p.mode)}};
  switch (p.mode) {
    case SelectionPolicy::Mode::token_budget: j["budget_tokens"] = p.budget_tokens; break;
    case SelectionPolicy::Mode::top_k_docs: j["k"] = p.k; break;
    case SelectionPolicy::Mode::score_threshold: j["min_score"] = p.min_score; break;
  }
  return j;
}

// Scores documents in parallel over contiguous shards; output keeps input order.
inline std::vector<ScoredDocument> score_documents(const TrainedClassifier& model,
                                                   std::span<const Document> docs,
                                                   std::size_t workers = 1) {
  std::vector<ScoredDocument> out(docs.size());
  parallel_chunks(docs.size(), workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i].document = docs[i];
      out[i].domain_score = model.score(docs[i].text);
    }
  });
  return out;
}

inline std::vector<ScoredDocument> score_stream(const TrainedClassifier& model,
                                                std::span<const Document> docs,
                                                std::size_t workers = 1) {
  return score_documents(model, docs, workers);
}

// Incremental selector holding only the admissible set.
//
// token_budget keeps the longest prefix of the ranked stream whose token sum
// fits the budget. A bounded heap holds that prefix; `cutoff_` is the
// best-ranked document ever evicted, and anything ranked after it can never
// re-enter the prefix.
class StreamingSelector {
 public:
  explicit StreamingSelector(SelectionPolicy policy) : policy_(policy) { policy_.validate(); }

  void add(ScoredDocument doc) {
    ++seen_;
    switch (policy_.mode) {
      case SelectionPolicy::Mode::score_threshold:
        if (doc.domain_score >= policy_.min_score) kept_in_order_.push_back(std::move(doc));
        return;
      case SelectionPolicy::Mode::top_k_docs:
        heap_.push(std::move(doc));
        if (heap_.size() > policy_.k) heap_.pop();
        return;
      case SelectionPolicy::Mode::token_budget:
        if (cutoff_ && !ranks_before(doc, *cutoff_)) return;
        tokens_ += doc.document.token_count;
        heap_.push(std::move(doc));
        while (tokens_ > policy_.budget_tokens) {
          ScoredDocument worst = heap_.top();
          heap_.pop();
          tokens_ -= worst.document.token_count;
          cutoff_ = std::move(worst);
        }
        return;
    }
  }

  std::uint64_t seen() const { return seen_; }

  // Selected documents; ranked order except in threshold mode (input order).
  std::vector<ScoredDocument> finish() && {
    if (policy_.mode == SelectionPolicy::Mode::score_threshold) return std::move(kept_in_order_);
    std::vector<ScoredDocument> out;
    out.reserve(heap_.size());
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  // Max-heap on "ranks later": top() is the worst admitted document.
  struct WorstOnTop {
    bool operator()(const ScoredDocument& a, const ScoredDocument& b) const {
      return ranks_before(a, b);
    }
  };

  SelectionPolicy policy_;
  std::priority_queue<ScoredDocument, std::vector<ScoredDocument>, WorstOnTop> heap_;
  std::vector<ScoredDocument> kept_in_order_;
  std::optional<ScoredDocument> cutoff_;
  std::uint64_t tokens_ = 0;
  std::uint64_t seen_ = 0;
};

inline std::vector<ScoredDocument> select(std::span<const ScoredDocument> scored,
                                          const SelectionPolicy& policy) {
  StreamingSelector sel(policy);
  for (const auto& d : scored) sel.add(d);
  return std::move(sel).finish();
}

struct QualityFilterReport {
  std::uint64_t inputs = 0;
  std::uint64_t retained = 0;
  std::uint64_t dropped = 0;
  std::uint64_t errors = 0;
  std::uint64_t retained_tokens = 0;
  std::uint64_t dropped_tokens = 0;
  double threshold = 1.5;
  std::string scorer;
  std::vector<std::string> error_samples;
};

inline nlohmann::json to_json(const QualityFilterReport& r) {
  return {{"inputs", r.inputs},
          {"retained", r.retained},
          {"dropped", r.dropped},
          {"errors", r.errors},
          {"retained_tokens", r.retained_tokens},
          {"dropped_tokens", r.dropped_tokens},
          {"threshold", r.threshold},
          {"comparison", "strictly greater"},
          {"scorer", r.scorer},
          {"error_samples", r.error_samples}};
}

struct QualityFilterResult {
  std::vector<ScoredDocument> retained;
  QualityFilterReport report;
};

// Keeps documents whose quality score is strictly above `threshold`. Scorer
// exceptions drop the document and are counted. `docs` gets quality_score
// populated where scoring succeeded.
inline QualityFilterResult quality_filter(std::vector<ScoredDocument>& docs, const QualityScorer& scorer,
                                          double threshold = 1.5, std::size_t workers = 1) {
  std::vector<std::optional<std::string>> failures(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    try {
      const double q = scorer.score(docs[i].document.text);
      if (!std::isfinite(q) || q < 0.0) throw DataError("scorer returned a non-finite or negative value");
      docs[i].quality_score = q;
    } catch (const std::exception& e) {
      docs[i].quality_score.reset();
      failures[i] = e.what();
    }
  });
  QualityFilterResult result;
  auto& r = result.report;
  r.threshold = threshold;
  r.scorer = scorer.name();
  r.inputs = docs.size();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto tokens = docs[i].document.token_count;
    if (failures[i]) {
      ++r.errors;
      ++r.dropped;
      r.dropped_tokens += tokens;
      if (r.error_samples.size() < 10)
        r.error_samples.push_back(docs[i].document.id + ": " + *failures[i]);
    } else if (*docs[i].quality_score > threshold) {
      ++r.retained;
      r.retained_tokens += tokens;
      result.retained.push_back(docs[i]);
    } else {
      ++r.dropped;
      r.dropped_tokens += tokens;
    }
  }
  return result;
}

inline QualityFilterResult quality_filter(const std::vector<ScoredDocument>& docs,
                                          const QualityScorer& scorer, double threshold = 1.5,
                                          std::size_t workers = 1) {
  std::vector<ScoredDocument> copy = docs;
  return quality_filter(copy, scorer, threshold, workers);
}

inline nlohmann::json to_json(const ScoredDocument& d) {
  nlohmann::json j = to_json(d.document);
  j["domain_score"] = d.domain_score;
  if (d.quality_score) j["quality_score"] = *d.quality_score;
  else j["quality_score"] = nullptr;
  return j;
}

inline void write_scored_jsonl(const std::filesystem::path& path, std::span<const ScoredDocument> docs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : docs) write_jsonl_line(out, to_json(d));
  if (!out) throw DataError("failed writing " + path.string());
}

// Reads a selected.jsonl back, restoring the score fields from meta.
inline std::vector<ScoredDocument> read_scored_jsonl(const std::filesystem::path& path,
                                                     IngestSummary* summary = nullptr) {
  JsonlReader reader(path, "selected");
  std::vector<ScoredDocument> out;
  while (auto doc = reader.next()) {
    ScoredDocument s;
    auto take = [&](const char* key) -> std::optional<double> {
      auto it = doc->meta.find(key);
      if (it == doc->meta.end()) return std::nullopt;
      std::string v = it->second;
      doc->meta.erase(it);
      if (v == "null") return std::nullopt;
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        throw DataError(path.string() + ": document " + doc->id + " has a non-numeric " + key);
      }
    };
    const auto domain = take("domain_score");
    if (!domain) throw DataError(path.string() + ": document " + doc->id + " lacks domain_score");
    s.domain_score = *domain;
    s.quality_score = take("quality_score");
    s.document = std::move(*doc);
    out.push_back(std::move(s));
  }
  if (summary) *summary = reader.summary();
  return out;
}

}  // namespace domaug
