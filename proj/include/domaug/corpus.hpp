#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "domaug/error.hpp"
#include "domaug/text.hpp"

namespace domaug {

// Counts tokens for budgets and manifests. Swap in a subword counter to
// restate budgets in model tokens.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
};

class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override { return text::count_words(text); }
};

inline const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer instance;
  return instance;
}

inline std::size_t count_tokens(std::string_view text) { return text::count_words(text); }

struct Document {
  std::string id;
  std::string text;
  std::string source;
  std::uint64_t token_count = 0;
  std::map<std::string, std::string> meta;

  friend bool operator==(const Document&, const Document&) = default;
};

inline nlohmann::json to_json(const Document& doc) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : doc.meta) j[k] = v;
  j["id"] = doc.id;
  j["text"] = doc.text;
  j["source"] = doc.source;
  return j;
}

struct LineIssue {
  std::uint64_t line = 0;
  std::string reason;
};

struct IngestSummary {
  std::string path;
  std::uint64_t lines = 0;
  std::uint64_t documents = 0;
  std::uint64_t malformed = 0;
  std::uint64_t empty_text = 0;
  // First `kMaxIssues` problems, for error messages that name the line.
  std::vector<LineIssue> issues;

  static constexpr std::size_t kMaxIssues = 100;

  std::uint64_t skipped() const { return malformed + empty_text; }
};

inline nlohmann::json to_json(const IngestSummary& s) {
  nlohmann::json issues = nlohmann::json::array();
  for (const auto& i : s.issues) issues.push_back({{"line", i.line}, {"reason", i.reason}});
  return {{"path", s.path},         {"lines", s.lines},
          {"documents", s.documents}, {"skipped_malformed", s.malformed},
          {"skipped_empty_text", s.empty_text}, {"issues", std::move(issues)}};
}

enum class LineStatus { ok, blank, malformed, empty_text };

// Parses one JSONL record. "id" and "text" must be strings; "source"
// overrides `default_source`; other fields go to meta (non-strings as JSON).
inline LineStatus parse_document(std::string_view line, std::string_view default_source,
                                 const Tokenizer& tokenizer, Document& out,
                                 std::string& reason) {
  if (text::trim(line).empty()) return LineStatus::blank;
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    reason = "invalid JSON";
    return LineStatus::malformed;
  }
  if (!j.is_object()) {
    reason = "record is not a JSON object";
    return LineStatus::malformed;
  }
  auto id = j.find("id");
  if (id == j.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
    reason = "missing or empty string field \"id\"";
    return LineStatus::malformed;
  }
  auto txt = j.find("text");
  if (txt == j.end() || !txt->is_string()) {
    reason = "missing string field \"text\"";
    return LineStatus::malformed;
  }
  if (text::trim(txt->get_ref<const std::string&>()).empty()) {
    reason = "empty text";
    return LineStatus::empty_text;
  }
  Document doc;
  doc.id = id->get<std::string>();
  doc.text = txt->get<std::string>();
  doc.source = std::string(default_source);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "id" || it.key() == "text") continue;
    if (it.key() == "source" && it->is_string()) {
      doc.source = it->get<std::string>();
      continue;
    }
    doc.meta[it.key()] = it->is_string() ? it->get<std::string>() : it->dump();
  }
  doc.token_count = tokenizer.count(doc.text);
  out = std::move(doc);
  return LineStatus::ok;
}

// Sequential line-delimited JSON reader. Bad records are skipped and counted.
class JsonlReader {
 public:
  JsonlReader(const std::filesystem::path& path, std::string source_label,
              const Tokenizer& tokenizer = default_tokenizer())
      : in_(path, std::ios::binary), label_(std::move(source_label)), tokenizer_(&tokenizer) {
    if (!in_) throw DataError("cannot open input file: " + path.string());
    summary_.path = path.string();
  }

  std::optional<Document> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++summary_.lines;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      Document doc;
      std::string reason;
      switch (parse_document(line, label_, *tokenizer_, doc, reason)) {
        case LineStatus::ok:
          ++summary_.documents;
          return doc;
        case LineStatus::blank:
          break;
        case LineStatus::malformed:
          ++summary_.malformed;
          note(reason);
          break;
        case LineStatus::empty_text:
          ++summary_.empty_text;
          note(reason);
          break;
      }
    }
    if (in_.bad()) throw DataError("read error in " + summary_.path);
    return std::nullopt;
  }

  // Reads up to `max` documents into `out` (cleared first). Returns false at EOF
  // with nothing read.
  bool next_batch(std::vector<Document>& out, std::size_t max) {
    out.clear();
    while (out.size() < max) {
      auto doc = next();
      if (!doc) break;
      out.push_back(std::move(*doc));
    }
    return !out.empty();
  }

  const IngestSummary& summary() const { return summary_; }

 private:
  void note(const std::string& reason) {
    if (summary_.issues.size() < IngestSummary::kMaxIssues)
      summary_.issues.push_back({summary_.lines, reason});
  }

  std::ifstream in_;
  std::string label_;
  const Tokenizer* tokenizer_;
  IngestSummary summary_;
};

struct IngestResult {
  std::vector<Document> documents;
  IngestSummary summary;
};

inline IngestResult ingest(const std::filesystem::path& path, std::string source_label,
                           const Tokenizer& tokenizer = default_tokenizer()) {
  JsonlReader reader(path, std::move(source_label), tokenizer);
  IngestResult result;
  while (auto doc = reader.next()) result.documents.push_back(std::move(*doc));
  result.summary = reader.summary();
  return result;
}

struct SourceTotals {
  std::uint64_t docs = 0;
  std::uint64_t tokens = 0;

  friend bool operator==(const SourceTotals&, const SourceTotals&) = default;
};

struct CorpusStats {
  std::uint64_t document_count = 0;
  std::uint64_t token_count = 0;
  std::map<std::string, SourceTotals> per_source;

  void add(const Document& doc) {
    ++document_count;
    token_count += doc.token_count;
    auto& s = per_source[doc.source];
    ++s.docs;
    s.tokens += doc.token_count;
  }

  void merge(const CorpusStats& other) {
    document_count += other.document_count;
    token_count += other.token_count;
    for (const auto& [name, t] : other.per_source) {
      auto& s = per_source[name];
      s.docs += t.docs;
      s.tokens += t.tokens;
    }
  }

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

template <typename Range>
CorpusStats stats(const Range& docs) {
  CorpusStats s;
  for (const Document& d : docs) s.add(d);
  return s;
}

// Single pass over a file without holding documents in memory.
inline CorpusStats stats_of_file(const std::filesystem::path& path, std::string source_label,
                                 IngestSummary* summary = nullptr,
                                 const Tokenizer& tokenizer = default_tokenizer()) {
  JsonlReader reader(path, std::move(source_label), tokenizer);
  CorpusStats s;
  while (auto doc = reader.next()) s.add(*doc);
  if (summary) *summary = reader.summary();
  return s;
}

inline nlohmann::json to_json(const CorpusStats& s) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, t] : s.per_source) per[name] = {{"docs", t.docs}, {"tokens", t.tokens}};
  return {{"document_count", s.document_count},
          {"token_count", s.token_count},
          {"per_source", std::move(per)}};
}

inline void write_jsonl_line(std::ostream& out, const nlohmann::json& j) {
  out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

}  // namespace domaug
