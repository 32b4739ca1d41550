#pragma once

// Educational-value scorers on a 0-5 scale.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>

#include "domaug/error.hpp"
#include "domaug/gateway.hpp"
#include "domaug/text.hpp"

namespace domaug {

class QualityScorer {
 public:
  virtual ~QualityScorer() = default;
  // Finite, >= 0, deterministic for a fixed configuration. May throw.
  virtual double score(std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

// Dependency-free rubric. Four additive signals, clamped to [0, 5]:
//
//   sentences    up to 1.5  words per terminal punctuation mark (. ! ?):
//                           1.5 if >= 2 sentences averaging 8..35 words,
//                           0.75 if the average is 5..50, else 0; only
//                           counted when function words make up >= 0.15
//                           of the text (menus and keyword lists are not prose)
//   stopwords    up to 1.0  share of function words: 1.0 in [0.25, 0.60],
//                           0.5 in [0.15, 0.25) or (0.60, 0.70], else 0
//   connectives  up to 1.5  0.25 per distinct explanatory word present
//                           (because, therefore, thus, ...)
//   clean        up to 1.0  1.0 with no boilerplate markers, 0.5 with one,
//                           0 with two or more
//
// Penalties: texts of 20+ words whose distinct/total word ratio is below 0.3
// lose 1.0 (repetition spam); texts under 10 words are capped at 1.0.
class HeuristicQualityScorer final : public QualityScorer {
 public:
  struct Breakdown {
    double sentences = 0, stopwords = 0, connectives = 0, clean = 0, penalty = 0, total = 0;
    std::size_t words = 0, sentence_marks = 0, stopword_count = 0, distinct_connectives = 0,
                boilerplate_markers = 0, distinct_words = 0;
  };

  double score(std::string_view text) const override { return breakdown(text).total; }
  std::string name() const override { return "heuristic"; }

  static Breakdown breakdown(std::string_view raw) {
    Breakdown b;
    const std::string lowered = text::to_lower(raw);
    const auto tokens = text::split_whitespace(lowered);
    b.words = tokens.size();
    if (b.words == 0) return b;

    std::unordered_set<std::string> distinct, connectives;
    for (auto tok : tokens) {
      const std::string_view core = strip_punct(tok);
      if (ends_sentence(tok)) ++b.sentence_marks;
      if (core.empty()) continue;
      distinct.emplace(core);
      if (is_stopword(core)) ++b.stopword_count;
      if (is_connective(core)) connectives.emplace(core);
    }
    b.distinct_words = distinct.size();
    b.distinct_connectives = connectives.size();

    const double ratio = static_cast<double>(b.stopword_count) / static_cast<double>(b.words);
    if (b.sentence_marks > 0 && ratio >= 0.15) {
      const double avg = static_cast<double>(b.words) / static_cast<double>(b.sentence_marks);
      if (b.sentence_marks >= 2 && avg >= 8 && avg <= 35) b.sentences = 1.5;
      else if (avg >= 5 && avg <= 50) b.sentences = 0.75;
    }
    if (ratio >= 0.25 && ratio <= 0.60) b.stopwords = 1.0;
    else if ((ratio >= 0.15 && ratio < 0.25) || (ratio > 0.60 && ratio <= 0.70)) b.stopwords = 0.5;
    b.connectives = std::min(1.5, 0.25 * static_cast<double>(b.distinct_connectives));

    const std::string spaced = " " + join(tokens) + " ";
    for (std::string_view marker : kBoilerplate)
      if (spaced.find(marker) != std::string::npos) ++b.boilerplate_markers;
    b.clean = b.boilerplate_markers == 0 ? 1.0 : b.boilerplate_markers == 1 ? 0.5 : 0.0;

    if (b.words >= 20 &&
        static_cast<double>(b.distinct_words) / static_cast<double>(b.words) < 0.3)
      b.penalty = 1.0;
    double total = b.sentences + b.stopwords + b.connectives + b.clean - b.penalty;
    if (b.words < 10) total = std::min(total, 1.0);
    b.total = std::clamp(total, 0.0, 5.0);
    return b;
  }

 private:
  static constexpr std::array<std::string_view, 60> kStopwords = {
      "a",     "an",    "the",  "and",   "or",    "but",   "of",    "to",   "in",   "on",
      "at",    "by",    "for",  "with",  "from",  "as",    "is",    "are",  "was",  "were",
      "be",    "been",  "it",   "its",   "this",  "that",  "these", "those", "we",  "you",
      "they",  "he",    "she",  "i",     "not",   "no",    "can",   "will", "would", "should",
      "has",   "have",  "had",  "do",    "does",  "did",   "if",    "then", "so",   "than",
      "which", "what",  "how",  "when",  "where", "who",   "each",  "our",  "their", "into"};

  static constexpr std::array<std::string_view, 24> kConnectives = {
      "because", "therefore", "thus",    "hence",   "since",    "consequently",
      "first",   "second",    "finally", "means",   "example",  "explain",
      "explains", "reason",   "step",    "solve",   "solving",  "equals",
      "result",  "consider",  "why",     "implies", "suppose",  "substitute"};

  // Matched against the lowercased text with single spaces and padding.
  static constexpr std::array<std::string_view, 22> kBoilerplate = {
      " click here ", " buy now ",       " add to cart ",   " free shipping ",
      " shop now ",   " sign in ",       " log in ",        " sign up ",
      " privacy policy ", " terms of use ", " all rights reserved ", " cookie",
      " subscribe ",  " contact us ",    " skip to content ", " best price ",
      " limited time ", " order now ",   " | ",             " » ",
      " © ",          "% off "};

  static bool is_stopword(std::string_view w) {
    return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
  }
  static bool is_connective(std::string_view w) {
    return std::find(kConnectives.begin(), kConnectives.end(), w) != kConnectives.end();
  }

  static bool is_punct(char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' ||
           c == '\'' || c == '(' || c == ')' || c == '[' || c == ']';
  }

  static std::string_view strip_punct(std::string_view w) {
    while (!w.empty() && is_punct(w.front())) w.remove_prefix(1);
    while (!w.empty() && is_punct(w.back())) w.remove_suffix(1);
    return w;
  }

  static bool ends_sentence(std::string_view w) {
    while (!w.empty() && (w.back() == '"' || w.back() == '\'' || w.back() == ')')) w.remove_suffix(1);
    return !w.empty() && (w.back() == '.' || w.back() == '!' || w.back() == '?');
  }

  static std::string join(const std::vector<std::string_view>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) out += ' ';
      out += toks[i];
    }
    return out;
  }
};

inline std::string educational_value_prompt(std::string_view text) {
  std::string p =
      "Rate the educational value of the following web text on a scale from 0 to 5, as if it "
      "were used to teach a student in the subject it covers.\n"
      "0: no educational value (spam, navigation menus, advertisements, boilerplate).\n"
      "1: minimal value; a few facts buried in promotional or fragmented text.\n"
      "2: some useful information, but poorly organised or incomplete.\n"
      "3: coherent and informative, comparable to a reasonable web article.\n"
      "4: clear explanations with reasoning, close to textbook quality.\n"
      "5: outstanding textbook-quality material with worked reasoning.\n"
      "Reply with only the number.\n\n"
      "Text:\n";
  p += text;
  return p;
}

// Parses the first decimal number in a reply; nullopt if none.
inline std::optional<double> parse_first_number(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    if (!(reply[i] >= '0' && reply[i] <= '9')) continue;
    std::size_t j = i;
    while (j < reply.size() && ((reply[j] >= '0' && reply[j] <= '9') || reply[j] == '.')) ++j;
    const std::string num(reply.substr(i, j - i));
    char* end = nullptr;
    const double v = std::strtod(num.c_str(), &end);
    if (end != num.c_str()) return v;
  }
  return std::nullopt;
}

// Prompts a chat model with the 0-5 rubric and parses the numeric reply.
class GatewayQualityScorer final : public QualityScorer {
 public:
  GatewayQualityScorer(std::shared_ptr<ModelGateway> gateway, GenerationParams params = {})
      : gateway_(std::move(gateway)), params_(std::move(params)) {
    params_.temperature = 0.0;
  }

  double score(std::string_view text) const override {
    const std::string reply = gateway_->complete(educational_value_prompt(text), params_);
    const auto v = parse_first_number(reply);
    if (!v || !std::isfinite(*v) || *v < 0.0 || *v > 5.0)
      throw DataError("unparsable educational-value reply: " + reply.substr(0, 80));
    return *v;
  }
  std::string name() const override { return "gateway"; }

 private:
  std::shared_ptr<ModelGateway> gateway_;
  GenerationParams params_;
};

}  // namespace domaug
