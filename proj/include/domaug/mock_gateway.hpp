#pragma once

// Offline stand-in for a chat model. Replies are a pure function of the
// prompt and the mock seed, and recognise the prompts this library sends:
//
//   passage prompt          a compliant tagged passage, one paragraph per input
//                           line plus a closing enlightenment paragraph
//   pairwise judge prompt   prefers the longer response (ties: Response 1)
//   rewrite judge prompt    Good when the rewrite keeps half the query's words
//   educational value       the heuristic rubric score
//
// Anything else gets an opaque deterministic string.

#include <array>
#include <cstdio>
#include <set>
#include <string>
#include <string_view>

#include "domaug/evaluation.hpp"
#include "domaug/gateway.hpp"
#include "domaug/quality.hpp"
#include "domaug/rng.hpp"
#include "domaug/synthesis.hpp"
#include "domaug/text.hpp"

namespace domaug {

class MockGateway final : public ModelGateway {
 public:
  explicit MockGateway(std::uint64_t seed = 0) : seed_(seed) {}

  std::string complete(const std::string& prompt, const GenerationParams&) override {
    const std::uint64_t h = mix64(seed_, text::fnv1a64(prompt));
    if (prompt.find(kGuidelineHeading) != std::string::npos) return passage(prompt, h);
    if (prompt.find(kJudgeMarker) != std::string::npos) return judge(prompt);
    if (prompt.find(kRewriteJudgeMarker) != std::string::npos) return rewrite_verdict(prompt);
    if (prompt.starts_with("Rate the educational value")) {
      const auto at = prompt.find("\nText:\n");
      const double s = HeuristicQualityScorer().score(
          at == std::string::npos ? std::string_view() : std::string_view(prompt).substr(at + 7));
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.2f", s);
      return buf;
    }
    return "mock reply " + text::hex64(h);
  }

 private:
  static std::string between(std::string_view s, std::string_view open, std::string_view close) {
    const auto a = s.find(open);
    if (a == std::string_view::npos) return {};
    const auto b = s.find(close, a + open.size());
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(a + open.size(), b - a - open.size()));
  }

  static std::string judge(std::string_view prompt) {
    const auto r1 = between(prompt, "[The Start of Response 1]\n", "\n[The End of Response 1]");
    const auto r2 = between(prompt, "[The Start of Response 2]\n", "\n[The End of Response 2]");
    return r2.size() > r1.size() ? "Response 2" : "Response 1";
  }

  static std::string rewrite_verdict(std::string_view prompt) {
    const auto query = between(prompt, "Original query: ", "\n");
    const auto rewrite = between(prompt, "Rewrite: ", "\n");
    const auto q = text::lower_tokens(query);
    const auto r = text::lower_tokens(rewrite);
    const std::set<std::string> qs(q.begin(), q.end()), rs(r.begin(), r.end());
    std::size_t shared = 0;
    for (const auto& w : qs) shared += rs.count(w);
    return !qs.empty() && 2 * shared >= qs.size() ? "Good" : "Bad";
  }

  static std::string excerpt(std::string_view s, std::size_t max_words) {
    const auto words = text::split_whitespace(s);
    std::string out;
    for (std::size_t i = 0; i < words.size() && i < max_words; ++i) {
      if (i) out += ' ';
      out += words[i];
    }
    if (words.size() > max_words) out += " ...";
    return out;
  }

  static std::string passage(std::string_view prompt, std::uint64_t h) {
    static constexpr std::array<std::string_view, 3> kOpen = {"For the ", "In the ", "Turning to the "};
    static constexpr std::array<std::string_view, 3> kMethod = {
        "A careful answer restates what is being asked, works through the relevant facts one step at a time, "
        "and checks the result against the original question before stating it explicitly.",
        "The reasoning starts from the key details in the input, rules out answers that ignore them, and "
        "settles on the option that is consistent with every stated constraint.",
        "The most reliable approach is to identify the quantity or judgement the task wants, connect it to "
        "the evidence in the problem, and then state the answer together with a short justification."};

    std::vector<std::string> tasks;
    std::string body;
    const auto input = prompt.find("#### Input:");
    std::size_t pos = input == std::string_view::npos ? prompt.size() : input;
    SplitMix64 rng(h);
    while (pos < prompt.size()) {
      auto nl = prompt.find('\n', pos);
      if (nl == std::string_view::npos) nl = prompt.size();
      const auto line = prompt.substr(pos, nl - pos);
      pos = nl + 1;
      if (!line.starts_with("- ")) continue;
      const auto colon = line.find(": ");
      if (colon == std::string_view::npos) continue;
      const std::string task(line.substr(2, colon - 2));
      tasks.push_back(task);
      body += kOpen[rng.below(kOpen.size())];
      body += task + " task, the problem is \"" + excerpt(line.substr(colon + 2), 30) + "\". ";
      body += kMethod[rng.below(kMethod.size())];
      body += "\n\n";
    }
    std::string list;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (i) list += i + 1 == tasks.size() ? " and " : ", ";
      list += tasks[i];
    }
    body += "In conclusion, the key points across " + list +
            " share one habit: read the input closely and tie every claim back to it. Each task also has its own "
            "trick, from choosing the right wording to checking the final answer against the stated constraints.";
    return "<Passage>\n" + body + "\n</Passage>";
  }

  std::uint64_t seed_;
};

}  // namespace domaug
