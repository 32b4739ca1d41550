#pragma once

// ROC AUC, position-swapped pairwise win rate, and query-rewrite density and
// diversity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "domaug/error.hpp"
#include "domaug/gateway.hpp"
#include "domaug/parallel.hpp"
#include "domaug/text.hpp"

namespace domaug {

struct LabeledScore {
  double score = 0.0;
  bool positive = false;
};

// Mann-Whitney AUC by rank sum. Tied groups get their average rank; ranks are
// kept doubled so every intermediate value is an exact integer.
inline double compute_auc(std::span<const LabeledScore> items) {
  std::vector<LabeledScore> sorted(items.begin(), items.end());
  std::uint64_t pos = 0;
  for (const auto& it : sorted) {
    if (!std::isfinite(it.score)) throw DataError("AUC input contains a non-finite score");
    pos += it.positive;
  }
  const std::uint64_t neg = sorted.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("AUC needs at least one positive and one negative");
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });

  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::uint64_t group_pos = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) group_pos += sorted[j++].positive;
    // Ranks i+1..j averaged, doubled: (i+1) + j.
    doubled_rank_sum += group_pos * (static_cast<std::uint64_t>(i) + 1 + j);
    i = j;
  }
  // 2U = 2R - P(P+1); AUC = U / (P N).
  const std::uint64_t doubled_u = doubled_rank_sum - pos * (pos + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

inline bool parse_binary_label(const nlohmann::json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) {
    const double d = v.get<double>();
    if (d == 1.0) return true;
    if (d == 0.0) return false;
  }
  if (v.is_string()) {
    const auto s = text::to_lower(v.get<std::string>());
    if (s == "1" || s == "pos" || s == "positive" || s == "true") return true;
    if (s == "0" || s == "neg" || s == "negative" || s == "false") return false;
  }
  throw DataError(where + ": label must be 0/1, true/false or positive/negative");
}

namespace detail {

template <class Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError(where + ": not a JSON object");
    fn(j, where);
  }
}

inline std::string required_string(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) throw DataError(where + ": missing string field \"" + key + "\"");
  return j[key].get<std::string>();
}

}  // namespace detail

inline std::vector<LabeledScore> read_predictions(const std::filesystem::path& path) {
  std::vector<LabeledScore> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& j, const std::string& where) {
    if (!j.contains("score") || !j["score"].is_number()) throw DataError(where + ": missing numeric \"score\"");
    if (!j.contains("label")) throw DataError(where + ": missing \"label\"");
    out.push_back({j["score"].get<double>(), parse_binary_label(j["label"], where)});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise judging.

struct JudgeCase {
  std::string instruction;
  std::string response_a;  // system under test
  std::string response_b;  // baseline
  std::string task;
};

inline std::vector<JudgeCase> read_judge_cases(const std::filesystem::path& path) {
  std::vector<JudgeCase> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& j, const std::string& where) {
    JudgeCase c{detail::required_string(j, "instruction", where), detail::required_string(j, "response_a", where),
                detail::required_string(j, "response_b", where),
                j.contains("task") && j["task"].is_string() ? j["task"].get<std::string>() : "default"};
    if (c.response_a.empty() || c.response_b.empty()) throw DataError(where + ": empty response");
    out.push_back(std::move(c));
  });
  return out;
}

inline constexpr std::string_view kJudgeMarker = "[The Start of Response 1]";

inline constexpr std::string_view kDefaultJudgeTemplate =
    "Please act as an impartial judge and choose the better answer from the two responses to the instruction "
    "below. Judge helpfulness, correctness and relevance. Reply with exactly \"Response 1\" or \"Response 2\".\n"
    "\n"
    "[Instruction]\n"
    "{instruction}\n"
    "\n"
    "[The Start of Response 1]\n"
    "{response_1}\n"
    "[The End of Response 1]\n"
    "\n"
    "[The Start of Response 2]\n"
    "{response_2}\n"
    "[The End of Response 2]\n";

// Single pass over the template, so placeholder text inside a response is
// left alone.
inline std::string render_judge_prompt(std::string_view tmpl, std::string_view instruction, std::string_view first,
                                       std::string_view second) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto brace = tmpl.find('{', pos);
    if (brace == std::string_view::npos) break;
    out.append(tmpl.substr(pos, brace - pos));
    const auto rest = tmpl.substr(brace);
    if (rest.starts_with("{instruction}")) {
      out.append(instruction);
      pos = brace + 13;
    } else if (rest.starts_with("{response_1}")) {
      out.append(first);
      pos = brace + 12;
    } else if (rest.starts_with("{response_2}")) {
      out.append(second);
      pos = brace + 12;
    } else {
      out += '{';
      pos = brace + 1;
    }
  }
  if (pos < tmpl.size()) out.append(tmpl.substr(pos));
  return out;
}

// 1 or 2 for the preferred position; nullopt when the reply names neither or
// both.
inline std::optional<int> parse_verdict(std::string_view reply) {
  const auto t = text::trim(reply);
  if (!t.empty() && (t[0] == '1' || t[0] == '2') && (t.size() == 1 || !(t[1] >= '0' && t[1] <= '9')))
    return t[0] - '0';
  const std::string lower = text::to_lower(t);
  const bool one = lower.find("response 1") != std::string::npos;
  const bool two = lower.find("response 2") != std::string::npos;
  if (one != two) return one ? 1 : 2;
  return std::nullopt;
}

struct JudgeOptions {
  std::string prompt_template = std::string(kDefaultJudgeTemplate);
  GenerationParams params{"gpt-3.5-turbo", 0.0, 16, std::nullopt};
  int max_attempts = 3;  // per ordering, for unparsable verdicts
  std::size_t max_in_flight = 4;
};

enum class CaseOutcome { win, loss, disagreement, abstain };

inline std::string_view to_string(CaseOutcome o) {
  switch (o) {
    case CaseOutcome::win: return "win";
    case CaseOutcome::loss: return "loss";
    case CaseOutcome::disagreement: return "disagreement";
    case CaseOutcome::abstain: return "abstain";
  }
  return "?";
}

struct RoundVerdict {
  std::vector<std::string> replies;
  std::optional<int> preferred;  // position 1 or 2
  std::string error;
};

struct CaseVerdict {
  std::string task;
  RoundVerdict a_first;  // A shown as Response 1
  RoundVerdict b_first;  // B shown as Response 1
  CaseOutcome outcome = CaseOutcome::abstain;
};

struct WinRateTally {
  std::uint64_t cases = 0, wins = 0, losses = 0, disagreements = 0, abstentions = 0;

  std::optional<double> win_rate() const {
    const auto judged = wins + losses + disagreements;
    if (judged == 0) return std::nullopt;
    return (static_cast<double>(wins) + 0.5 * static_cast<double>(disagreements)) / static_cast<double>(judged);
  }
  void add(CaseOutcome o) {
    ++cases;
    switch (o) {
      case CaseOutcome::win: ++wins; break;
      case CaseOutcome::loss: ++losses; break;
      case CaseOutcome::disagreement: ++disagreements; break;
      case CaseOutcome::abstain: ++abstentions; break;
    }
  }
};

struct WinRateReport {
  WinRateTally overall;
  std::map<std::string, WinRateTally> per_task;
  std::vector<CaseVerdict> verdicts;  // case order
};

namespace detail {

inline RoundVerdict judge_round(ModelGateway& gateway, const std::string& prompt, const JudgeOptions& opts) {
  RoundVerdict r;
  for (int attempt = 0; attempt < std::max(1, opts.max_attempts); ++attempt) {
    std::string reply;
    try {
      reply = gateway.complete(prompt, opts.params);
    } catch (const GatewayError& e) {
      r.error = e.what();
      return r;
    }
    r.preferred = parse_verdict(reply);
    r.replies.push_back(std::move(reply));
    if (r.preferred) return r;
  }
  r.error = "unparsable verdict";
  return r;
}

}  // namespace detail

// Each case is judged with A first and with B first. A case is a win if A is
// preferred both times, a loss if B is, and counts 0.5 when the orderings
// disagree. An unusable verdict in either ordering makes the case an
// abstention, which is excluded from the denominator.
inline WinRateReport judge_winrate(ModelGateway& gateway, std::span<const JudgeCase> cases,
                                   const JudgeOptions& opts = {}) {
  WinRateReport report;
  report.verdicts.resize(cases.size());
  parallel_for(cases.size() * 2, std::max<std::size_t>(1, opts.max_in_flight), [&](std::size_t job) {
    const auto& c = cases[job / 2];
    auto& v = report.verdicts[job / 2];
    if (job % 2 == 0) {
      v.a_first = detail::judge_round(
          gateway, render_judge_prompt(opts.prompt_template, c.instruction, c.response_a, c.response_b), opts);
    } else {
      v.b_first = detail::judge_round(
          gateway, render_judge_prompt(opts.prompt_template, c.instruction, c.response_b, c.response_a), opts);
    }
  });
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto& v = report.verdicts[i];
    v.task = cases[i].task;
    if (!v.a_first.preferred || !v.b_first.preferred) {
      v.outcome = CaseOutcome::abstain;
    } else {
      const bool a1 = *v.a_first.preferred == 1;
      const bool a2 = *v.b_first.preferred == 2;
      v.outcome = a1 && a2 ? CaseOutcome::win : !a1 && !a2 ? CaseOutcome::loss : CaseOutcome::disagreement;
    }
    report.overall.add(v.outcome);
    report.per_task[v.task].add(v.outcome);
  }
  return report;
}

inline nlohmann::json to_json(const WinRateTally& t) {
  const auto rate = t.win_rate();
  return {{"cases", t.cases},
          {"wins", t.wins},
          {"losses", t.losses},
          {"disagreements", t.disagreements},
          {"abstentions", t.abstentions},
          {"win_rate", rate ? nlohmann::json(*rate) : nlohmann::json(nullptr)}};
}

inline nlohmann::json to_json(const WinRateReport& r) {
  nlohmann::json per_task = nlohmann::json::object();
  for (const auto& [task, t] : r.per_task) per_task[task] = to_json(t);
  auto round = [](const RoundVerdict& v) {
    return nlohmann::json{{"replies", v.replies},
                          {"preferred", v.preferred ? nlohmann::json(*v.preferred) : nlohmann::json(nullptr)},
                          {"error", v.error}};
  };
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : r.verdicts)
    verdicts.push_back({{"task", v.task},
                        {"outcome", to_string(v.outcome)},
                        {"a_first", round(v.a_first)},
                        {"b_first", round(v.b_first)}});
  return {{"overall", to_json(r.overall)},
          {"per_task", per_task},
          {"convention", "disagreeing orderings score 0.5; abstentions excluded from the denominator"},
          {"verdicts", verdicts}};
}

// ---------------------------------------------------------------------------
// Query rewrites.

inline constexpr std::size_t kRewritesPerQuery = 10;

struct RewriteSet {
  std::string query;
  std::vector<std::string> rewrites;
  std::vector<bool> good_flags;  // empty until judged

  void validate(const std::string& where = "rewrite set") const {
    if (rewrites.size() != kRewritesPerQuery)
      throw DataError(where + ": expected exactly 10 rewrites, got " + std::to_string(rewrites.size()));
    if (!good_flags.empty() && good_flags.size() != kRewritesPerQuery)
      throw DataError(where + ": expected 10 good flags, got " + std::to_string(good_flags.size()));
  }
};

inline std::vector<RewriteSet> read_rewrite_sets(const std::filesystem::path& path) {
  std::vector<RewriteSet> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& j, const std::string& where) {
    RewriteSet s;
    s.query = detail::required_string(j, "query", where);
    if (!j.contains("rewrites") || !j["rewrites"].is_array()) throw DataError(where + ": missing array \"rewrites\"");
    for (const auto& r : j["rewrites"]) {
      if (!r.is_string()) throw DataError(where + ": rewrites must be strings");
      s.rewrites.push_back(r.get<std::string>());
    }
    if (j.contains("good")) {
      if (!j["good"].is_array()) throw DataError(where + ": \"good\" must be an array of booleans");
      for (const auto& g : j["good"]) {
        if (!g.is_boolean()) throw DataError(where + ": \"good\" must be an array of booleans");
        s.good_flags.push_back(g.get<bool>());
      }
    }
    s.validate(where);
    out.push_back(std::move(s));
  });
  return out;
}

inline constexpr std::string_view kRewriteJudgeMarker = "Does this rewrite preserve the search intent";

inline std::string rewrite_judge_prompt(std::string_view query, std::string_view rewrite) {
  std::string p(kRewriteJudgeMarker);
  p += " of the original query? Answer Good or Bad.\n\nOriginal query: ";
  p += query;
  p += "\nRewrite: ";
  p += rewrite;
  p += '\n';
  return p;
}

inline std::optional<bool> parse_good_bad(std::string_view reply) {
  const std::string lower = text::to_lower(reply);
  const bool good = lower.find("good") != std::string::npos;
  const bool bad = lower.find("bad") != std::string::npos;
  if (good != bad) return good;
  return std::nullopt;
}

struct RewriteJudgeReport {
  std::uint64_t judged = 0;
  std::uint64_t unresolved = 0;  // counted as Bad
  std::vector<std::vector<std::string>> replies;  // per set, per rewrite
};

// Fills good_flags for every set. Verdicts that stay unparsable, or gateway
// failures, are recorded as Bad and counted.
inline RewriteJudgeReport judge_rewrites(ModelGateway& gateway, std::vector<RewriteSet>& sets,
                                         GenerationParams params = {"gpt-3.5-turbo", 0.0, 8, std::nullopt},
                                         int max_attempts = 3, std::size_t max_in_flight = 4) {
  RewriteJudgeReport report;
  report.replies.assign(sets.size(), std::vector<std::string>(kRewritesPerQuery));
  std::vector<std::vector<char>> flags(sets.size(), std::vector<char>(kRewritesPerQuery, 0));
  std::vector<std::vector<char>> resolved(sets.size(), std::vector<char>(kRewritesPerQuery, 0));
  for (const auto& s : sets) s.validate();
  parallel_for(sets.size() * kRewritesPerQuery, std::max<std::size_t>(1, max_in_flight), [&](std::size_t job) {
    const auto si = job / kRewritesPerQuery, ri = job % kRewritesPerQuery;
    const auto prompt = rewrite_judge_prompt(sets[si].query, sets[si].rewrites[ri]);
    for (int a = 0; a < std::max(1, max_attempts); ++a) {
      try {
        auto reply = gateway.complete(prompt, params);
        auto v = parse_good_bad(reply);
        report.replies[si][ri] = std::move(reply);
        if (v) {
          flags[si][ri] = *v;
          resolved[si][ri] = 1;
          return;
        }
      } catch (const GatewayError& e) {
        report.replies[si][ri] = std::string("error: ") + e.what();
        return;
      }
    }
  });
  for (std::size_t si = 0; si < sets.size(); ++si) {
    sets[si].good_flags.assign(kRewritesPerQuery, false);
    for (std::size_t ri = 0; ri < kRewritesPerQuery; ++ri) {
      sets[si].good_flags[ri] = flags[si][ri] != 0;
      ++report.judged;
      if (!resolved[si][ri]) ++report.unresolved;
    }
  }
  return report;
}

// Mean number of Good rewrites per query.
inline double compute_density(std::span<const RewriteSet> sets) {
  if (sets.empty()) return 0.0;
  std::uint64_t good = 0;
  for (const auto& s : sets) {
    if (s.good_flags.size() != kRewritesPerQuery) throw DataError("rewrite set for \"" + s.query + "\" is not judged");
    good += static_cast<std::uint64_t>(std::count(s.good_flags.begin(), s.good_flags.end(), true));
  }
  return static_cast<double>(good) / static_cast<double>(sets.size());
}

using SparseVector = std::map<std::string, double>;
using Embedder = std::function<SparseVector(std::string_view)>;

// Character-trigram term frequencies over lowercased code points, with runs of
// whitespace collapsed and one space of padding on each side.
inline SparseVector trigram_embedding(std::string_view s) {
  std::vector<char32_t> cps{U' '};
  bool last_space = true;
  for (std::size_t pos = 0; pos < s.size();) {
    const char32_t cp = text::to_lower(text::decode_utf8(s, pos));
    if (text::is_space(cp)) {
      if (!last_space) cps.push_back(U' ');
      last_space = true;
    } else {
      cps.push_back(cp);
      last_space = false;
    }
  }
  if (!last_space) cps.push_back(U' ');
  SparseVector v;
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < 3; ++k) text::append_utf8(key, cps[i + k]);
    v[key] += 1.0;
  }
  return v;
}

inline double cosine(const SparseVector& a, const SparseVector& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [k, x] : a) na += x * x;
  for (const auto& [k, y] : b) nb += y * y;
  if (na == 0 || nb == 0) return 0.0;
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  for (const auto& [k, x] : small) {
    auto it = large.find(k);
    if (it != large.end()) dot += x * it->second;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Greedy leader clustering: each item joins the first cluster whose leader is
// at least `threshold` similar, otherwise it leads a new cluster. Returns the
// cluster index of every item.
inline std::vector<std::size_t> leader_clusters(std::span<const std::string> items, const Embedder& embed,
                                                double threshold) {
  std::vector<SparseVector> leaders;
  std::vector<std::size_t> out;
  for (const auto& item : items) {
    auto v = embed(item);
    std::size_t c = 0;
    while (c < leaders.size() && cosine(leaders[c], v) < threshold) ++c;
    if (c == leaders.size()) leaders.push_back(std::move(v));
    out.push_back(c);
  }
  return out;
}

inline std::size_t cluster_count(std::span<const std::string> items, const Embedder& embed, double threshold) {
  const auto ids = leader_clusters(items, embed, threshold);
  return ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
}

// Mean cluster count per query over all of its rewrites.
inline double compute_diversity(std::span<const RewriteSet> sets, const Embedder& embed = trigram_embedding,
                                double threshold = 0.8) {
  if (sets.empty()) return 0.0;
  std::uint64_t total = 0;
  for (const auto& s : sets) total += cluster_count(s.rewrites, embed, threshold);
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

}  // namespace domaug
