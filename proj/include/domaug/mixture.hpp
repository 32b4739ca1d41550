#pragma once

// Two-stage continual pre-training manifest and learning-rate schedules.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "domaug/corpus.hpp"
#include "domaug/error.hpp"
#include "domaug/rng.hpp"

namespace domaug {

struct ScheduleConfig {
  std::int64_t total_steps = 1000;
  double max_lr = 2e-5;
  double warmup_frac = 0.03;
  double decay_frac = 0.10;
  double decay_floor_ratio = 0.10;

  void validate() const {
    if (total_steps <= 0) throw UsageError("schedule.total_steps must be positive");
    if (!(max_lr > 0)) throw UsageError("schedule.max_lr must be positive");
    if (!(warmup_frac > 0)) throw UsageError("schedule.warmup_frac must be positive");
    if (!(decay_frac > 0)) throw UsageError("schedule.decay_frac must be positive");
    if (!(warmup_frac + decay_frac < 1)) throw UsageError("schedule.warmup_frac + decay_frac must be below 1");
    if (!(decay_floor_ratio > 0 && decay_floor_ratio <= 1))
      throw UsageError("schedule.decay_floor_ratio must be in (0, 1]");
  }

  std::int64_t warmup_steps() const { return std::llround(warmup_frac * static_cast<double>(total_steps)); }
  std::int64_t decay_start() const {
    return total_steps - std::llround(decay_frac * static_cast<double>(total_steps));
  }
};

namespace detail {
inline void check_step(std::int64_t step, std::int64_t total) {
  if (step < 0 || step >= total)
    throw UsageError("step " + std::to_string(step) + " outside [0, " + std::to_string(total) + ")");
}
}  // namespace detail

// Warmup-stable-decay. Linear warmup to max_lr over W steps, flat until D0,
// then exponential decay that reaches max_lr * decay_floor_ratio on the last
// step.
inline double wsd_lr(std::int64_t step, const ScheduleConfig& c) {
  c.validate();
  detail::check_step(step, c.total_steps);
  const auto w = c.warmup_steps();
  const auto d0 = c.decay_start();
  if (step < w) return c.max_lr * static_cast<double>(step + 1) / static_cast<double>(w);
  if (step < d0) return c.max_lr;
  const auto len = c.total_steps - d0;
  return c.max_lr * std::pow(c.decay_floor_ratio, static_cast<double>(step - d0 + 1) / static_cast<double>(len));
}

inline double cosine_lr(std::int64_t step, std::int64_t total, double max_lr = 5e-6, double warmup_frac = 0.03) {
  if (total <= 0) throw UsageError("total steps must be positive");
  if (!(max_lr > 0)) throw UsageError("max_lr must be positive");
  if (!(warmup_frac >= 0 && warmup_frac < 1)) throw UsageError("warmup_frac must be in [0, 1)");
  detail::check_step(step, total);
  const auto w = std::llround(warmup_frac * static_cast<double>(total));
  if (step < w) return max_lr * static_cast<double>(step + 1) / static_cast<double>(w);
  return max_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step - w) / static_cast<double>(total - w)));
}

enum class SourceOrigin { in_domain, selected, synthetic };

inline std::string_view to_string(SourceOrigin o) {
  switch (o) {
    case SourceOrigin::in_domain: return "in_domain";
    case SourceOrigin::selected: return "selected";
    case SourceOrigin::synthetic: return "synthetic";
  }
  return "?";
}

struct SourceInput {
  std::filesystem::path path;
  SourceOrigin origin = SourceOrigin::in_domain;
  CorpusStats stats;
  std::optional<std::uint64_t> budget_tokens;  // default: everything available
};

enum class Interleave { concatenate_shuffled, proportional_round_robin };

inline std::string_view to_string(Interleave i) {
  return i == Interleave::concatenate_shuffled ? "concatenate_shuffled" : "proportional_round_robin";
}

inline Interleave parse_interleave(std::string_view s) {
  if (s == "concatenate_shuffled") return Interleave::concatenate_shuffled;
  if (s == "proportional_round_robin") return Interleave::proportional_round_robin;
  throw UsageError("unknown interleave policy: " + std::string(s));
}

struct MixtureOptions {
  std::uint64_t batch_size_tokens = 1'048'576;
  Interleave interleave = Interleave::concatenate_shuffled;
  std::uint64_t seed = 0;
  ScheduleConfig schedule;
};

struct PlannedSource {
  std::string path;
  SourceOrigin origin;
  std::uint64_t docs = 0;
  std::uint64_t tokens = 0;  // budget
  std::uint64_t available_tokens = 0;
  std::uint64_t shards = 0;

  friend bool operator==(const PlannedSource&, const PlannedSource&) = default;
};

struct StagePlan {
  std::vector<PlannedSource> stage1, stage2;
  std::vector<std::string> stage1_order, stage2_order;  // shard references "path#k"
  MixtureOptions options;
  bool replay = false;
  std::string replay_note;

  std::uint64_t stage1_tokens() const {
    std::uint64_t t = 0;
    for (const auto& s : stage1) t += s.tokens;
    return t;
  }
  std::uint64_t stage2_tokens() const {
    std::uint64_t t = 0;
    for (const auto& s : stage2) t += s.tokens;
    return t;
  }
};

namespace detail {

inline PlannedSource plan_source(const SourceInput& in, std::uint64_t batch) {
  if (!std::filesystem::exists(in.path)) throw DataError("mixture source does not exist: " + in.path.string());
  PlannedSource p;
  p.path = in.path.generic_string();
  p.origin = in.origin;
  p.docs = in.stats.document_count;
  p.available_tokens = in.stats.token_count;
  p.tokens = in.budget_tokens.value_or(p.available_tokens);
  if (p.tokens > p.available_tokens)
    throw UsageError("budget of " + std::to_string(p.tokens) + " tokens for " + p.path + " exceeds the " +
                     std::to_string(p.available_tokens) + " available");
  p.shards = p.tokens == 0 ? 0 : (p.tokens + batch - 1) / batch;
  return p;
}

// Shards of each source are shuffled; sources are then either concatenated and
// shuffled together, or merged so each source advances in proportion to its
// shard count.
inline std::vector<std::string> order_shards(const std::vector<PlannedSource>& sources, Interleave policy,
                                             std::uint64_t seed, std::uint64_t stage) {
  SplitMix64 rng(mix64(seed, stage));
  std::vector<std::vector<std::string>> per_source;
  for (const auto& s : sources) {
    std::vector<std::string> refs;
    for (std::uint64_t k = 0; k < s.shards; ++k) refs.push_back(s.path + "#" + std::to_string(k));
    shuffle(std::span<std::string>(refs), rng);
    per_source.push_back(std::move(refs));
  }
  std::vector<std::string> out;
  if (policy == Interleave::concatenate_shuffled) {
    for (auto& refs : per_source) out.insert(out.end(), refs.begin(), refs.end());
    shuffle(std::span<std::string>(out), rng);
    return out;
  }
  // Pick the source furthest behind its proportional share; ties go to the
  // earlier source.
  std::uint64_t total = 0;
  for (const auto& refs : per_source) total += refs.size();
  std::vector<std::size_t> taken(per_source.size(), 0);
  for (std::uint64_t step = 0; step < total; ++step) {
    std::size_t best = per_source.size();
    double best_lag = 0;
    for (std::size_t i = 0; i < per_source.size(); ++i) {
      if (taken[i] == per_source[i].size()) continue;
      const double lag = static_cast<double>(step + 1) * static_cast<double>(per_source[i].size()) /
                             static_cast<double>(total) -
                         static_cast<double>(taken[i]);
      if (best == per_source.size() || lag > best_lag) {
        best = i;
        best_lag = lag;
      }
    }
    out.push_back(per_source[best][taken[best]++]);
  }
  return out;
}

}  // namespace detail

// Stage 1 trains on the in-domain corpus plus selected general-corpus data;
// stage 2 on synthetic passages. The selected source is optional.
inline StagePlan plan_two_stage(const SourceInput& in_domain, const std::optional<SourceInput>& selected,
                                const SourceInput& synthetic, const MixtureOptions& options = {}) {
  if (options.batch_size_tokens == 0) throw UsageError("mixture.batch_size_tokens must be positive");
  options.schedule.validate();
  StagePlan plan;
  plan.options = options;
  plan.stage1.push_back(detail::plan_source(in_domain, options.batch_size_tokens));
  if (selected) plan.stage1.push_back(detail::plan_source(*selected, options.batch_size_tokens));
  plan.stage2.push_back(detail::plan_source(synthetic, options.batch_size_tokens));
  for (const auto* stage : {&plan.stage1, &plan.stage2}) {
    std::uint64_t tokens = 0;
    for (const auto& s : *stage) tokens += s.tokens;
    if (tokens == 0)
      throw DataError(std::string(stage == &plan.stage1 ? "stage 1" : "stage 2") + " has no tokens");
  }
  plan.stage1_order = detail::order_shards(plan.stage1, options.interleave, options.seed, 1);
  plan.stage2_order = detail::order_shards(plan.stage2, options.interleave, options.seed, 2);

  std::string replayed;
  for (const auto& s : plan.stage1) {
    if (s.origin != SourceOrigin::selected || s.tokens == 0) continue;
    replayed += (replayed.empty() ? "" : ", ") + s.path;
  }
  plan.replay = !replayed.empty();
  plan.replay_note = plan.replay ? "stage 1 replays general-corpus data from: " + replayed : "no replay data";
  return plan;
}

inline nlohmann::json to_json(const PlannedSource& s) {
  return {{"path", s.path},       {"origin", to_string(s.origin)}, {"docs", s.docs},
          {"tokens", s.tokens},   {"available_tokens", s.available_tokens}, {"shards", s.shards}};
}

inline nlohmann::json manifest_json(const StagePlan& plan) {
  auto list = [](const std::vector<PlannedSource>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v) a.push_back(to_json(s));
    return a;
  };
  const auto& sc = plan.options.schedule;
  return {{"version", 1},
          {"stage1", list(plan.stage1)},
          {"stage2", list(plan.stage2)},
          {"stage1_tokens", plan.stage1_tokens()},
          {"stage2_tokens", plan.stage2_tokens()},
          {"batch_size_tokens", plan.options.batch_size_tokens},
          {"interleave", to_string(plan.options.interleave)},
          {"stage1_order", plan.stage1_order},
          {"stage2_order", plan.stage2_order},
          {"seed", plan.options.seed},
          {"schedule",
           {{"type", "wsd"},
            {"total_steps", sc.total_steps},
            {"max_lr", sc.max_lr},
            {"warmup_frac", sc.warmup_frac},
            {"decay_frac", sc.decay_frac},
            {"decay_floor_ratio", sc.decay_floor_ratio},
            {"warmup_steps", sc.warmup_steps()},
            {"decay_start_step", sc.decay_start()}}},
          {"replay", plan.replay},
          {"replay_note", plan.replay_note}};
}

inline void write_manifest(const std::filesystem::path& path, const StagePlan& plan) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest_json(plan).dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace domaug
