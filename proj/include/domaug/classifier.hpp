#pragma once

// Binary in-domain / out-of-domain text classifier: averaged embeddings of
// in-vocabulary words and hashed word n-grams, followed by a 2-way softmax.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "domaug/corpus.hpp"
#include "domaug/error.hpp"
#include "domaug/parallel.hpp"
#include "domaug/rng.hpp"
#include "domaug/text.hpp"

namespace domaug {

struct ClassifierConfig {
  int dim = 256;
  double learning_rate = 0.1;
  int max_word_ngram = 3;
  int min_count = 3;
  int epochs = 3;
  std::uint32_t bucket_count = 2'000'000;
  std::uint64_t seed = 0;
  // >1 enables lock-free asynchronous updates; results are then not
  // bit-reproducible.
  int workers = 1;

  void validate() const {
    if (dim < 1) throw UsageError("classifier.dim must be >= 1");
    if (epochs < 1) throw UsageError("classifier.epochs must be >= 1");
    if (max_word_ngram < 1) throw UsageError("classifier.max_word_ngram must be >= 1");
    if (min_count < 1) throw UsageError("classifier.min_count must be >= 1");
    if (bucket_count < 1) throw UsageError("classifier.bucket_count must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw UsageError("classifier.learning_rate must be > 0");
    if (workers < 1) throw UsageError("classifier.workers must be >= 1");
  }

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  // Words are ordered by descending count, then bytewise ascending.
  Vocabulary(const std::unordered_map<std::string, std::uint64_t>& counts, int min_count,
             std::uint32_t bucket_count)
      : bucket_count_(bucket_count) {
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (const auto& [w, c] : counts)
      if (c >= static_cast<std::uint64_t>(min_count)) kept.emplace_back(w, c);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (auto& [w, c] : kept) push(std::move(w), c);
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(words_.size()); }
  std::uint32_t bucket_count() const { return bucket_count_; }
  const std::string& word(std::uint32_t i) const { return words_[i]; }
  std::uint64_t count(std::uint32_t i) const { return counts_[i]; }

  const std::uint32_t* find(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? nullptr : &it->second;
  }
  bool contains(const std::string& w) const { return find(w) != nullptr; }

  // Row of a hashed n-gram in the input embedding table.
  std::uint32_t ngram_row(std::string_view joined) const {
    return size() + text::fnv1a32(joined) % bucket_count_;
  }

 private:
  friend class ModelCodec;

  void push(std::string w, std::uint64_t c) {
    index_.emplace(w, size());
    words_.push_back(std::move(w));
    counts_.push_back(c);
  }

  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint32_t bucket_count_ = 1;
};

class VocabularyBuilder {
 public:
  void add(std::string_view text) {
    ++documents_;
    for (auto& tok : text::lower_tokens(text)) ++counts_[std::move(tok)];
  }
  std::uint64_t documents() const { return documents_; }

  Vocabulary build(const ClassifierConfig& config) const {
    if (documents_ == 0) throw UsageError("cannot build a vocabulary from an empty document stream");
    return Vocabulary(counts_, config.min_count, config.bucket_count);
  }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::uint64_t documents_ = 0;
};

template <typename DocRange>
Vocabulary build_vocabulary(const DocRange& docs, const ClassifierConfig& config) {
  VocabularyBuilder b;
  for (const Document& d : docs) b.add(d.text);
  return b.build(config);
}

// One index per in-vocabulary unigram (in order), then for n = 2..max_word_ngram
// one hashed index per n-gram position. N-grams span OOV tokens too.
inline std::vector<std::uint32_t> featurize(std::string_view text, const Vocabulary& vocab,
                                            int max_word_ngram) {
  const std::vector<std::string> tokens = text::lower_tokens(text);
  std::vector<std::uint32_t> out;
  out.reserve(tokens.size() * static_cast<std::size_t>(std::max(1, max_word_ngram)));
  for (const auto& t : tokens)
    if (const auto* idx = vocab.find(t)) out.push_back(*idx);
  std::string joined;
  for (int n = 2; n <= max_word_ngram; ++n) {
    const auto order = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      joined = tokens[i];
      for (std::size_t k = 1; k < order; ++k) {
        joined += ' ';
        joined += tokens[i + k];
      }
      out.push_back(vocab.ngram_row(joined));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss and gradients. Scalar-generic so the gradient check can run in double.

template <typename Real>
struct SoftmaxGradient {
  std::array<Real, 2> probs{};
  Real loss{};
  std::vector<Real> d_output;  // 2 x dim, row-major
  std::vector<Real> d_hidden;  // dim; each input row receives d_hidden / |features|
};

// Cross-entropy of softmax(output * hidden) against `label` (0 or 1).
template <typename Real>
void softmax_xent_backward(std::span<const Real> hidden, std::span<const Real> output, int label,
                           SoftmaxGradient<Real>& g) {
  const std::size_t dim = hidden.size();
  Real z0{}, z1{};
  for (std::size_t d = 0; d < dim; ++d) {
    z0 += output[d] * hidden[d];
    z1 += output[dim + d] * hidden[d];
  }
  // p0 = 1 / (1 + e^(z1 - z0)), evaluated without overflow.
  const Real diff = z1 - z0;
  Real p0;
  if (diff >= 0) {
    const Real e = std::exp(-diff);
    p0 = e / (1 + e);
  } else {
    p0 = 1 / (1 + std::exp(diff));
  }
  g.probs = {p0, 1 - p0};
  const Real margin = label == 0 ? diff : -diff;  // z_other - z_label
  g.loss = margin > 0 ? margin + std::log1p(std::exp(-margin)) : std::log1p(std::exp(margin));
  const Real r0 = g.probs[0] - (label == 0 ? 1 : 0);
  const Real r1 = g.probs[1] - (label == 1 ? 1 : 0);
  g.d_output.resize(2 * dim);
  g.d_hidden.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    g.d_output[d] = r0 * hidden[d];
    g.d_output[dim + d] = r1 * hidden[d];
    g.d_hidden[d] = r0 * output[d] + r1 * output[dim + d];
  }
}

// Full per-example loss for a dense model: rows is (num_rows x dim).
template <typename Real>
SoftmaxGradient<Real> example_gradient(std::span<const Real> rows, std::span<const Real> output,
                                       std::span<const std::uint32_t> features, int label,
                                       std::size_t dim) {
  std::vector<Real> hidden(dim, Real{});
  for (auto f : features)
    for (std::size_t d = 0; d < dim; ++d) hidden[d] += rows[f * dim + d];
  if (!features.empty())
    for (auto& h : hidden) h /= static_cast<Real>(features.size());
  SoftmaxGradient<Real> g;
  softmax_xent_backward<Real>(hidden, output, label, g);
  return g;
}

// ---------------------------------------------------------------------------

// Input embedding table of (word_count + bucket_count) rows. Word rows are
// dense; bucket rows are materialised on first update, otherwise they hold
// their seeded initial value, which is recomputed on demand.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::uint32_t word_count, std::uint32_t bucket_count, int dim, std::uint64_t seed)
      : dim_(static_cast<std::size_t>(dim)),
        word_count_(word_count),
        bucket_count_(bucket_count),
        seed_(seed),
        words_(static_cast<std::size_t>(word_count) * dim_) {
    for (std::uint32_t r = 0; r < word_count; ++r) init_row(r, words_.data() + r * dim_);
  }

  std::size_t dim() const { return dim_; }
  std::uint64_t rows() const { return std::uint64_t{word_count_} + bucket_count_; }
  std::uint32_t word_count() const { return word_count_; }

  void init_row(std::uint32_t row, float* out) const {
    const float bound = 1.0f / static_cast<float>(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
      const std::uint64_t bits = mix64(seed_, std::uint64_t{row} * dim_ + d);
      const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
      out[d] = static_cast<float>((2.0 * u - 1.0) * bound);
    }
  }

  // Materialises the listed bucket rows. Call before concurrent training.
  void materialize(std::span<const std::uint32_t> rows) {
    for (auto r : rows) {
      if (r < word_count_ || slots_.contains(r)) continue;
      const std::size_t slot = slots_.size();
      slots_.emplace(r, static_cast<std::uint32_t>(slot));
      buckets_.resize((slot + 1) * dim_);
      init_row(r, buckets_.data() + slot * dim_);
    }
  }

  float* mutable_row(std::uint32_t row) {
    if (row < word_count_) return words_.data() + std::size_t{row} * dim_;
    auto it = slots_.find(row);
    return it == slots_.end() ? nullptr : buckets_.data() + std::size_t{it->second} * dim_;
  }

  const float* stored_row(std::uint32_t row) const {
    return const_cast<EmbeddingTable*>(this)->mutable_row(row);
  }

  // acc += row
  void accumulate(std::uint32_t row, float* acc, float* scratch) const {
    const float* src = stored_row(row);
    if (!src) {
      init_row(row, scratch);
      src = scratch;
    }
    for (std::size_t d = 0; d < dim_; ++d) acc[d] += src[d];
  }

  std::vector<std::uint32_t> materialized_buckets() const {
    std::vector<std::uint32_t> out;
    out.reserve(slots_.size());
    for (const auto& [r, _] : slots_) out.push_back(r);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::span<const float> word_rows() const { return words_; }

  bool all_finite() const {
    auto finite = [](float x) { return std::isfinite(x); };
    return std::all_of(words_.begin(), words_.end(), finite) &&
           std::all_of(buckets_.begin(), buckets_.end(), finite);
  }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    if (a.dim_ != b.dim_ || a.word_count_ != b.word_count_ || a.bucket_count_ != b.bucket_count_ ||
        a.seed_ != b.seed_ || a.words_ != b.words_ || a.slots_.size() != b.slots_.size())
      return false;
    for (const auto& [r, slot] : a.slots_) {
      const float* other = b.stored_row(r);
      if (!other || std::memcmp(a.buckets_.data() + std::size_t{slot} * a.dim_, other,
                                a.dim_ * sizeof(float)) != 0)
        return false;
    }
    return true;
  }

 private:
  friend class ModelCodec;

  std::size_t dim_ = 0;
  std::uint32_t word_count_ = 0;
  std::uint32_t bucket_count_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<float> words_;
  std::unordered_map<std::uint32_t, std::uint32_t> slots_;
  std::vector<float> buckets_;
};

class TrainedClassifier {
 public:
  static constexpr std::array<std::string_view, 2> kLabels = {"in-domain", "out-of-domain"};

  TrainedClassifier() = default;
  TrainedClassifier(ClassifierConfig config, Vocabulary vocab, EmbeddingTable input,
                    std::vector<float> output)
      : config_(config), vocab_(std::move(vocab)), input_(std::move(input)), output_(std::move(output)) {}

  const ClassifierConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const EmbeddingTable& input() const { return input_; }
  EmbeddingTable& mutable_input() { return input_; }
  std::span<const float> output() const { return output_; }
  std::span<float> mutable_output() { return output_; }

  std::vector<std::uint32_t> featurize(std::string_view text) const {
    return domaug::featurize(text, vocab_, config_.max_word_ngram);
  }

  // {P(in-domain), P(out-of-domain)}. No features gives {0.5, 0.5}.
  std::array<double, 2> predict_features(std::span<const std::uint32_t> features) const {
    if (features.empty()) return {0.5, 0.5};
    const std::size_t dim = input_.dim();
    std::vector<float> acc(dim, 0.0f), scratch(dim);
    for (auto f : features) input_.accumulate(f, acc.data(), scratch.data());
    const double inv = 1.0 / static_cast<double>(features.size());
    double z0 = 0.0, z1 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double h = acc[d] * inv;
      z0 += output_[d] * h;
      z1 += output_[dim + d] * h;
    }
    const double diff = z1 - z0;
    double p0;
    if (diff >= 0) {
      const double e = std::exp(-diff);
      p0 = e / (1.0 + e);
    } else {
      p0 = 1.0 / (1.0 + std::exp(diff));
    }
    return {p0, 1.0 - p0};
  }

  std::array<double, 2> predict(std::string_view text) const {
    return predict_features(featurize(text));
  }

  // In-domain probability.
  double score(std::string_view text) const { return predict(text)[0]; }

  bool all_finite() const {
    return input_.all_finite() &&
           std::all_of(output_.begin(), output_.end(), [](float x) { return std::isfinite(x); });
  }

  friend bool operator==(const TrainedClassifier& a, const TrainedClassifier& b) {
    return a.config_ == b.config_ && a.input_ == b.input_ && a.output_ == b.output_;
  }

 private:
  ClassifierConfig config_;
  Vocabulary vocab_;
  EmbeddingTable input_;
  std::vector<float> output_;
};

inline double score(const TrainedClassifier& model, std::string_view text) {
  return model.score(text);
}

struct TrainingReport {
  std::uint64_t examples = 0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  std::uint64_t empty_feature_documents = 0;
  std::uint64_t updates = 0;
  std::uint32_t vocabulary_size = 0;
  std::uint64_t materialized_buckets = 0;
  double train_accuracy = 0.0;
  double mean_final_epoch_loss = 0.0;
};

inline nlohmann::json to_json(const TrainingReport& r) {
  return {{"examples", r.examples},
          {"positives", r.positives},
          {"negatives", r.negatives},
          {"empty_feature_documents", r.empty_feature_documents},
          {"updates", r.updates},
          {"vocabulary_size", r.vocabulary_size},
          {"materialized_buckets", r.materialized_buckets},
          {"train_accuracy", r.train_accuracy},
          {"mean_final_epoch_loss", r.mean_final_epoch_loss}};
}

inline nlohmann::json to_json(const ClassifierConfig& c) {
  return {{"dim", c.dim},
          {"learning_rate", c.learning_rate},
          {"max_word_ngram", c.max_word_ngram},
          {"min_count", c.min_count},
          {"epochs", c.epochs},
          {"bucket_count", c.bucket_count},
          {"seed", c.seed},
          {"workers", c.workers}};
}

struct TrainResult {
  TrainedClassifier model;
  TrainingReport report;
};

namespace detail {

template <bool Shared>
inline float load(const float& x) {
  if constexpr (Shared) {
    return std::atomic_ref<float>(const_cast<float&>(x)).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Shared>
inline void add(float& x, float v) {
  if constexpr (Shared) {
    std::atomic_ref<float> r(x);
    r.store(r.load(std::memory_order_relaxed) + v, std::memory_order_relaxed);
  } else {
    x += v;
  }
}

struct Example {
  std::vector<std::uint32_t> features;
  int label;
};

struct Workspace {
  std::vector<float> hidden, output;
  SoftmaxGradient<float> grad;
};

// One SGD step. All rows referenced by `ex` must be materialised.
template <bool Shared>
inline float sgd_step(EmbeddingTable& input, std::span<float> output, const Example& ex, float lr,
                      Workspace& ws) {
  const std::size_t dim = input.dim();
  ws.hidden.assign(dim, 0.0f);
  for (auto f : ex.features) {
    const float* row = input.mutable_row(f);
    for (std::size_t d = 0; d < dim; ++d) ws.hidden[d] += load<Shared>(row[d]);
  }
  const float inv = 1.0f / static_cast<float>(ex.features.size());
  for (auto& h : ws.hidden) h *= inv;
  ws.output.resize(2 * dim);
  for (std::size_t i = 0; i < 2 * dim; ++i) ws.output[i] = load<Shared>(output[i]);

  softmax_xent_backward<float>(ws.hidden, ws.output, ex.label, ws.grad);

  for (std::size_t i = 0; i < 2 * dim; ++i) add<Shared>(output[i], -lr * ws.grad.d_output[i]);
  const float scale = -lr * inv;
  for (auto f : ex.features) {
    float* row = input.mutable_row(f);
    for (std::size_t d = 0; d < dim; ++d) add<Shared>(row[d], scale * ws.grad.d_hidden[d]);
  }
  return ws.grad.loss;
}

}  // namespace detail

// Trains by SGD on 2-class softmax cross-entropy. Label 0 is in-domain. The
// learning rate decays linearly to zero over epochs x examples updates, and
// examples are visited in a seeded shuffled order each epoch.
template <typename PosRange, typename NegRange>
TrainResult train(const PosRange& positives, const NegRange& negatives,
                  const ClassifierConfig& config) {
  config.validate();
  TrainingReport report;
  VocabularyBuilder vb;
  for (const Document& d : positives) {
    vb.add(d.text);
    ++report.positives;
  }
  for (const Document& d : negatives) {
    vb.add(d.text);
    ++report.negatives;
  }
  if (report.positives == 0 || report.negatives == 0)
    throw UsageError("classifier training needs non-empty positive and negative sets");
  Vocabulary vocab = vb.build(config);

  std::vector<detail::Example> examples;
  examples.reserve(report.positives + report.negatives);
  auto add_examples = [&](const auto& docs, int label) {
    for (const Document& d : docs) {
      auto features = featurize(d.text, vocab, config.max_word_ngram);
      if (features.empty()) {
        ++report.empty_feature_documents;
        continue;
      }
      examples.push_back({std::move(features), label});
    }
  };
  add_examples(positives, 0);
  add_examples(negatives, 1);
  report.examples = examples.size();
  report.vocabulary_size = vocab.size();

  EmbeddingTable input(vocab.size(), config.bucket_count, config.dim, config.seed);
  {
    std::vector<std::uint32_t> rows;
    for (const auto& ex : examples)
      for (auto f : ex.features)
        if (f >= vocab.size()) rows.push_back(f);
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    input.materialize(rows);
    report.materialized_buckets = rows.size();
  }
  std::vector<float> output(2 * static_cast<std::size_t>(config.dim), 0.0f);

  const std::uint64_t total = static_cast<std::uint64_t>(config.epochs) * examples.size();
  const auto lr0 = static_cast<float>(config.learning_rate);
  std::vector<std::size_t> order(examples.size());
  SplitMix64 rng(config.seed ^ 0x5EEDC1A55F1E5ull);
  double epoch_loss = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);
    const std::uint64_t base = static_cast<std::uint64_t>(epoch) * examples.size();
    if (config.workers == 1) {
      detail::Workspace ws;
      epoch_loss = 0.0;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const float progress = static_cast<float>(base + i) / static_cast<float>(total);
        epoch_loss += detail::sgd_step<false>(input, output, examples[order[i]],
                                              lr0 * (1.0f - progress), ws);
      }
    } else {
      std::atomic<std::uint64_t> processed{base};
      std::vector<double> losses(static_cast<std::size_t>(config.workers), 0.0);
      parallel_chunks(order.size(), static_cast<std::size_t>(config.workers),
                      [&](std::size_t part, std::size_t begin, std::size_t end) {
                        detail::Workspace ws;
                        double local = 0.0;
                        for (std::size_t i = begin; i < end; ++i) {
                          const auto step = processed.fetch_add(1, std::memory_order_relaxed);
                          const float progress = static_cast<float>(step) / static_cast<float>(total);
                          local += detail::sgd_step<true>(input, output, examples[order[i]],
                                                          lr0 * (1.0f - progress), ws);
                        }
                        losses[part] = local;
                      });
      epoch_loss = 0.0;
      for (double l : losses) epoch_loss += l;
    }
  }
  report.updates = total;
  report.mean_final_epoch_loss = examples.empty() ? 0.0 : epoch_loss / examples.size();

  TrainedClassifier model(config, std::move(vocab), std::move(input), std::move(output));
  std::uint64_t correct = 0;
  for (const auto& ex : examples) {
    const auto p = model.predict_features(ex.features);
    const int predicted = p[0] >= 0.5 ? 0 : 1;
    if (predicted == ex.label) ++correct;
  }
  report.train_accuracy = examples.empty() ? 0.0 : static_cast<double>(correct) / examples.size();
  return {std::move(model), report};
}

// ---------------------------------------------------------------------------
// Model file, little-endian:
//   "TRAITFT1"
//   u32 dim, f64 learning_rate, u32 max_word_ngram, u32 min_count, u32 epochs,
//   u32 bucket_count, u64 seed
//   u32 label_count, then per label: u32 byte_length, bytes
//   u32 word_count, then per word: u32 byte_length, bytes, u64 count
//   f32[word_count * dim]           word rows, row-major
//   u32 bucket_row_count, u32[bucket_row_count] ascending row ids
//   f32[bucket_row_count * dim]     those rows, row-major
//   f32[2 * dim]                    output weights, row-major
// Bucket rows not listed hold their seeded initial value.

inline constexpr char kModelMagic[8] = {'T', 'R', 'A', 'I', 'T', 'F', 'T', '1'};

class ModelCodec {
 public:
  static void save(const TrainedClassifier& model, const std::filesystem::path& path) {
    std::string buf;
    buf.append(kModelMagic, 8);
    const auto& c = model.config();
    put_u32(buf, static_cast<std::uint32_t>(c.dim));
    put_u64(buf, std::bit_cast<std::uint64_t>(c.learning_rate));
    put_u32(buf, static_cast<std::uint32_t>(c.max_word_ngram));
    put_u32(buf, static_cast<std::uint32_t>(c.min_count));
    put_u32(buf, static_cast<std::uint32_t>(c.epochs));
    put_u32(buf, c.bucket_count);
    put_u64(buf, c.seed);
    put_u32(buf, 2);
    for (auto label : TrainedClassifier::kLabels) put_str(buf, label);
    const auto& v = model.vocabulary();
    put_u32(buf, v.size());
    for (std::uint32_t i = 0; i < v.size(); ++i) {
      put_str(buf, v.word(i));
      put_u64(buf, v.count(i));
    }
    for (float x : model.input().word_rows()) put_f32(buf, x);
    const auto buckets = model.input().materialized_buckets();
    put_u32(buf, static_cast<std::uint32_t>(buckets.size()));
    for (auto r : buckets) put_u32(buf, r);
    for (auto r : buckets) {
      const float* row = model.input().stored_row(r);
      for (std::size_t d = 0; d < model.input().dim(); ++d) put_f32(buf, row[d]);
    }
    for (float x : model.output()) put_f32(buf, x);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing model file: " + path.string());
  }

  static TrainedClassifier load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r{buf, 0, path.string()};
    if (buf.size() < 8 || std::memcmp(buf.data(), kModelMagic, 8) != 0)
      throw DataError(path.string() + ": not a classifier model (bad magic)");
    r.pos = 8;
    ClassifierConfig c;
    c.dim = static_cast<int>(r.u32());
    c.learning_rate = std::bit_cast<double>(r.u64());
    c.max_word_ngram = static_cast<int>(r.u32());
    c.min_count = static_cast<int>(r.u32());
    c.epochs = static_cast<int>(r.u32());
    c.bucket_count = r.u32();
    c.seed = r.u64();
    try {
      c.validate();
    } catch (const UsageError& e) {
      throw DataError(path.string() + ": corrupt config block: " + e.what());
    }
    const std::uint32_t labels = r.u32();
    if (labels != 2) throw DataError(path.string() + ": expected 2 labels");
    for (std::uint32_t i = 0; i < labels; ++i)
      if (r.str() != TrainedClassifier::kLabels[i])
        throw DataError(path.string() + ": unexpected label name");
    Vocabulary vocab;
    vocab.bucket_count_ = c.bucket_count;
    const std::uint32_t words = r.u32();
    for (std::uint32_t i = 0; i < words; ++i) {
      std::string w = r.str();
      const std::uint64_t count = r.u64();
      if (vocab.contains(w)) throw DataError(path.string() + ": duplicate vocabulary word");
      vocab.push(std::move(w), count);
    }
    EmbeddingTable input;
    input.dim_ = static_cast<std::size_t>(c.dim);
    input.word_count_ = words;
    input.bucket_count_ = c.bucket_count;
    input.seed_ = c.seed;
    input.words_.resize(std::size_t{words} * input.dim_);
    r.need(input.words_.size() * 4);
    for (auto& x : input.words_) x = r.f32();
    const std::uint32_t nb = r.u32();
    r.need(std::size_t{nb} * 4);
    std::vector<std::uint32_t> ids(nb);
    for (auto& id : ids) {
      id = r.u32();
      if (id < words || std::uint64_t{id} >= std::uint64_t{words} + c.bucket_count)
        throw DataError(path.string() + ": bucket row id out of range");
    }
    input.buckets_.resize(std::size_t{nb} * input.dim_);
    r.need(input.buckets_.size() * 4);
    for (std::uint32_t i = 0; i < nb; ++i) input.slots_.emplace(ids[i], i);
    for (auto& x : input.buckets_) x = r.f32();
    std::vector<float> output(2 * input.dim_);
    r.need(output.size() * 4);
    for (auto& x : output) x = r.f32();
    if (r.pos != buf.size()) throw DataError(path.string() + ": trailing bytes after model");
    return TrainedClassifier(c, std::move(vocab), std::move(input), std::move(output));
  }

 private:
  static void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  static void put_u64(std::string& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  static void put_f32(std::string& b, float x) { put_u32(b, std::bit_cast<std::uint32_t>(x)); }
  static void put_str(std::string& b, std::string_view s) {
    put_u32(b, static_cast<std::uint32_t>(s.size()));
    b.append(s);
  }

  struct Reader {
    const std::string& buf;
    std::size_t pos;
    std::string name;

    void need(std::size_t n) const {
      if (buf.size() - pos < n) throw DataError(name + ": truncated model file");
    }
    std::uint32_t u32() {
      need(4);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i)
        v |= std::uint32_t{static_cast<unsigned char>(buf[pos + i])} << (8 * i);
      pos += 4;
      return v;
    }
    std::uint64_t u64() {
      need(8);
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i)
        v |= std::uint64_t{static_cast<unsigned char>(buf[pos + i])} << (8 * i);
      pos += 8;
      return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
      const std::uint32_t n = u32();
      need(n);
      std::string s = buf.substr(pos, n);
      pos += n;
      return s;
    }
  };
};

inline void save_model(const TrainedClassifier& model, const std::filesystem::path& path) {
  ModelCodec::save(model, path);
}

inline TrainedClassifier load_model(const std::filesystem::path& path) {
  return ModelCodec::load(path);
}

}  // namespace domaug
