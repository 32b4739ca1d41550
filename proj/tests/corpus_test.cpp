#include <gtest/gtest.h>

#include <random>
#include <span>
#include <thread>

#include "domaug/corpus.hpp"
#include "test_util.hpp"

using namespace domaug;
using domaug::testing::TempDir;
using domaug::testing::write_file;

TEST(CountTokens, Examples) {
  EXPECT_EQ(count_tokens(""), 0u);
  EXPECT_EQ(count_tokens("machu picchu tour packages luxury"), 5u);
}

TEST(CountTokens, OneMegabyteOfRepeatedWord) {
  // 209715 repeats of "word " is 1,048,575 bytes; `wc -w` on that file prints 209715.
  std::string s;
  for (int i = 0; i < 209715; ++i) s += "word ";
  ASSERT_EQ(s.size(), 1048575u);
  EXPECT_EQ(count_tokens(s), 209715u);
}

TEST(CountTokens, PluggableTokenizer) {
  struct CharCounter final : Tokenizer {
    std::size_t count(std::string_view t) const override { return t.size(); }
  } chars;
  TempDir dir;
  write_file(dir / "a.jsonl", R"({"id":"1","text":"abcd"})" "\n");
  auto r = ingest(dir / "a.jsonl", "x", chars);
  ASSERT_EQ(r.documents.size(), 1u);
  EXPECT_EQ(r.documents[0].token_count, 4u);
}

TEST(Ingest, ValidLinesInOrder) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","text":"one"})" "\n"
             R"({"id":"b","text":"two words"})" "\n"
             R"({"id":"c","text":"three more words"})" "\n");
  auto r = ingest(dir / "c.jsonl", "general");
  ASSERT_EQ(r.documents.size(), 3u);
  EXPECT_EQ(r.documents[0].id, "a");
  EXPECT_EQ(r.documents[1].id, "b");
  EXPECT_EQ(r.documents[2].id, "c");
  EXPECT_EQ(r.documents[2].token_count, 3u);
  EXPECT_EQ(r.documents[0].source, "general");
  EXPECT_EQ(r.summary.skipped(), 0u);
}

TEST(Ingest, SkipsMissingTextAndCountsIt) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","text":"one"})" "\n"
             R"({"id":"b"})" "\n"
             R"({"id":"c","text":"three"})" "\n");
  auto r = ingest(dir / "c.jsonl", "general");
  ASSERT_EQ(r.documents.size(), 2u);
  EXPECT_EQ(r.summary.malformed, 1u);
  EXPECT_EQ(r.summary.skipped(), 1u);
  ASSERT_EQ(r.summary.issues.size(), 1u);
  EXPECT_EQ(r.summary.issues[0].line, 2u);
}

TEST(Ingest, EmptyTextAndGarbageAreCountedSeparately) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","text":"   "})" "\n"
             "not json\n"
             R"([1,2])" "\n"
             R"({"id":"","text":"x"})" "\n"
             R"({"id":7,"text":"x"})" "\n"
             "\n"
             R"({"id":"ok","text":"fine","source":"in-domain","lang":"en","n":3})" "\r\n");
  auto r = ingest(dir / "c.jsonl", "general");
  ASSERT_EQ(r.documents.size(), 1u);
  EXPECT_EQ(r.summary.empty_text, 1u);
  EXPECT_EQ(r.summary.malformed, 4u);
  const auto& d = r.documents[0];
  EXPECT_EQ(d.source, "in-domain");
  EXPECT_EQ(d.meta.at("lang"), "en");
  EXPECT_EQ(d.meta.at("n"), "3");
}

TEST(Ingest, UnreadableFileIsFatal) {
  EXPECT_THROW(ingest("/nonexistent/definitely/not/here.jsonl", "x"), DataError);
}

TEST(Ingest, TenThousandLines) {
  TempDir dir;
  {
    std::ofstream out(dir / "big.jsonl");
    for (int i = 0; i < 10000; ++i)
      out << R"({"id":"d)" << i << R"(","text":"w )" << i << "\"}\n";
  }
  // `wc -l` on this file prints 10000.
  auto s = stats_of_file(dir / "big.jsonl", "general");
  EXPECT_EQ(s.document_count, 10000u);
  EXPECT_EQ(s.token_count, 20000u);
}

TEST(Ingest, RerunsAreIdentical) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","text":"one","k":{"x":1}})" "\n" R"({"id":"b","text":"two"})" "\n");
  auto a = ingest(dir / "c.jsonl", "s");
  auto b = ingest(dir / "c.jsonl", "s");
  EXPECT_EQ(a.documents, b.documents);
  EXPECT_EQ(a.documents[0].meta.at("k"), R"({"x":1})");
}

TEST(Stats, EmptyAndTwoSources) {
  std::vector<Document> none;
  auto s0 = stats(none);
  EXPECT_EQ(s0.document_count, 0u);
  EXPECT_EQ(s0.token_count, 0u);
  EXPECT_TRUE(s0.per_source.empty());

  std::vector<Document> docs = {domaug::testing::make_doc("1", "a b", "x"),
                                domaug::testing::make_doc("2", "c", "y")};
  auto s = stats(docs);
  ASSERT_EQ(s.per_source.size(), 2u);
  EXPECT_EQ(s.per_source["x"].docs + s.per_source["y"].docs, s.document_count);
  EXPECT_EQ(s.per_source["x"].tokens + s.per_source["y"].tokens, s.token_count);
}

TEST(Stats, ThousandDocsOfTenTokens) {
  std::vector<Document> docs;
  for (int i = 0; i < 1000; ++i)
    docs.push_back(domaug::testing::make_doc(std::to_string(i), "a b c d e f g h i j"));
  EXPECT_EQ(stats(docs).token_count, 10000u);
}

TEST(Stats, RandomCorporaTotalsMatchIndependentSums) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Document> docs;
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> expect;
    std::uint64_t tokens = 0;
    const int n = static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) {
      const int words = 1 + static_cast<int>(rng() % 40);
      std::string t;
      for (int w = 0; w < words; ++w) t += "w ";
      const std::string src = "s" + std::to_string(rng() % 4);
      docs.push_back(domaug::testing::make_doc(std::to_string(i), t, src));
      expect[src].first += 1;
      expect[src].second += static_cast<std::uint64_t>(words);
      tokens += static_cast<std::uint64_t>(words);
    }
    // Split into shards and merge, as parallel workers would.
    const std::size_t cut = docs.empty() ? 0 : rng() % docs.size();
    CorpusStats merged = stats(std::span(docs).subspan(0, cut));
    merged.merge(stats(std::span(docs).subspan(cut)));
    const auto whole = stats(docs);
    EXPECT_EQ(merged, whole);
    EXPECT_EQ(whole.document_count, static_cast<std::uint64_t>(n));
    EXPECT_EQ(whole.token_count, tokens);
    for (const auto& [src, dt] : expect) {
      EXPECT_EQ(whole.per_source.at(src).docs, dt.first);
      EXPECT_EQ(whole.per_source.at(src).tokens, dt.second);
    }
  }
}

TEST(Stats, JsonShape) {
  std::vector<Document> docs = {domaug::testing::make_doc("1", "a b", "x")};
  auto j = to_json(stats(docs));
  EXPECT_EQ(j["document_count"], 1);
  EXPECT_EQ(j["token_count"], 2);
  EXPECT_EQ(j["per_source"]["x"]["tokens"], 2);
}
