#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "domaug/mock_gateway.hpp"
#include "domaug/synthesis.hpp"
#include "test_util.hpp"

using namespace domaug;

namespace {

TaskPools make_pools(std::size_t tasks, std::size_t per_task) {
  TaskPools pools;
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::string name = "Task" + std::to_string(t);
    auto& pool = pools[name];
    pool.task = {name, ""};
    for (std::size_t i = 0; i < per_task; ++i)
      pool.problems.push_back({pool.task, name + " problem " + std::to_string(i)});
  }
  return pools;
}

PassageRequest two_problem_request() {
  PassageRequest r;
  r.id = "r0";
  r.problems = {{{"Query Rewriting", "generates rewrites of user queries"}, "machu picchu tour packages luxury"},
                {{"Query-LandingPage Relevance", ""}, "Is the landing page relevant to the query?"}};
  return r;
}

std::string words(std::size_t n, const std::string& w = "word") {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + w + std::to_string(i);
  return s;
}

std::size_t count_substr(const std::string& s, std::string_view sub) {
  std::size_t n = 0;
  for (auto pos = s.find(sub); pos != std::string::npos; pos = s.find(sub, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(SampleRequest, UniqueRequestFromSingletonPools) {
  auto req = sample_request(make_pools(2, 1), 2, DomainMode::entity_centered, 42);
  ASSERT_EQ(req.problems.size(), 2u);
  std::set<std::string> names{req.problems[0].task.name, req.problems[1].task.name};
  EXPECT_EQ(names, (std::set<std::string>{"Task0", "Task1"}));
  req.validate();
}

TEST(SampleRequest, Errors) {
  EXPECT_THROW(sample_request(make_pools(2, 1), 3, DomainMode::entity_centered, 1), UsageError);
  EXPECT_THROW(sample_request(make_pools(6, 1), 5, DomainMode::entity_centered, 1), UsageError);
  EXPECT_THROW(sample_request(make_pools(6, 1), 1, DomainMode::entity_centered, 1), UsageError);
  auto pools = make_pools(3, 1);
  pools["Task2"].problems.clear();
  EXPECT_THROW(sample_request(pools, 3, DomainMode::entity_centered, 1), UsageError);
}

TEST(SampleRequest, DeterministicPerSeed) {
  auto pools = make_pools(4, 5);
  EXPECT_EQ(sample_request(pools, 3, DomainMode::knowledge_centered, 9),
            sample_request(pools, 3, DomainMode::knowledge_centered, 9));
}

// Per-category counts within 3 sigma of the multinomial expectation, plus a
// chi-square bound (3 degrees of freedom, p = 0.001 critical value 16.27).
void expect_uniform(const std::vector<int>& counts, int n) {
  const double p = 1.0 / static_cast<double>(counts.size());
  const double sigma = std::sqrt(n * p * (1 - p));
  double chi2 = 0;
  for (int c : counts) {
    EXPECT_LE(std::abs(c - n * p), 3 * sigma) << c;
    chi2 += (c - n * p) * (c - n * p) / (n * p);
  }
  if (counts.size() == 4) {
    EXPECT_LT(chi2, 16.27);
  }
}

TEST(SampleRequest, SelectionFrequenciesAreUniform) {
  auto pools = make_pools(4, 4);
  const int n = 1000;
  std::vector<int> first_task(4), chosen_k2(4), problem_idx(4);
  for (int i = 0; i < n; ++i) {
    auto all = sample_request(pools, 4, DomainMode::entity_centered, 1000 + i);
    std::set<std::string> distinct;
    for (const auto& p : all.problems) distinct.insert(p.task.name);
    ASSERT_EQ(distinct.size(), 4u);
    ++first_task[all.problems[0].task.name.back() - '0'];
    ++problem_idx[all.problems[0].statement.back() - '0'];
    auto two = sample_request(pools, 2, DomainMode::entity_centered, 5000 + i);
    ++chosen_k2[two.problems[1].task.name.back() - '0'];
  }
  expect_uniform(first_task, n);
  expect_uniform(chosen_k2, n);
  expect_uniform(problem_idx, n);
}

TEST(Prompt, TemplateAnchorsAndInputLines) {
  const auto req = two_problem_request();
  const auto prompt = build_prompt(req);
  EXPECT_NE(prompt.find("#### Structured Guideline for Passage Generation"), std::string::npos);
  EXPECT_NE(prompt.find("write one paragraph analyzing the potential answers"), std::string::npos);
  EXPECT_NE(prompt.find("highlighting shared learnings across all tasks and distinct problem solving tricks"),
            std::string::npos);
  EXPECT_NE(prompt.find("#### Quality Considerations:"), std::string::npos);
  EXPECT_NE(prompt.find("generated passage between tags"), std::string::npos);
  EXPECT_EQ(count_substr(prompt, "<Passage></Passage>"), 1u);

  std::vector<std::string> inputs;
  std::istringstream in(prompt.substr(prompt.find("#### Input:")));
  for (std::string l; std::getline(in, l);)
    if (l.starts_with("- ")) inputs.push_back(l);
  EXPECT_EQ(inputs, (std::vector<std::string>{
                        "- Query Rewriting (generates rewrites of user queries): machu picchu tour packages luxury",
                        "- Query-LandingPage Relevance: Is the landing page relevant to the query?"}));
  EXPECT_EQ(build_prompt(req), prompt);
}

TEST(Prompt, InjectiveOnProblemListAndModeIndependent) {
  std::mt19937_64 rng(3);
  std::set<std::string> prompts;
  std::set<std::vector<std::pair<std::string, std::string>>> lists;
  for (int i = 0; i < 300; ++i) {
    PassageRequest r;
    const int k = 2 + static_cast<int>(rng() % 3);
    for (int j = 0; j < k; ++j)
      r.problems.push_back({{"T" + std::to_string(rng() % 5), ""}, "p" + std::to_string(rng() % 4)});
    std::vector<std::pair<std::string, std::string>> key;
    for (const auto& p : r.problems) key.emplace_back(p.task.name, p.statement);
    lists.insert(key);
    prompts.insert(build_prompt(r));
    auto other = r;
    other.mode = DomainMode::entity_centered;
    EXPECT_EQ(build_prompt(other), build_prompt(r));
  }
  EXPECT_EQ(prompts.size(), lists.size());
}

TEST(Parse, ThreeParagraphs) {
  auto p = parse_passage("<Passage>P1\n\nP2\n\nP3</Passage>", two_problem_request());
  ASSERT_EQ(p.task_paragraphs.size(), 2u);
  EXPECT_EQ(p.task_paragraphs[0].second, "P1");
  EXPECT_EQ(p.task_paragraphs[1].second, "P2");
  EXPECT_EQ(p.task_paragraphs[0].first, "Query Rewriting");
  EXPECT_EQ(p.enlightenment, "P3");
}

TEST(Parse, Errors) {
  const auto req = two_problem_request();
  try {
    parse_passage("P1\n\nP2\n\nP3", req);
    FAIL();
  } catch (const PassageParseError& e) {
    EXPECT_EQ(e.kind(), PassageParseError::Kind::no_tags);
  }
  try {
    parse_passage("</Passage> backwards <Passage>", req);
    FAIL();
  } catch (const PassageParseError& e) {
    EXPECT_EQ(e.kind(), PassageParseError::Kind::no_tags);
  }
  try {
    parse_passage("<Passage>P1\n\nP2</Passage>", req);
    FAIL();
  } catch (const PassageParseError& e) {
    EXPECT_EQ(e.kind(), PassageParseError::Kind::too_few_paragraphs);
  }
}

TEST(Parse, SurplusParagraphsMergeIntoLastTask) {
  // Hand-worked: 5 paragraphs, 2 problems. P1 -> task 1; P2, P3, P4 -> task 2;
  // P5 -> enlightenment. Blank lines with stray spaces still separate.
  const std::string raw =
      "Sure, here it is.\n<Passage>\nAlpha one.\n  \nBeta two.\nBeta continued.\n\n\nGamma three.\n\nDelta four."
      "\n\nEpsilon five.\n</Passage>\ntrailing chatter";
  auto p = parse_passage(raw, two_problem_request());
  ASSERT_EQ(p.task_paragraphs.size(), 2u);
  EXPECT_EQ(p.task_paragraphs[0].second, "Alpha one.");
  EXPECT_EQ(p.task_paragraphs[1].second, "Beta two.\nBeta continued.\n\nGamma three.\n\nDelta four.");
  EXPECT_EQ(p.enlightenment, "Epsilon five.");
}

TEST(Parse, FirstOpenLastCloseAndCrlf) {
  auto p = parse_passage("<Passage>A\r\n\r\nB <Passage> inner</Passage>\r\n\r\nC</Passage>", two_problem_request());
  EXPECT_EQ(p.task_paragraphs[0].second, "A");
  EXPECT_EQ(p.task_paragraphs[1].second, "B <Passage> inner</Passage>");
  EXPECT_EQ(p.enlightenment, "C");
}

TEST(Parse, CompliantGeneratorIsTotalAndExact) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    PassageRequest r;
    const std::size_t n = 2 + rng() % 3;
    for (std::size_t i = 0; i < n; ++i) r.problems.push_back({{"T" + std::to_string(i), ""}, "s"});
    std::vector<std::string> paras;
    std::string raw = "<Passage>";
    for (std::size_t i = 0; i <= n; ++i) {
      std::string para;
      const int w = 1 + static_cast<int>(rng() % 30);
      for (int k = 0; k < w; ++k) {
        para += (k ? (rng() % 9 == 0 ? "\n" : " ") : "") + std::to_string(rng());
      }
      paras.push_back(para);
      raw += (i ? std::string(1 + rng() % 3, '\n') : std::string(rng() % 2, '\n')) + para;
      if (i < n) raw += '\n';
    }
    raw += "</Passage>";
    auto p = parse_passage(raw, r);
    ASSERT_EQ(p.task_paragraphs.size(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p.task_paragraphs[i].second, paras[i]);
    EXPECT_EQ(p.enlightenment, paras[n]);
  }
}

TEST(Validate, WellFormedAndViolations) {
  const auto req = two_problem_request();
  auto good = parse_passage("<Passage>" + words(25) + "\n\n" + words(22) + "\n\n" + words(30) + "</Passage>", req);
  EXPECT_TRUE(validate(good, req).ok());

  auto short_e = parse_passage("<Passage>" + words(25) + "\n\n" + words(22) + "\n\nToo short here.</Passage>", req);
  auto r = validate(short_e, req);
  EXPECT_TRUE(r.has("enlightenment_too_short"));
  EXPECT_EQ(r.violations.size(), 1u);

  auto short_t = parse_passage("<Passage>tiny\n\n" + words(22) + "\n\n" + words(30) + "</Passage>", req);
  EXPECT_TRUE(validate(short_t, req).has("task_paragraph_too_short"));
  ValidationOptions lax;
  lax.min_task_words = 1;
  EXPECT_TRUE(validate(short_t, req, lax).ok());

  auto moved = good;
  std::swap(moved.enlightenment, moved.task_paragraphs[0].second);
  EXPECT_TRUE(validate(moved, req).has("enlightenment_not_last"));

  auto fewer = good;
  fewer.task_paragraphs.pop_back();
  const auto before = fewer;
  EXPECT_TRUE(validate(fewer, req).has("paragraph_count_mismatch"));
  EXPECT_EQ(fewer, before);
}

TEST(Validate, AdsReferenceExample) {
  const auto raw = domaug::testing::read_file(std::string(DOMAUG_SOURCE_DIR) + "/tests/fixtures/ads_passage.txt");
  const auto request_json = nlohmann::json::parse(
      domaug::testing::read_file(std::string(DOMAUG_SOURCE_DIR) + "/tests/fixtures/ads_request.json"));
  PassageRequest req;
  req.id = "ads-example";
  req.mode = DomainMode::entity_centered;
  for (const auto& p : request_json) req.problems.push_back({{p["task"], ""}, p["statement"]});
  ProblemLimits five{2, 5};
  EXPECT_NO_THROW(req.validate(five));
  EXPECT_THROW(req.validate(), UsageError);

  auto passage = parse_passage(raw, req);
  EXPECT_EQ(passage.task_paragraphs.size(), 5u);
  EXPECT_TRUE(passage.enlightenment.starts_with("In conclusion, the key points across the tasks"));
  EXPECT_TRUE(passage.task_paragraphs[0].second.starts_with("For the Query Rewrites (QR) task"));
  EXPECT_TRUE(passage.task_paragraphs[4].second.starts_with("The Query-Landing Page Relevance (QLP) task"));
  const auto report = validate(passage, req);
  EXPECT_TRUE(report.ok()) << (report.violations.empty() ? "" : report.violations[0].code);
}

TEST(Generate, MockRoundTrip) {
  MockGateway mock(3);
  auto req = two_problem_request();
  auto out = generate(mock, req);
  ASSERT_TRUE(std::holds_alternative<SyntheticPassage>(out));
  const auto& p = std::get<SyntheticPassage>(out);
  EXPECT_EQ(p.task_paragraphs.size(), 2u);
  EXPECT_TRUE(p.enlightenment.starts_with("In conclusion"));
  EXPECT_EQ(p.request_id, "r0");
}

TEST(Generate, NoTagsRetriesThenFails) {
  int calls = 0;
  std::set<std::string> prompts;
  FunctionGateway gw([&](const std::string& prompt, const GenerationParams&) {
    ++calls;
    prompts.insert(prompt);
    return std::string("I cannot do that.");
  });
  auto out = generate(gw, two_problem_request(), {3, {}});
  ASSERT_TRUE(std::holds_alternative<FailureRecord>(out));
  const auto& f = std::get<FailureRecord>(out);
  EXPECT_EQ(f.reason, "no_tags");
  EXPECT_EQ(f.attempts.size(), 3u);
  EXPECT_EQ(f.attempts[0].response, "I cannot do that.");
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(prompts.size(), 1u);
}

TEST(Generate, SucceedsOnRetry) {
  int calls = 0;
  FunctionGateway gw([&](const std::string&, const GenerationParams&) {
    return ++calls == 1 ? std::string("<Passage>x</Passage>")
                        : "<Passage>" + words(25) + "\n\n" + words(25) + "\n\n" + words(25) + "</Passage>";
  });
  EXPECT_TRUE(std::holds_alternative<SyntheticPassage>(generate(gw, two_problem_request())));
  EXPECT_EQ(calls, 2);
}

TEST(Generate, GatewayFailureIsRecorded) {
  FunctionGateway gw([](const std::string&, const GenerationParams&) -> std::string {
    throw GatewayError("exhausted", false);
  });
  auto out = generate(gw, two_problem_request());
  ASSERT_TRUE(std::holds_alternative<FailureRecord>(out));
  EXPECT_EQ(std::get<FailureRecord>(out).reason, "gateway");
  EXPECT_EQ(std::get<FailureRecord>(out).attempts[0].error, "exhausted");
}

TEST(Generate, BatchOfHundredAgainstMock) {
  auto pools = make_pools(5, 7);
  GenerationParams params;
  auto reqs = sample_requests(pools, 100, 3, DomainMode::knowledge_centered, 17, params);
  MockGateway mock(1);
  auto batch = generate_batch(mock, reqs, {}, 4);
  EXPECT_EQ(batch.passages.size(), 100u);
  EXPECT_TRUE(batch.failures.empty());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    EXPECT_EQ(batch.passages[i].request_id, reqs[i].id);
    EXPECT_TRUE(validate(batch.passages[i], reqs[i]).ok());
  }
  auto again = generate_batch(mock, reqs, {}, 1);
  EXPECT_EQ(again.passages, batch.passages);
}

TEST(Generate, SuccessesAndFailuresPartitionRequests) {
  auto pools = make_pools(4, 3);
  auto reqs = sample_requests(pools, 60, 2, DomainMode::entity_centered, 5, {});
  MockGateway mock;
  FunctionGateway gw([&](const std::string& prompt, const GenerationParams& p) {
    // Break every request whose prompt hashes odd.
    return text::fnv1a64(prompt) % 2 ? std::string("garbage") : mock.complete(prompt, p);
  });
  auto batch = generate_batch(gw, reqs, {2, {}}, 3);
  EXPECT_EQ(batch.passages.size() + batch.failures.size(), reqs.size());
  EXPECT_GT(batch.failures.size(), 0u);
  EXPECT_GT(batch.passages.size(), 0u);
  std::set<std::string> ok, bad;
  for (const auto& p : batch.passages) ok.insert(p.request_id);
  for (const auto& f : batch.failures) bad.insert(f.request_id);
  for (const auto& id : ok) EXPECT_EQ(bad.count(id), 0u);
  EXPECT_EQ(ok.size() + bad.size(), reqs.size());
}

TEST(TaskPoolsFile, ReadsAndRejects) {
  domaug::testing::TempDir dir;
  domaug::testing::write_file(dir / "pools.jsonl",
                              "{\"task\":\"QR\",\"description\":\"rewrite queries\",\"statement\":\"q1\"}\n"
                              "\n{\"task\":\"QR\",\"description\":\"rewrite queries\",\"statement\":\"q2\"}\n"
                              "{\"task\":\"AG\",\"statement\":\"a1\"}\n");
  auto pools = read_task_pools(dir / "pools.jsonl");
  EXPECT_EQ(pools.size(), 2u);
  EXPECT_EQ(pools["QR"].problems.size(), 2u);
  EXPECT_EQ(pools["QR"].task.description, "rewrite queries");
  domaug::testing::write_file(dir / "bad.jsonl", "{\"task\":\"QR\"}\n");
  try {
    read_task_pools(dir / "bad.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:1"), std::string::npos);
  }
}
