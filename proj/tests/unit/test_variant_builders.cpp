#include <doctest.h>

#include "chainedit/variant_builders.hpp"
#include "testkit.hpp"

using namespace testkit;
using namespace chainedit::dataset;

namespace {

std::vector<nlohmann::json> read_log(const std::filesystem::path& p) {
  std::vector<nlohmann::json> out;
  for (const auto& line : text::split(read_file(p), '\n'))
    if (!text::trim(line).empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

std::size_t count_action(const std::vector<nlohmann::json>& log, const std::string& action) {
  std::size_t n = 0;
  for (const auto& r : log) n += r["action"] == action;
  return n;
}

std::vector<TestQuery> all_queries(const std::vector<BenchmarkCase>& cases) {
  std::vector<TestQuery> out;
  for (const auto& c : cases) out.insert(out.end(), c.queries.begin(), c.queries.end());
  return out;
}

std::size_t chained(const std::vector<BenchmarkCase>& cases) {
  std::size_t n = 0;
  for (const auto& q : all_queries(cases)) n += !q.chain.empty();
  return n;
}

}  // namespace

TEST_SUITE("variant_builders") {
  TEST_CASE("answer matching") {
    CHECK(answers_match("the Sorbonne.", "Sorbonne"));
    CHECK(answers_match("PARIS", "paris"));
    CHECK_FALSE(answers_match("Paris, Texas", "Paris"));
  }

  TEST_CASE("filtered keeps exactly the agreeing queries") {
    auto suite = variant_suite(20, 42);
    oracle::MockOracle mock(make_store(suite.oracle_triples));
    oracle::CountingOracle counter(mock);
    auto dir = scratch_dir("filtered");
    auto out = build_filtered(suite.cases, counter, suite.meta, {dir / "log.jsonl", std::nullopt});
    auto log = read_log(dir / "log.jsonl");
    auto input = all_queries(suite.cases);
    auto kept = all_queries(out);
    CHECK(log.size() == input.size());
    CHECK(count_action(log, "dropped") == suite.planted_disagreements + suite.planted_unknown);
    CHECK(count_action(log, "kept") == kept.size());
    CHECK(input.size() - kept.size() == suite.disagreeing_prompts.size());
    for (const auto& q : kept) {
      CHECK_FALSE(suite.disagreeing_prompts.contains(q.prompt));
      CHECK(std::find(input.begin(), input.end(), q) != input.end());
    }
    std::size_t chain_facts = 0;
    for (const auto& q : input) chain_facts += q.chain.size();
    CHECK(counter.queries() == chain_facts);
    CHECK(counter.inverse_queries() == 0);
    for (const auto& c : out) CHECK(c.variant == VariantKind::filtered);
    CHECK(out.size() == suite.cases.size());
  }

  TEST_CASE("filtering an agreeing benchmark changes nothing but the marker") {
    auto suite = variant_suite(12, 9);
    std::vector<RawTriple> truth = suite.oracle_triples;
    for (const auto& c : suite.cases)
      for (const auto& q : c.queries)
        for (const auto& f : q.chain) truth.push_back({f.subject, f.relation, f.expected_object});
    std::vector<RawTriple> agreeing;
    for (const auto& t : truth)
      if (t[2].rfind("Elsewhere", 0) != 0) agreeing.push_back(t);
    oracle::MockOracle mock(make_store(agreeing));
    auto out = build_filtered(suite.cases, mock, suite.meta);
    REQUIRE(out.size() == suite.cases.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].queries == suite.cases[i].queries);
  }

  TEST_CASE("replaced golds follow the oracle") {
    auto suite = variant_suite(20, 42);
    oracle::MockOracle mock(make_store(suite.oracle_triples));
    auto dir = scratch_dir("replaced");
    auto out = build_replaced(suite.cases, mock, suite.meta, {dir / "log.jsonl", std::nullopt});
    auto log = read_log(dir / "log.jsonl");
    CHECK(count_action(log, "dropped") == suite.planted_unknown);
    CHECK(count_action(log, "rewritten") == suite.chained_queries - suite.planted_unknown);
    CHECK(all_queries(out).size() == all_queries(suite.cases).size() - suite.planted_unknown);
    std::size_t rewritten = 0;
    for (const auto& q : all_queries(out)) {
      if (q.chain.empty()) continue;
      ++rewritten;
      REQUIRE(suite.replaced_gold.contains(q.prompt));
      CHECK(q.gold_aliases == std::vector<std::string>{suite.replaced_gold.at(q.prompt)});
    }
    CHECK(rewritten == suite.replaced_gold.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (const auto& q : out[i].queries) {
        auto it = std::find_if(suite.cases[i].queries.begin(), suite.cases[i].queries.end(),
                               [&](const TestQuery& o) { return o.prompt == q.prompt; });
        REQUIRE(it != suite.cases[i].queries.end());
        if (q.chain.empty()) CHECK(q == *it);
      }
    }
    for (const auto& r : log) {
      if (r["action"] == "dropped") CHECK(r["reason"].get<std::string>().starts_with("unknown_at_step("));
    }
  }

  TEST_CASE("in-prompt format") {
    MetaRegistry meta;
    meta.add(RelationMeta::nominal("spouse"));
    meta.add(RelationMeta::nominal("country"));
    CHECK(in_prompt_text({{"Carol", "spouse", "Mary"}}, "The mother of Alice is", meta) ==
          "Given the following information: The spouse of Carol is Mary; Complete the following sentence: "
          "The mother of Alice is");
    CHECK(in_prompt_text({{"Carol", "spouse", "Mary"}, {"Mary", "country", "Peru"}}, "Q", meta) ==
          "Given the following information: The spouse of Carol is Mary; The country of Mary is Peru; "
          "Complete the following sentence: Q");

    auto suite = variant_suite(20, 42);
    auto out = build_in_prompt(suite.cases, suite.meta);
    REQUIRE(out.size() == suite.cases.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      REQUIRE(out[i].queries.size() == suite.cases[i].queries.size());
      CHECK(out[i].variant == VariantKind::in_prompt);
      for (std::size_t k = 0; k < out[i].queries.size(); ++k) {
        const auto& before = suite.cases[i].queries[k];
        const auto& after = out[i].queries[k];
        CHECK(after.gold_aliases == before.gold_aliases);
        CHECK(after.metric == before.metric);
        if (before.chain.empty()) {
          CHECK(after.prompt == before.prompt);
          continue;
        }
        auto id = std::to_string(i);
        std::string expected = "Given the following information: The city of University" + id + " is City" + id;
        if (before.chain.size() == 2) expected += "; The country of City" + id + " is Nation" + id;
        expected += "; Complete the following sentence: " + before.prompt;
        CHECK(after.prompt == expected);
      }
    }
    CHECK(build_in_prompt(suite.cases, suite.meta) == out);
    CHECK_THROWS_AS(build_in_prompt(out, suite.meta), Error);
    MetaRegistry missing;
    CHECK_THROWS_AS(build_in_prompt(suite.cases, missing), MissingMetaError);
  }

  TEST_CASE("builders preserve case order under permutation") {
    auto suite = variant_suite(10, 5);
    oracle::MockOracle mock(make_store(suite.oracle_triples));
    auto reversed = suite.cases;
    std::reverse(reversed.begin(), reversed.end());
    auto a = build_filtered(suite.cases, mock, suite.meta);
    auto b = build_filtered(reversed, mock, suite.meta);
    std::reverse(b.begin(), b.end());
    CHECK(a == b);
    auto c = build_replaced(suite.cases, mock, suite.meta);
    auto d = build_replaced(reversed, mock, suite.meta);
    std::reverse(d.begin(), d.end());
    CHECK(c == d);
  }

  TEST_CASE("emptied cases are dropped") {
    auto suite = variant_suite(4, 1);
    auto lonely = suite.cases[1];
    lonely.queries.erase(std::remove_if(lonely.queries.begin(), lonely.queries.end(),
                                        [](const TestQuery& q) { return q.chain.empty(); }),
                         lonely.queries.end());
    oracle::MockOracle mock(make_store(suite.oracle_triples));
    CHECK(build_filtered({lonely}, mock, suite.meta).empty());
    CHECK(build_replaced({lonely}, mock, suite.meta).empty());
  }

  TEST_CASE("interrupted builds resume from the progress file") {
    auto suite = variant_suite(20, 42);
    oracle::MockOracle mock(make_store(suite.oracle_triples));
    auto dir = scratch_dir("resume");
    auto fresh = build_replaced(suite.cases, mock, suite.meta);

    class Dying : public oracle::Oracle {
     public:
      Dying(oracle::Oracle& inner, std::size_t budget) : inner_(inner), budget_(budget) {}
      oracle::OracleAnswer answer_query(const oracle::KnowledgeQuery& q, const RelationMeta& m) override {
        if (budget_ == 0) throw oracle::TransportError("gone");
        --budget_;
        return inner_.answer_query(q, m);
      }
      oracle::OracleAnswer answer_inverse_query(const std::string& r, const std::string& o,
                                                const RelationMeta& m) override {
        return inner_.answer_inverse_query(r, o, m);
      }
      oracle::Judgment judge_rule(const std::string& r) override { return inner_.judge_rule(r); }

     private:
      oracle::Oracle& inner_;
      std::size_t budget_;
    } dying(mock, 12);

    BuildOptions opts{dir / "log.jsonl", dir / "progress.jsonl"};
    CHECK_THROWS_AS(build_replaced(suite.cases, dying, suite.meta, opts), oracle::TransportError);
    REQUIRE(std::filesystem::exists(dir / "progress.jsonl"));
    auto done_before = read_log(dir / "progress.jsonl").size();
    CHECK(done_before > 0);
    CHECK(done_before < suite.cases.size());

    oracle::CountingOracle counter(mock);
    auto resumed = build_replaced(suite.cases, counter, suite.meta, opts);
    CHECK(resumed == fresh);
    CHECK_FALSE(std::filesystem::exists(dir / "progress.jsonl"));
    std::size_t expected_calls = 0;
    for (std::size_t i = done_before; i < suite.cases.size(); ++i)
      for (const auto& q : suite.cases[i].queries) {
        for (std::size_t h = 0; h < q.chain.size(); ++h) {
          ++expected_calls;
          if (suite.disagreeing_prompts.contains(q.prompt) && !suite.replaced_gold.contains(q.prompt)) break;
        }
      }
    CHECK(counter.queries() == expected_calls);
    auto log = read_log(dir / "log.jsonl");
    CHECK(log.size() == all_queries(suite.cases).size());

    write_file(dir / "progress.jsonl", R"({"variant":"filtered","index":0,"case":null})" "\n");
    CHECK_THROWS_AS(build_replaced(suite.cases, mock, suite.meta, opts), FormatError);
    CHECK(chained(suite.cases) == suite.chained_queries);
  }
}
