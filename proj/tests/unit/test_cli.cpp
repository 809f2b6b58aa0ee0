#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "testkit.hpp"

using namespace testkit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = chainedit::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fx(const std::string& rel) { return fixture(rel).string(); }

struct EpochGuard {
  EpochGuard() { setenv("SOURCE_DATE_EPOCH", "1700000000", 1); }
  ~EpochGuard() { unsetenv("SOURCE_DATE_EPOCH"); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage and exit codes") {
    auto none = run_cli({});
    CHECK(none.code == chainedit::cli::kExitUsage);
    CHECK(none.err.find("mine") != std::string::npos);
    CHECK(run_cli({"mine", "--bogus"}).code == chainedit::cli::kExitUsage);
    CHECK(run_cli({"frobnicate"}).code == chainedit::cli::kExitUsage);
    CHECK(run_cli({"mine", "--triples", fx("nationality/kb_cli.tsv")}).code == chainedit::cli::kExitUsage);
    CHECK(run_cli({"--version"}).code == chainedit::cli::kExitOk);

    auto dir = scratch_dir("cli-errors");
    auto no_oracle = run_cli({"--manifest", (dir / "m.json").string(), "expand", "--edit", "Alice|father|Carol", "--rules",
                          fx("worked_example/ruleset.json")});
    CHECK(no_oracle.code == chainedit::cli::kExitDomainError);
    CHECK(no_oracle.err.find("--oracle") != std::string::npos);
    auto bad_edit = run_cli({"--manifest", (dir / "m.json").string(), "expand", "--edit", "Alice|father", "--rules",
                         fx("worked_example/ruleset.json"), "--oracle", "mock:" + fx("worked_example/oracle_kb.tsv")});
    CHECK(bad_edit.code == chainedit::cli::kExitDomainError);
    CHECK_FALSE(fs::exists(dir / "m.json"));
  }

  TEST_CASE("expand reproduces the golden batch") {
    EpochGuard epoch;
    auto dir = scratch_dir("cli-expand");
    auto r = run_cli({"expand", "--edit", "Alice|father|Carol", "--rules", fx("worked_example/ruleset.json"), "--meta",
                  fx("worked_example/meta.json"), "--oracle", "mock:" + fx("worked_example/oracle_kb.tsv"), "--out",
                  (dir / "batch.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(read_file(dir / "batch.jsonl") == read_file(source_dir() / "tests/golden/worked_example_batch.jsonl"));

    auto manifest = nlohmann::json::parse(read_file(dir / "batch.jsonl.manifest.json"));
    CHECK(manifest["command"] == "expand");
    CHECK(manifest["created"] == "2023-11-14T22:13:20Z");
    REQUIRE(manifest["outputs"].size() == 1);
    CHECK(manifest["outputs"][0]["sha256"] == sha256_file(dir / "batch.jsonl"));
    for (const auto& in : manifest["inputs"]) CHECK(in["sha256"] == sha256_file(in["path"].get<std::string>()));
    CHECK(manifest["details"]["derived"] == 1);

    auto again = scratch_dir("cli-expand-2");
    REQUIRE(run_cli({"expand", "--edit", "Alice|father|Carol", "--rules", fx("worked_example/ruleset.json"), "--meta",
                 fx("worked_example/meta.json"), "--oracle", "mock:" + fx("worked_example/oracle_kb.tsv"), "--out",
                 (dir / "batch.jsonl").string(), "--manifest", (again / "m.json").string()})
                .code == 0);
    auto m2 = nlohmann::json::parse(read_file(again / "m.json"));
    CHECK(m2["outputs"] == manifest["outputs"]);
    CHECK(m2["inputs"] == manifest["inputs"]);
    CHECK(m2["created"] == manifest["created"]);
  }

  TEST_CASE("mine, align, derive and expand on the nationality graph") {
    EpochGuard epoch;
    auto dir = scratch_dir("cli-pipeline");
    auto kb = fx("nationality/kb_cli.tsv");
    auto mined = run_cli({"mine", "--triples", kb, "--targets", "nationality", "--gamma", "5", "--out",
                      (dir / "rules.txt").string()});
    REQUIRE(mined.code == 0);
    std::ifstream rules_in(dir / "rules.txt");
    auto rules = read_rules(rules_in);
    REQUIRE(rules.size() == 1);
    CHECK(rules[0].key() == "nationality <- forward:birthplace, forward:country");
    CHECK(rules[0].support == 6);
    auto strict = run_cli({"--manifest", (dir / "strict.manifest.json").string(), "mine", "--triples", kb, "--targets",
                           "nationality", "--gamma", "7"});
    CHECK(strict.out.find("nationality <-") == std::string::npos);

    MetaRegistry meta;
    meta.set_nominal_fallback(true);
    write_file(dir / "judge.tsv", dsl::verbalize_rule(rules[0], meta) + "\tPlausible. Answer: True\n");
    auto aligned = run_cli({"align", "--rules", (dir / "rules.txt").string(), "--report", (dir / "report.jsonl").string(),
                        "--oracle", "mock:" + kb, "--judge-table", (dir / "judge.tsv").string(), "--out",
                        (dir / "accepted.txt").string()});
    REQUIRE(aligned.code == 0);
    std::ifstream accepted_in(dir / "accepted.txt");
    CHECK(read_rules(accepted_in).size() == 1);
    auto align_manifest = nlohmann::json::parse(read_file(dir / "report.jsonl.manifest.json"));
    CHECK(align_manifest["details"]["judge_calls"] == 1);
    CHECK(align_manifest["outputs"].size() == 2);

    REQUIRE(run_cli({"derive", "--rules", (dir / "accepted.txt").string(), "--out", (dir / "ruleset.json").string()})
                .code == 0);
    auto ruleset = dsl::load_ruleset(dir / "ruleset.json");
    CHECK(ruleset.size() >= 2);

    REQUIRE(run_cli({"expand", "--edit", "Newcomer|birthplace|City3", "--rules", (dir / "ruleset.json").string(),
                 "--oracle", "mock:" + kb, "--out", (dir / "batch.jsonl").string()})
                .code == 0);
    auto batch = chain::load_batch(dir / "batch.jsonl");
    bool found = false;
    for (const auto& d : batch.derived) found |= d.triple == chain::Fact{"Newcomer", "nationality", "Nation3"};
    CHECK(found);
  }

  TEST_CASE("reruns are byte-identical") {
    EpochGuard epoch;
    auto run_once = [](const fs::path& dir) {
      auto kb = fx("nationality/kb_cli.tsv");
      REQUIRE(run_cli({"mine", "--triples", kb, "--targets", "nationality", "--gamma", "1", "--max-hops", "3", "--out",
                   (dir / "rules.txt").string(), "--manifest", (dir / "m1.json").string()})
                  .code == 0);
      REQUIRE(run_cli({"derive", "--rules", (dir / "rules.txt").string(), "--out", (dir / "ruleset.json").string(),
                   "--manifest", (dir / "m2.json").string()})
                  .code == 0);
    };
    auto a = scratch_dir("cli-repro-a"), b = scratch_dir("cli-repro-b");
    run_once(a);
    run_once(b);
    CHECK(read_file(a / "rules.txt") == read_file(b / "rules.txt"));
    CHECK(read_file(a / "ruleset.json") == read_file(b / "ruleset.json"));
    auto ma = nlohmann::json::parse(read_file(a / "m2.json"));
    auto mb = nlohmann::json::parse(read_file(b / "m2.json"));
    CHECK(ma["created"] == mb["created"]);
    CHECK(ma["outputs"][0]["sha256"] == mb["outputs"][0]["sha256"]);
  }

  TEST_CASE("build-dataset, evaluate and compare") {
    EpochGuard epoch;
    auto dir = scratch_dir("cli-eval");
    auto built = run_cli({"build-dataset", "--variant", "in-prompt", "--dataset", fx("worked_example/cases.json"), "--meta",
                      fx("worked_example/meta.json"), "--out", (dir / "in_prompt.json").string()});
    REQUIRE(built.code == 0);
    auto cases = dataset::load_cases(dir / "in_prompt.json");
    REQUIRE(cases.size() == 1);
    CHECK(cases[0].variant == dataset::VariantKind::in_prompt);
    CHECK(fs::exists(dir / "in_prompt.json.decisions.jsonl"));
    CHECK(run_cli({"build-dataset", "--variant", "replaced", "--dataset", fx("worked_example/cases.json"), "--out",
               (dir / "x.json").string()})
              .code == chainedit::cli::kExitDomainError);

    std::vector<std::string> common = {"evaluate", "--dataset", fx("worked_example/cases.json"), "--subject",
                                       "symbolic:" + fx("worked_example/kb.tsv"), "--meta", fx("worked_example/meta.json")};
    auto with_args = common;
    with_args.insert(with_args.end(), {"--rules", fx("worked_example/ruleset.json"), "--oracle",
                                       "mock:" + fx("worked_example/oracle_kb.tsv"), "--out", (dir / "with.json").string()});
    auto without_args = common;
    without_args.insert(without_args.end(), {"--out", (dir / "without.json").string()});
    auto with = run_cli(with_args);
    REQUIRE(with.code == 0);
    CHECK(with.out.find("100.0") != std::string::npos);
    REQUIRE(run_cli(without_args).code == 0);

    auto cmp = run_cli({"compare", "--with", (dir / "with.json").string(), "--without", (dir / "without.json").string(),
                    "--out", (dir / "delta.json").string()});
    REQUIRE(cmp.code == 0);
    CHECK(cmp.out.find("+100.0") != std::string::npos);
    auto delta = nlohmann::json::parse(read_file(dir / "delta.json"));
    CHECK(delta["delta"]["LG"] == 100.0);
    CHECK(delta["delta"]["Reliability"] == 0.0);

    write_file(dir / "empty.json", R"({"manifest": {}, "errored": 0, "cases": []})");
    CHECK(run_cli({"compare", "--with", (dir / "with.json").string(), "--without", (dir / "empty.json").string()}).code ==
          chainedit::cli::kExitDomainError);
    CHECK(run_cli({"evaluate", "--dataset", fx("worked_example/cases.json"), "--subject", "carrier-pigeon://x"}).code ==
          chainedit::cli::kExitDomainError);
  }

  TEST_CASE("config file supplies flags") {
    auto dir = scratch_dir("cli-config");
    write_file(dir / "mine.toml", "[mine]\ntriples = \"" + fx("nationality/kb_cli.tsv") +
                                      "\"\ntargets = [\"nationality\"]\ngamma = 5\n");
    auto r = run_cli({"--config", (dir / "mine.toml").string(), "--manifest", (dir / "m.json").string(), "mine"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("nationality <- forward:birthplace, forward:country") != std::string::npos);
    auto overridden = run_cli({"--config", (dir / "mine.toml").string(), "--manifest", (dir / "m.json").string(), "mine",
                           "--gamma", "7"});
    CHECK(overridden.out.find("nationality <-") == std::string::npos);
  }
}
