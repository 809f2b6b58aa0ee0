#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "chainedit/alignment.hpp"
#include "chainedit/chain_engine.hpp"
#include "chainedit/chat_oracle.hpp"
#include "chainedit/dataset.hpp"
#include "chainedit/directive_rule.hpp"
#include "chainedit/eval_harness.hpp"
#include "chainedit/kg_store.hpp"
#include "chainedit/rule_miner.hpp"
#include "chainedit/subject_model.hpp"
#include "chainedit/variant_builders.hpp"

namespace chainedit::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kVersion = "0.1.0";

/// Files a run touched, for the manifest.
struct RunRecord {
  std::string command;
  std::string config;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
};

nlohmann::ordered_json file_entries(const std::vector<fs::path>& paths) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : paths) {
    nlohmann::ordered_json e;
    e["path"] = p.string();
    e["sha256"] = fs::is_regular_file(p) ? nlohmann::ordered_json(sha256_file(p)) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(e));
  }
  return arr;
}

void write_manifest(const RunRecord& r, const fs::path& path) {
  nlohmann::ordered_json m;
  m["tool"] = "chainedit";
  m["version"] = kVersion;
  m["command"] = r.command;
  m["created"] = timestamp_now();
  m["config"] = r.config;
  m["inputs"] = file_entries(r.inputs);
  m["outputs"] = file_entries(r.outputs);
  m["details"] = r.details;
  write_file(path, m.dump(2) + "\n");
}

/// Writes `content` to `path` (recording it) or to `out`.
void emit(const std::string& path, const std::string& content, std::ostream& out, RunRecord& record) {
  if (path.empty()) {
    out << content;
    return;
  }
  write_file(path, content);
  record.outputs.emplace_back(path);
}

MetaRegistry meta_from(const std::string& path, RunRecord& record) {
  if (path.empty()) {
    MetaRegistry m;
    m.set_nominal_fallback(true);
    return m;
  }
  record.inputs.emplace_back(path);
  return load_meta(path);
}

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

struct OracleFlags {
  std::string uri;
  std::string labels;
  std::string judge_table;
  std::string config;

  void attach(CLI::App* sub, bool judge) {
    sub->add_option("--oracle", uri, "Oracle: mock:<triples.tsv>, http://... or https://...");
    sub->add_option("--labels", labels, "Label file (id<TAB>label) for a mock oracle's store")->check(CLI::ExistingFile);
    sub->add_option("--oracle-config", config, "JSON config for a live oracle")->check(CLI::ExistingFile);
    if (judge) {
      sub->add_option("--judge-table", judge_table, "Mock judge responses (rule<TAB>response)")
          ->check(CLI::ExistingFile);
    }
  }

  std::unique_ptr<oracle::Oracle> make(RunRecord& record) const {
    if (uri.empty()) throw Error("--oracle is required for this command");
    oracle::OracleOptions opts{optional_path(labels), optional_path(judge_table), optional_path(config)};
    if (uri.starts_with("mock:")) record.inputs.emplace_back(uri.substr(5));
    for (const auto& p : {opts.labels, opts.judge_table, opts.config}) {
      if (p) record.inputs.push_back(*p);
    }
    return oracle::make_oracle(uri, opts);
  }
};

struct ExpansionFlags {
  int depth = 1;
  std::string conflict_policy = "drop";
  bool include_disabled = false;
  bool skip_noop = false;

  void attach(CLI::App* sub) {
    sub->add_option("--depth", depth, "Expansion depth")->check(CLI::Range(1, 16));
    sub->add_option("--conflict-policy", conflict_policy, "drop | error")
        ->check(CLI::IsMember({"drop", "error"}));
    sub->add_flag("--include-disabled", include_disabled, "Also fire directives marked disabled");
    sub->add_flag("--skip-noop", skip_noop, "Drop derived edits the oracle already believes");
  }

  chain::ExpansionConfig config() const {
    chain::ExpansionConfig cfg;
    cfg.depth = depth;
    cfg.conflict_policy = conflict_policy == "error" ? chain::ConflictPolicy::error : chain::ConflictPolicy::drop_derived;
    cfg.include_disabled_dual_paths = include_disabled;
    cfg.skip_noop = skip_noop;
    return cfg;
  }
};

std::map<std::string, std::string> read_aliases(const fs::path& path) {
  std::map<std::string, std::string> aliases;
  std::size_t line_no = 0;
  for (const auto& line : text::split(read_file(path), '\n')) {
    ++line_no;
    auto t = text::trim(line);
    if (t.empty() || t.starts_with('#')) continue;
    auto cols = text::split(t, '\t');
    if (cols.size() != 2) throw FormatError(path.string() + " line " + std::to_string(line_no) + ": expected alias<TAB>name", line_no);
    aliases[std::string(text::trim(cols[0]))] = std::string(text::trim(cols[1]));
  }
  return aliases;
}

std::vector<CandidateRule> read_rule_file(const std::string& path, RunRecord& record) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  record.inputs.emplace_back(path);
  return read_rules(in);
}

std::string rules_text(const std::vector<CandidateRule>& rules, const std::vector<std::string>& header) {
  std::ostringstream ss;
  write_rules(ss, rules, header);
  return ss.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rule-guided chain editing toolkit", "chainedit"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML-style config file; command-line flags override it");
  std::string manifest_path;
  app.add_option("--manifest", manifest_path, "Where to write the run manifest");
  app.require_subcommand(1);
  app.fallthrough();

  // ingest
  struct {
    std::string triples, labels, out;
  } ingest_o;
  auto* ingest_cmd = app.add_subcommand("ingest", "Load a triple dump, verify its indexes and report statistics");
  ingest_cmd->add_option("--triples", ingest_o.triples, "Triples TSV")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--labels", ingest_o.labels, "Labels TSV")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", ingest_o.out, "Statistics JSON (stdout when absent)");

  // mine
  struct {
    std::string triples, labels, out;
    std::vector<std::string> targets;
    std::size_t gamma = 0, sample_n = 10000, degree_cap = 256;
    int max_hops = 2;
    std::uint64_t seed = 0;
    unsigned threads = 0;
  } mine_o;
  auto* mine_cmd = app.add_subcommand("mine", "Mine candidate rules for target relations");
  mine_cmd->add_option("--triples", mine_o.triples, "Triples TSV")->required()->check(CLI::ExistingFile);
  mine_cmd->add_option("--labels", mine_o.labels, "Labels TSV")->check(CLI::ExistingFile);
  mine_cmd->add_option("--targets", mine_o.targets, "Target relations")->required()->delimiter(',');
  mine_cmd->add_option("--gamma", mine_o.gamma, "Support threshold (default max(5, 0.5% of the sample))");
  mine_cmd->add_option("--sample-n", mine_o.sample_n, "Instances sampled per target")->check(CLI::PositiveNumber);
  mine_cmd->add_option("--max-hops", mine_o.max_hops, "Longest body path")->check(CLI::IsMember({2, 3}));
  mine_cmd->add_option("--seed", mine_o.seed, "Sampling seed");
  mine_cmd->add_option("--degree-cap", mine_o.degree_cap, "Neighbours expanded per intermediate node");
  mine_cmd->add_option("--threads", mine_o.threads, "Worker threads (0 = hardware)");
  mine_cmd->add_option("--out", mine_o.out, "Rule file (stdout when absent)");

  // align
  struct {
    std::string rules, meta, report, out;
    bool resume = false;
    unsigned parallelism = 1;
    OracleFlags oracle;
  } align_o;
  auto* align_cmd = app.add_subcommand("align", "Keep the candidate rules the oracle endorses");
  align_cmd->add_option("--rules", align_o.rules, "Candidate rule file")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--meta", align_o.meta, "Relation metadata JSON")->check(CLI::ExistingFile);
  align_cmd->add_option("--report", align_o.report, "Alignment report (JSON lines)")->required();
  align_cmd->add_flag("--resume", align_o.resume, "Continue from an existing partial report");
  align_cmd->add_option("--parallelism", align_o.parallelism, "Judgments in flight")->check(CLI::Range(1u, 64u));
  align_cmd->add_option("--out", align_o.out, "Accepted rule file (stdout when absent)");
  align_o.oracle.attach(align_cmd, true);

  // derive
  struct {
    std::string rules, meta, out;
  } derive_o;
  auto* derive_cmd = app.add_subcommand("derive", "Turn accepted rules into a directive ruleset");
  derive_cmd->add_option("--rules", derive_o.rules, "Accepted rule file")->required()->check(CLI::ExistingFile);
  derive_cmd->add_option("--meta", derive_o.meta, "Relation metadata JSON")->check(CLI::ExistingFile);
  derive_cmd->add_option("--out", derive_o.out, "Ruleset JSON (stdout when absent)");

  // expand
  struct {
    std::vector<std::string> edits;
    std::string edits_file, rules, meta, out;
    OracleFlags oracle;
    ExpansionFlags expansion;
  } expand_o;
  auto* expand_cmd = app.add_subcommand("expand", "Expand edits into chain-edit batches");
  expand_cmd->add_option("--edit", expand_o.edits, "Edit literal subject|relation|object (repeatable)");
  expand_cmd->add_option("--edits", expand_o.edits_file, "File with one edit literal per line")
      ->check(CLI::ExistingFile);
  expand_cmd->add_option("--rules", expand_o.rules, "Ruleset JSON")->required()->check(CLI::ExistingFile);
  expand_cmd->add_option("--meta", expand_o.meta, "Relation metadata JSON")->check(CLI::ExistingFile);
  expand_cmd->add_option("--out", expand_o.out, "Batch file, JSON lines (stdout when absent)");
  expand_o.oracle.attach(expand_cmd, false);
  expand_o.expansion.attach(expand_cmd);

  // build-dataset
  struct {
    std::string variant, dataset, meta, out, decision_log, progress;
    OracleFlags oracle;
  } build_o;
  auto* build_cmd = app.add_subcommand("build-dataset", "Build a filtered, replaced or in-prompt benchmark variant");
  build_cmd->add_option("--variant", build_o.variant, "filtered | replaced | in-prompt")
      ->required()
      ->check(CLI::IsMember({"filtered", "replaced", "in-prompt"}));
  build_cmd->add_option("--dataset", build_o.dataset, "Benchmark case file")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--meta", build_o.meta, "Relation metadata JSON")->check(CLI::ExistingFile);
  build_cmd->add_option("--out", build_o.out, "Output case file")->required();
  build_cmd->add_option("--decision-log", build_o.decision_log, "Decision log (default <out>.decisions.jsonl)");
  build_cmd->add_option("--progress", build_o.progress, "Progress file for resuming (default <out>.progress.jsonl)");
  build_o.oracle.attach(build_cmd, false);

  // evaluate
  struct {
    std::string dataset, subject, subject_labels, aliases, rules, batches, meta, out, row_label = "run";
    std::uint64_t seed = 0;
    OracleFlags oracle;
    ExpansionFlags expansion;
  } eval_o;
  auto* eval_cmd = app.add_subcommand("evaluate", "Edit, query and revert a subject model case by case");
  eval_cmd->add_option("--dataset", eval_o.dataset, "Benchmark case file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--subject", eval_o.subject, "symbolic:<triples.tsv> or http(s)://host:port")->required();
  eval_cmd->add_option("--subject-labels", eval_o.subject_labels, "Labels TSV for a symbolic subject")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--aliases", eval_o.aliases, "Alias TSV (alias<TAB>name) for a symbolic subject")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--rules", eval_o.rules, "Ruleset JSON; without it only the original edit is applied")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--batches", eval_o.batches, "Pre-expanded batch file, one batch per case")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--meta", eval_o.meta, "Relation metadata JSON")->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_o.out, "Report JSON");
  eval_cmd->add_option("--row-label", eval_o.row_label, "Row label in the printed table");
  eval_cmd->add_option("--seed", eval_o.seed, "Seed recorded in the report manifest");
  eval_o.oracle.attach(eval_cmd, false);
  eval_o.expansion.attach(eval_cmd);

  // compare
  struct {
    std::string with, without, out;
  } compare_o;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate per-metric deltas between two reports");
  compare_cmd->add_option("--with", compare_o.with, "Report evaluated with rules")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--without", compare_o.without, "Report evaluated without rules")
      ->required()
      ->check(CLI::ExistingFile);
  compare_cmd->add_option("--out", compare_o.out, "Delta table JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (args.empty()) err << app.help();
    return kExitUsage;
  }

  RunRecord record;
  auto* sub = app.get_subcommands().front();
  record.command = sub->get_name();
  record.config = sub->config_to_str(true, false);

  try {
    if (sub == ingest_cmd) {
      record.inputs.emplace_back(ingest_o.triples);
      if (!ingest_o.labels.empty()) record.inputs.emplace_back(ingest_o.labels);
      auto store = kg::ingest(fs::path(ingest_o.triples), optional_path(ingest_o.labels));
      store.verify_indexes();
      nlohmann::ordered_json stats;
      stats["triples"] = store.size();
      stats["entities"] = store.entity_count();
      stats["relations"] = store.relation_count();
      auto& per = stats["per_relation"];
      per = nlohmann::ordered_json::object();
      for (const auto& r : store.relations()) per[r] = store.relation_positions(*store.find_relation(r)).size();
      emit(ingest_o.out, stats.dump(2) + "\n", out, record);

    } else if (sub == mine_cmd) {
      record.inputs.emplace_back(mine_o.triples);
      if (!mine_o.labels.empty()) record.inputs.emplace_back(mine_o.labels);
      auto store = kg::ingest(fs::path(mine_o.triples), optional_path(mine_o.labels));
      mining::MiningConfig cfg;
      cfg.sample_n = mine_o.sample_n;
      if (mine_o.gamma > 0) cfg.gamma = mine_o.gamma;
      cfg.max_hops = mine_o.max_hops;
      cfg.seed = mine_o.seed;
      cfg.degree_cap = mine_o.degree_cap;
      cfg.threads = mine_o.threads;
      auto rules = mining::mine_all(store, mine_o.targets, cfg);
      record.details["rules"] = rules.size();
      emit(mine_o.out,
           rules_text(rules, {"targets: " + text::join(mine_o.targets, ","),
                              "gamma: " + (cfg.gamma ? std::to_string(*cfg.gamma) : std::string("default")),
                              "sample_n: " + std::to_string(cfg.sample_n), "seed: " + std::to_string(cfg.seed)}),
           out, record);

    } else if (sub == align_cmd) {
      auto candidates = read_rule_file(align_o.rules, record);
      auto meta = meta_from(align_o.meta, record);
      auto judge = align_o.oracle.make(record);
      oracle::CountingOracle counted(*judge);
      alignment::AlignmentResult result;
      if (align_o.resume) {
        result = alignment::resume_alignment(align_o.report, candidates, counted, meta, align_o.parallelism);
      } else {
        result = alignment::align_rules(candidates, counted, meta, {fs::path(align_o.report), align_o.parallelism});
      }
      record.outputs.emplace_back(align_o.report);
      record.details["candidates"] = candidates.size();
      record.details["accepted"] = result.accepted.size();
      record.details["judge_calls"] = counted.judgments();
      emit(align_o.out, rules_text(result.accepted, {"accepted by alignment"}), out, record);

    } else if (sub == derive_cmd) {
      auto rules = read_rule_file(derive_o.rules, record);
      auto meta = meta_from(derive_o.meta, record);
      dsl::RuleSet ruleset;
      std::set<std::string> seen;
      auto manual = nlohmann::ordered_json::array();
      for (const auto& rule : rules) {
        auto derivation = dsl::derive_directives(rule, meta);
        if (derivation.not_auto_derivable) {
          err << "not derivable: " << rule.key() << " (" << *derivation.not_auto_derivable << ")\n";
          manual.push_back({{"rule", rule.key()}, {"reason", *derivation.not_auto_derivable}});
          continue;
        }
        for (auto& d : derivation.directives) {
          if (seen.insert(d.id()).second) ruleset.add(std::move(d));
        }
      }
      record.details["directives"] = ruleset.size();
      record.details["not_auto_derivable"] = manual;
      emit(derive_o.out, dsl::serialize_ruleset(ruleset), out, record);

    } else if (sub == expand_cmd) {
      std::vector<chain::EditRequest> edits;
      for (const auto& e : expand_o.edits) edits.push_back(chain::EditRequest::parse(e));
      if (!expand_o.edits_file.empty()) {
        record.inputs.emplace_back(expand_o.edits_file);
        for (const auto& line : text::split(read_file(expand_o.edits_file), '\n')) {
          auto t = text::trim(line);
          if (!t.empty() && !t.starts_with('#')) edits.push_back(chain::EditRequest::parse(t));
        }
      }
      if (edits.empty()) throw Error("expand: give at least one --edit or an --edits file");
      record.inputs.emplace_back(expand_o.rules);
      auto ruleset = dsl::load_ruleset(expand_o.rules);
      auto meta = meta_from(expand_o.meta, record);
      auto oracle = expand_o.oracle.make(record);
      std::string batches;
      std::size_t derived = 0;
      for (const auto& e : edits) {
        auto batch = chain::expand(e, ruleset, *oracle, meta, expand_o.expansion.config());
        derived += batch.derived.size();
        batches += chain::serialize_batch(batch);
      }
      record.details["edits"] = edits.size();
      record.details["derived"] = derived;
      record.details["ruleset_hash"] = ruleset.hash();
      emit(expand_o.out, batches, out, record);

    } else if (sub == build_cmd) {
      record.inputs.emplace_back(build_o.dataset);
      auto cases = dataset::load_cases(build_o.dataset);
      auto meta = meta_from(build_o.meta, record);
      dataset::BuildOptions opts;
      opts.decision_log = build_o.decision_log.empty() ? fs::path(build_o.out + ".decisions.jsonl")
                                                       : fs::path(build_o.decision_log);
      opts.progress_file =
          build_o.progress.empty() ? fs::path(build_o.out + ".progress.jsonl") : fs::path(build_o.progress);
      std::vector<dataset::BenchmarkCase> built;
      if (build_o.variant == "in-prompt") {
        built = dataset::build_in_prompt(cases, meta, opts);
      } else {
        auto oracle = build_o.oracle.make(record);
        built = build_o.variant == "filtered" ? dataset::build_filtered(cases, *oracle, meta, opts)
                                              : dataset::build_replaced(cases, *oracle, meta, opts);
      }
      std::size_t before = 0, after = 0;
      for (const auto& c : cases) before += c.queries.size();
      for (const auto& c : built) after += c.queries.size();
      record.details["variant"] = build_o.variant;
      record.details["cases_in"] = cases.size();
      record.details["cases_out"] = built.size();
      record.details["queries_in"] = before;
      record.details["queries_out"] = after;
      dataset::save_cases(built, build_o.out);
      record.outputs.emplace_back(build_o.out);
      record.outputs.push_back(*opts.decision_log);
      out << build_o.variant << ": " << built.size() << " cases, " << after << " of " << before << " queries\n";

    } else if (sub == eval_cmd) {
      record.inputs.emplace_back(eval_o.dataset);
      auto cases = dataset::load_cases(eval_o.dataset);
      auto meta = meta_from(eval_o.meta, record);

      std::unique_ptr<eval::SubjectModel> subject;
      if (eval_o.subject.starts_with("symbolic:")) {
        auto path = eval_o.subject.substr(9);
        record.inputs.emplace_back(path);
        if (!eval_o.subject_labels.empty()) record.inputs.emplace_back(eval_o.subject_labels);
        auto store = std::make_shared<const kg::TripleStore>(
            kg::ingest(fs::path(path), optional_path(eval_o.subject_labels)));
        std::map<std::string, std::string> aliases;
        if (!eval_o.aliases.empty()) {
          record.inputs.emplace_back(eval_o.aliases);
          aliases = read_aliases(eval_o.aliases);
        }
        auto subject_meta = meta;
        subject_meta.set_nominal_fallback(true);
        subject = std::make_unique<eval::SymbolicSubject>(store, subject_meta, std::move(aliases));
      } else if (eval_o.subject.starts_with("http://") || eval_o.subject.starts_with("https://")) {
        subject = std::make_unique<eval::RemoteSubject>(eval_o.subject);
      } else {
        throw Error("unknown subject '" + eval_o.subject + "' (expected symbolic:<path> or http(s)://)");
      }

      std::optional<dsl::RuleSet> ruleset;
      if (!eval_o.rules.empty()) {
        record.inputs.emplace_back(eval_o.rules);
        ruleset = dsl::load_ruleset(eval_o.rules);
      }
      std::optional<std::vector<chain::EditBatch>> batches;
      if (!eval_o.batches.empty()) {
        record.inputs.emplace_back(eval_o.batches);
        batches = chain::load_batches(eval_o.batches);
      }
      std::unique_ptr<oracle::Oracle> oracle;
      if (ruleset && !batches) oracle = eval_o.oracle.make(record);

      eval::EvalConfig cfg;
      cfg.expansion = eval_o.expansion.config();
      cfg.seed = eval_o.seed;
      cfg.subject_name = eval_o.subject;
      cfg.oracle_name = eval_o.oracle.uri;
      auto report = eval::evaluate(cases, *subject, ruleset ? &*ruleset : nullptr, oracle.get(), meta, cfg,
                                   batches ? &*batches : nullptr);
      if (!eval_o.out.empty()) {
        eval::save_report(report, eval_o.out);
        record.outputs.emplace_back(eval_o.out);
      }
      record.details["errored_cases"] = report.errored;
      record.details["evaluated_queries"] = report.total_evaluated();
      out << eval::render_report(report, eval_o.row_label);
      if (report.errored > 0) err << report.errored << " case(s) errored\n";

    } else if (sub == compare_cmd) {
      record.inputs.emplace_back(compare_o.with);
      record.inputs.emplace_back(compare_o.without);
      auto table = eval::compare_reports(eval::load_report(compare_o.with), eval::load_report(compare_o.without));
      if (!compare_o.out.empty()) {
        write_file(compare_o.out, table.to_json().dump(2) + "\n");
        record.outputs.emplace_back(compare_o.out);
      }
      out << table.render();
    }

    fs::path manifest = !manifest_path.empty()      ? fs::path(manifest_path)
                        : !record.outputs.empty() ? fs::path(record.outputs.front().string() + ".manifest.json")
                                                  : fs::path("chainedit.manifest.json");
    write_manifest(record, manifest);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace chainedit::cli
