#include "chainedit/variant_builders.hpp"

#include <fstream>
#include <functional>

namespace chainedit::dataset {

bool answers_match(const std::string& answer, const std::string& expected) {
  return text::iequals(oracle::normalize_answer(answer), oracle::normalize_answer(expected));
}

std::string in_prompt_text(const std::vector<ChainFact>& chain, const std::string& prompt,
                           const MetaRegistry& meta) {
  std::vector<std::string> facts;
  for (const auto& f : chain) facts.push_back(text::capitalize(meta.at(f.relation).statement(f.subject, f.expected_object)));
  return "Given the following information: " + text::join(facts, "; ") + "; Complete the following sentence: " + prompt;
}

namespace {

using ojson = nlohmann::ordered_json;

/// Decides one query. Returns the query to keep (possibly rewritten) or
/// nothing to drop it; fills `record` with action and evidence.
using QueryStep = std::function<std::optional<TestQuery>(const BenchmarkCase&, const TestQuery&, ojson& record)>;

ojson answer_evidence(const std::string& subject, const std::string& relation, const oracle::OracleAnswer& a) {
  ojson e;
  e["subject"] = subject;
  e["relation"] = relation;
  e["answer"] = a.entity ? ojson(*a.entity) : ojson(nullptr);
  e["status"] = oracle::to_string(a.status);
  return e;
}

std::vector<BenchmarkCase> read_progress(const std::filesystem::path& path, VariantKind kind,
                                         std::size_t& next_index) {
  std::vector<BenchmarkCase> done;
  next_index = 0;
  std::size_t line_no = 0;
  for (const auto& line : text::split(read_file(path), '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.at("variant").get<std::string>() != to_string(kind)) throw Error("progress file is for another variant");
      if (j.at("index").get<std::size_t>() != next_index) throw Error("progress file is out of order");
      ++next_index;
      if (!j.at("case").is_null()) {
        auto parsed = parse_cases(nlohmann::json::array({j["case"]}));
        done.push_back(std::move(parsed.front()));
      }
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError("progress file " + path.string() + " line " + std::to_string(line_no) + ": " + e.what(),
                        line_no);
    }
  }
  return done;
}

std::vector<BenchmarkCase> drive(const std::vector<BenchmarkCase>& cases, VariantKind kind, const QueryStep& step,
                                 const BuildOptions& options) {
  std::vector<BenchmarkCase> out;
  std::size_t start = 0;
  bool resuming = options.progress_file && std::filesystem::exists(*options.progress_file);
  if (resuming) {
    out = read_progress(*options.progress_file, kind, start);
    if (start > cases.size()) throw Error("progress file covers more cases than the input");
  }

  auto open = [&](const std::optional<std::filesystem::path>& p, bool append) {
    std::ofstream f;
    if (!p) return f;
    if (p->has_parent_path()) std::filesystem::create_directories(p->parent_path());
    f.open(*p, append ? std::ios::app : std::ios::trunc);
    if (!f) throw Error("cannot write " + p->string());
    return f;
  };
  auto log = open(options.decision_log, resuming);
  auto progress = open(options.progress_file, resuming);

  for (std::size_t i = start; i < cases.size(); ++i) {
    const auto& in = cases[i];
    BenchmarkCase result = in;
    result.variant = kind;
    result.queries.clear();
    std::vector<std::string> records;
    for (std::size_t k = 0; k < in.queries.size(); ++k) {
      const auto& q = in.queries[k];
      ojson record;
      record["variant"] = to_string(kind);
      record["case_index"] = i;
      record["case_id"] = in.case_id;
      record["query_index"] = k;
      record["metric"] = to_string(q.metric);
      record["prompt"] = q.prompt;
      auto kept = step(in, q, record);
      if (kept) result.queries.push_back(std::move(*kept));
      records.push_back(record.dump());
    }
    for (const auto& r : records) {
      if (log.is_open()) log << r << '\n';
    }
    if (log.is_open()) log.flush();

    ojson line;
    line["variant"] = to_string(kind);
    line["index"] = i;
    if (result.queries.empty()) {
      line["case"] = nullptr;
    } else {
      line["case"] = case_to_json(result);
      out.push_back(std::move(result));
    }
    if (progress.is_open()) progress << line.dump() << '\n' << std::flush;
  }

  if (progress.is_open()) {
    progress.close();
    std::filesystem::remove(*options.progress_file);
  }
  return out;
}

}  // namespace

std::vector<BenchmarkCase> build_filtered(const std::vector<BenchmarkCase>& cases, oracle::Oracle& oracle,
                                          const MetaRegistry& meta, const BuildOptions& options) {
  auto step = [&](const BenchmarkCase&, const TestQuery& q, ojson& record) -> std::optional<TestQuery> {
    if (q.chain.empty()) {
      record["action"] = "kept";
      record["reason"] = "no chain";
      return q;
    }
    bool all_match = true;
    auto evidence = ojson::array();
    for (const auto& f : q.chain) {
      auto answer = oracle.answer_query({f.subject, f.relation}, meta.at(f.relation));
      bool match = answer.entity && answers_match(*answer.entity, f.expected_object);
      auto e = answer_evidence(f.subject, f.relation, answer);
      e["expected"] = f.expected_object;
      e["match"] = match;
      evidence.push_back(std::move(e));
      all_match = all_match && match;
    }
    record["action"] = all_match ? "kept" : "dropped";
    record["evidence"] = std::move(evidence);
    if (!all_match) return std::nullopt;
    return q;
  };
  return drive(cases, VariantKind::filtered, step, options);
}

std::vector<BenchmarkCase> build_replaced(const std::vector<BenchmarkCase>& cases, oracle::Oracle& oracle,
                                          const MetaRegistry& meta, const BuildOptions& options) {
  auto step = [&](const BenchmarkCase&, const TestQuery& q, ojson& record) -> std::optional<TestQuery> {
    if (q.chain.empty()) {
      record["action"] = "unchanged";
      record["reason"] = "no chain";
      return q;
    }
    auto evidence = ojson::array();
    std::string entity;
    for (std::size_t h = 0; h < q.chain.size(); ++h) {
      const auto& f = q.chain[h];
      std::string subject = (h > 0 && f.subject == q.chain[h - 1].expected_object) ? entity : f.subject;
      auto answer = oracle.answer_query({subject, f.relation}, meta.at(f.relation));
      evidence.push_back(answer_evidence(subject, f.relation, answer));
      if (answer.status != oracle::AnswerStatus::answered) {
        record["action"] = "dropped";
        record["reason"] = std::string(oracle::to_string(answer.status)) + "_at_step(" + f.relation + ")";
        record["evidence"] = std::move(evidence);
        return std::nullopt;
      }
      entity = *answer.entity;
    }
    TestQuery rewritten = q;
    rewritten.gold_aliases = {entity};
    record["action"] = "rewritten";
    record["gold_before"] = q.gold_aliases;
    record["gold_after"] = rewritten.gold_aliases;
    record["evidence"] = std::move(evidence);
    return rewritten;
  };
  return drive(cases, VariantKind::replaced, step, options);
}

std::vector<BenchmarkCase> build_in_prompt(const std::vector<BenchmarkCase>& cases, const MetaRegistry& meta,
                                           const BuildOptions& options) {
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].variant == VariantKind::in_prompt) {
      throw Error("case " + std::to_string(i) + " is already an in-prompt variant");
    }
    for (const auto& q : cases[i].queries) {
      for (const auto& f : q.chain) meta.at(f.relation);
    }
  }
  auto step = [&](const BenchmarkCase&, const TestQuery& q, ojson& record) -> std::optional<TestQuery> {
    if (q.chain.empty()) {
      record["action"] = "unchanged";
      record["reason"] = "no chain";
      return q;
    }
    TestQuery rewritten = q;
    rewritten.prompt = in_prompt_text(q.chain, q.prompt, meta);
    record["action"] = "rewritten";
    record["prompt_after"] = rewritten.prompt;
    return rewritten;
  };
  return drive(cases, VariantKind::in_prompt, step, options);
}

}  // namespace chainedit::dataset
