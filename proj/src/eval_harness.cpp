#include "chainedit/eval_harness.hpp"

#include <cstdio>
#include <set>
#include <tuple>

namespace chainedit::eval {

std::optional<double> MetricReport::accuracy(Metric m) const {
  auto it = metrics.find(m);
  if (it == metrics.end() || it->second.evaluated == 0) return std::nullopt;
  return it->second.accuracy();
}

std::size_t MetricReport::evaluated(Metric m) const {
  auto it = metrics.find(m);
  return it == metrics.end() ? 0 : it->second.evaluated;
}

std::size_t MetricReport::total_evaluated() const {
  std::size_t n = 0;
  for (const auto& [m, s] : metrics) n += s.evaluated;
  return n;
}

namespace {

std::string_view policy_name(chain::ConflictPolicy p) {
  return p == chain::ConflictPolicy::error ? "error" : "drop_derived";
}

nlohmann::ordered_json manifest_for(const dsl::RuleSet* rules, const EvalConfig& cfg, std::size_t n_cases,
                                    bool pre_expanded) {
  nlohmann::ordered_json m;
  m["ruleset_hash"] = rules ? nlohmann::ordered_json(rules->hash()) : nlohmann::ordered_json(nullptr);
  m["rules"] = rules ? rules->size() : 0;
  m["pre_expanded_batches"] = pre_expanded;
  m["cases"] = n_cases;
  m["seed"] = cfg.seed;
  m["subject"] = cfg.subject_name;
  m["oracle"] = cfg.oracle_name;
  auto& e = m["expansion"];
  e["depth"] = cfg.expansion.depth;
  e["conflict_policy"] = policy_name(cfg.expansion.conflict_policy);
  e["include_disabled_dual_paths"] = cfg.expansion.include_disabled_dual_paths;
  e["skip_noop"] = cfg.expansion.skip_noop;
  m["scoring"] = "whole-token alias containment, case-insensitive";
  return m;
}

}  // namespace

MetricReport evaluate(const std::vector<dataset::BenchmarkCase>& cases, SubjectModel& subject,
                      const dsl::RuleSet* rules, oracle::Oracle* oracle, const MetaRegistry& meta,
                      const EvalConfig& cfg, const std::vector<chain::EditBatch>* batches) {
  if (rules && !batches && !oracle) throw Error("evaluate: expanding with rules needs an oracle");
  if (batches && batches->size() != cases.size()) {
    throw Error("evaluate: " + std::to_string(batches->size()) + " pre-expanded batches for " +
                std::to_string(cases.size()) + " cases");
  }
  cfg.expansion.validate();

  MetricReport report;
  report.manifest = manifest_for(rules, cfg, cases.size(), batches != nullptr);

  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    chain::EditBatch batch;
    if (batches) {
      batch = (*batches)[i];
      if (!(batch.original == c.edit)) {
        throw Error("evaluate: batch " + std::to_string(i) + " does not start with case " + std::to_string(i) +
                    "'s edit");
      }
    } else if (rules) {
      batch = chain::expand(c.edit, *rules, *oracle, meta, cfg.expansion);
    } else {
      batch.original = c.edit;
    }

    CaseResult result;
    result.case_index = i;
    result.case_id = c.case_id;
    result.batch_size = batch.facts().size();
    try {
      subject.apply_batch(batch);
      for (const auto& q : c.queries) {
        auto answer = subject.query(q.prompt);
        result.queries.push_back({q.metric, q.prompt, answer, score_answer(answer, q.gold_aliases)});
      }
      subject.revert();
    } catch (const SubjectError& e) {
      result.errored = true;
      result.error = e.what();
      result.queries.clear();
      try {
        subject.revert();
      } catch (const SubjectError&) {
      }
    }

    if (result.errored) {
      ++report.errored;
    } else {
      for (const auto& q : result.queries) {
        auto& score = report.metrics[q.metric];
        ++score.evaluated;
        if (q.correct) ++score.correct;
      }
    }
    report.cases.push_back(std::move(result));
  }
  return report;
}

nlohmann::ordered_json report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["manifest"] = report.manifest;
  auto& metrics = j["metrics"];
  metrics = nlohmann::ordered_json::object();
  for (auto m : dataset::kAllMetrics) {
    auto acc = report.accuracy(m);
    if (!acc) continue;
    const auto& s = report.metrics.at(m);
    metrics[std::string(dataset::to_string(m))] = {
        {"evaluated", s.evaluated}, {"correct", s.correct}, {"accuracy", *acc}};
  }
  j["errored"] = report.errored;
  auto& cases = j["cases"];
  cases = nlohmann::ordered_json::array();
  for (const auto& c : report.cases) {
    nlohmann::ordered_json cj;
    cj["case_index"] = c.case_index;
    cj["case_id"] = c.case_id;
    cj["batch_size"] = c.batch_size;
    cj["errored"] = c.errored;
    if (c.errored) cj["error"] = c.error;
    cj["queries"] = nlohmann::ordered_json::array();
    for (const auto& q : c.queries) {
      cj["queries"].push_back(
          {{"metric", dataset::to_string(q.metric)}, {"prompt", q.prompt}, {"answer", q.answer}, {"correct", q.correct}});
    }
    cases.push_back(std::move(cj));
  }
  return j;
}

MetricReport report_from_json(const nlohmann::ordered_json& j) {
  MetricReport r;
  try {
    r.manifest = j.at("manifest");
    r.errored = j.at("errored").get<std::size_t>();
    for (const auto& cj : j.at("cases")) {
      CaseResult c;
      c.case_index = cj.at("case_index").get<std::size_t>();
      c.case_id = cj.at("case_id").get<std::string>();
      c.batch_size = cj.value("batch_size", std::size_t{1});
      c.errored = cj.at("errored").get<bool>();
      c.error = cj.value("error", std::string());
      for (const auto& qj : cj.at("queries")) {
        auto metric = dataset::parse_metric(qj.at("metric").get<std::string>());
        if (!metric) throw Error("unknown metric in report");
        c.queries.push_back({*metric, qj.at("prompt").get<std::string>(), qj.at("answer").get<std::string>(),
                             qj.at("correct").get<bool>()});
      }
      if (!c.errored) {
        for (const auto& q : c.queries) {
          auto& s = r.metrics[q.metric];
          ++s.evaluated;
          if (q.correct) ++s.correct;
        }
      }
      r.cases.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

void save_report(const MetricReport& report, const std::filesystem::path& path) {
  write_file(path, report_to_json(report).dump(2) + "\n");
}

MetricReport load_report(const std::filesystem::path& path) {
  try {
    return report_from_json(nlohmann::ordered_json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("report " + path.string() + ": " + e.what());
  }
}

namespace {

constexpr int kLabelWidth = 10;
constexpr int kColumnWidth = 12;

std::string pad(std::string s, int width) {
  if (static_cast<int>(s.size()) < width) s.append(width - s.size(), ' ');
  return s;
}

std::string percent(std::optional<double> v, bool signed_value) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, signed_value ? "%+.1f" : "%.1f", *v);
  return buf;
}

std::string header() {
  std::string line = pad("", kLabelWidth);
  for (auto m : dataset::kAllMetrics) line += pad(std::string(dataset::to_string(m)), kColumnWidth);
  while (!line.empty() && line.back() == ' ') line.pop_back();
  return line + "\n";
}

std::string row(const std::string& label, const std::map<Metric, std::optional<double>>& values, bool signed_value) {
  std::string line = pad(label, kLabelWidth);
  for (auto m : dataset::kAllMetrics) {
    auto it = values.find(m);
    line += pad(percent(it == values.end() ? std::nullopt : it->second, signed_value), kColumnWidth);
  }
  while (!line.empty() && line.back() == ' ') line.pop_back();
  return line + "\n";
}

std::map<Metric, std::optional<double>> percentages(const MetricReport& r) {
  std::map<Metric, std::optional<double>> out;
  for (auto m : dataset::kAllMetrics) {
    auto acc = r.accuracy(m);
    out[m] = acc ? std::optional<double>(*acc * 100.0) : std::nullopt;
  }
  return out;
}

using Coverage = std::set<std::tuple<std::size_t, std::string, Metric, std::string>>;

Coverage coverage(const MetricReport& r) {
  Coverage out;
  for (const auto& c : r.cases) {
    if (c.errored) continue;
    for (const auto& q : c.queries) out.emplace(c.case_index, c.case_id, q.metric, q.prompt);
  }
  return out;
}

}  // namespace

std::string render_report(const MetricReport& report, const std::string& row_label) {
  return header() + row(row_label, percentages(report), false);
}

std::string DeltaTable::render() const {
  return header() + row("w/ ours", with_rules, false) + row("w/o ours", without_rules, false) +
         row("delta", delta, true);
}

nlohmann::ordered_json DeltaTable::to_json() const {
  nlohmann::ordered_json j;
  auto put = [](const std::map<Metric, std::optional<double>>& values) {
    nlohmann::ordered_json o;
    for (auto m : dataset::kAllMetrics) {
      auto it = values.find(m);
      o[std::string(dataset::to_string(m))] =
          (it != values.end() && it->second) ? nlohmann::ordered_json(*it->second) : nlohmann::ordered_json(nullptr);
    }
    return o;
  };
  j["with_rules"] = put(with_rules);
  j["without_rules"] = put(without_rules);
  j["delta"] = put(delta);
  return j;
}

DeltaTable compare_reports(const MetricReport& with_rules, const MetricReport& without_rules) {
  if (coverage(with_rules) != coverage(without_rules)) {
    throw Error("compare: the two reports do not cover the same queries");
  }
  DeltaTable t;
  t.with_rules = percentages(with_rules);
  t.without_rules = percentages(without_rules);
  for (auto m : dataset::kAllMetrics) {
    auto a = t.with_rules[m], b = t.without_rules[m];
    t.delta[m] = (a && b) ? std::optional<double>(*a - *b) : std::nullopt;
  }
  return t;
}

}  // namespace chainedit::eval
