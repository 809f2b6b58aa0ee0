#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainedit/chain_engine.hpp"
#include "chainedit/dataset.hpp"
#include "chainedit/scoring.hpp"
#include "chainedit/subject_model.hpp"

namespace chainedit::eval {

using dataset::Metric;

struct EvalConfig {
  chain::ExpansionConfig expansion;
  std::uint64_t seed = 0;
  /// Free-form names recorded in the run manifest.
  std::string subject_name;
  std::string oracle_name;
};

struct QueryResult {
  Metric metric = Metric::Reliability;
  std::string prompt;
  std::string answer;
  bool correct = false;
  bool operator==(const QueryResult&) const = default;
};

struct CaseResult {
  std::size_t case_index = 0;
  std::string case_id;
  bool errored = false;
  std::string error;
  std::size_t batch_size = 1;
  std::vector<QueryResult> queries;
  bool operator==(const CaseResult&) const = default;
};

struct MetricScore {
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  double accuracy() const { return evaluated == 0 ? 0.0 : static_cast<double>(correct) / evaluated; }
  bool operator==(const MetricScore&) const = default;
};

struct MetricReport {
  /// Only metrics with at least one evaluated query appear here.
  std::map<Metric, MetricScore> metrics;
  std::vector<CaseResult> cases;
  std::size_t errored = 0;
  nlohmann::ordered_json manifest;

  /// Absent when nothing was evaluated for `m`.
  std::optional<double> accuracy(Metric m) const;
  std::size_t evaluated(Metric m) const;
  std::size_t total_evaluated() const;
};

/// Single-instance protocol: for every case build the batch (expanded through
/// `rules` when given, else the original edit alone), apply it, pose every
/// query, score, revert. A SubjectError marks the case errored and the run
/// continues. `batches`, when given, replaces expansion and must line up with
/// `cases` one to one.
MetricReport evaluate(const std::vector<dataset::BenchmarkCase>& cases, SubjectModel& subject,
                      const dsl::RuleSet* rules, oracle::Oracle* oracle, const MetaRegistry& meta,
                      const EvalConfig& cfg = {}, const std::vector<chain::EditBatch>* batches = nullptr);

nlohmann::ordered_json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::ordered_json& j);
void save_report(const MetricReport& report, const std::filesystem::path& path);
MetricReport load_report(const std::filesystem::path& path);

/// Reliability, LG, RE, SA, RS, FF in percent (one decimal).
std::string render_report(const MetricReport& report, const std::string& row_label);

struct DeltaTable {
  std::map<Metric, std::optional<double>> with_rules;
  std::map<Metric, std::optional<double>> without_rules;
  /// with - without, in percentage points.
  std::map<Metric, std::optional<double>> delta;

  std::string render() const;
  nlohmann::ordered_json to_json() const;
};

/// Throws Error when the two reports did not evaluate the same queries.
DeltaTable compare_reports(const MetricReport& with_rules, const MetricReport& without_rules);

}  // namespace chainedit::eval
