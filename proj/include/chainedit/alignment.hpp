#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chainedit/candidate_rule.hpp"
#include "chainedit/oracle.hpp"
#include "chainedit/relation_meta.hpp"

namespace chainedit::alignment {

struct ReportEntry {
  std::string rule_id;
  std::string verbalization;
  std::string rationale;
  oracle::ConfidenceLabel label = oracle::ConfidenceLabel::Uncertain;
  std::string timestamp;

  bool operator==(const ReportEntry&) const = default;
};

struct AlignmentResult {
  std::vector<CandidateRule> accepted;
  /// One entry per candidate, in candidate order.
  std::vector<ReportEntry> report;
};

struct AlignOptions {
  /// JSON-lines report, appended and flushed after every judgment.
  std::optional<std::filesystem::path> report_path;
  /// Judgments in flight at once; the oracle enforces its own rate cap.
  unsigned parallelism = 1;
};

/// Verbalizes every candidate, asks the oracle to judge it once and keeps
/// the rules labelled True or Usually True. On a transport error the report
/// written so far stays on disk and the error propagates.
AlignmentResult align_rules(const std::vector<CandidateRule>& candidates, oracle::Oracle& judge,
                            const MetaRegistry& meta, const AlignOptions& options = {});

/// Continues from a partial report: candidates already judged there are not
/// sent to the oracle again; new judgments are appended to the same file.
AlignmentResult resume_alignment(const std::filesystem::path& partial_report,
                                 const std::vector<CandidateRule>& candidates, oracle::Oracle& judge,
                                 const MetaRegistry& meta, unsigned parallelism = 1);

std::string report_line(const ReportEntry& entry);
/// Throws FormatError naming the 1-based line of the first corrupt entry.
std::vector<ReportEntry> read_report(const std::filesystem::path& path);

}  // namespace chainedit::alignment
