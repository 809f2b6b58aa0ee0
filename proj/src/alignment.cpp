#include "chainedit/alignment.hpp"

#include <json.hpp>

#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "chainedit/directive_rule.hpp"

namespace chainedit::alignment {

std::string report_line(const ReportEntry& e) {
  nlohmann::ordered_json j;
  j["rule_id"] = e.rule_id;
  j["verbalization"] = e.verbalization;
  j["rationale"] = e.rationale;
  j["label"] = oracle::to_string(e.label);
  j["timestamp"] = e.timestamp;
  return j.dump();
}

std::vector<ReportEntry> read_report(const std::filesystem::path& path) {
  std::vector<ReportEntry> entries;
  if (!std::filesystem::exists(path)) return entries;
  std::size_t line_no = 0;
  for (const auto& line : text::split(read_file(path), '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ReportEntry e;
      e.rule_id = j.at("rule_id").get<std::string>();
      e.verbalization = j.at("verbalization").get<std::string>();
      e.rationale = j.at("rationale").get<std::string>();
      auto label = oracle::parse_label(j.at("label").get<std::string>());
      if (!label) throw Error("unknown label");
      e.label = *label;
      e.timestamp = j.value("timestamp", std::string());
      entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw FormatError("alignment report " + path.string() + " line " + std::to_string(line_no) + ": " + ex.what(),
                        line_no);
    }
  }
  return entries;
}

namespace {

AlignmentResult run(const std::vector<CandidateRule>& candidates, oracle::Oracle& judge, const MetaRegistry& meta,
                    std::map<std::string, ReportEntry> known, const std::optional<std::filesystem::path>& report_path,
                    bool append, unsigned parallelism) {
  std::set<std::string> keys;
  std::vector<std::string> verbalized;
  for (const auto& c : candidates) {
    if (!keys.insert(c.key()).second) throw Error("align: duplicate candidate rule " + c.key());
    verbalized.push_back(dsl::verbalize_rule(c, meta));
  }

  std::ofstream report;
  if (report_path) {
    if (report_path->has_parent_path()) std::filesystem::create_directories(report_path->parent_path());
    report.open(*report_path, append ? std::ios::app : std::ios::trunc);
    if (!report) throw Error("cannot write alignment report " + report_path->string());
  }

  std::vector<std::optional<ReportEntry>> slots(candidates.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (auto it = known.find(candidates[i].key()); it != known.end()) {
      slots[i] = it->second;
    } else {
      pending.push_back(i);
    }
  }

  std::mutex write_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;

  auto worker = [&] {
    while (!failed) {
      auto k = next++;
      if (k >= pending.size()) return;
      auto i = pending[k];
      try {
        auto judgment = judge.judge_rule(verbalized[i]);
        ReportEntry entry{candidates[i].key(), verbalized[i], judgment.rationale, judgment.label, timestamp_now()};
        std::lock_guard lock(write_mutex);
        if (report.is_open()) report << report_line(entry) << '\n' << std::flush;
        slots[i] = std::move(entry);
      } catch (...) {
        std::lock_guard lock(write_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  auto n_threads = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(pending.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  AlignmentResult result;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (oracle::endorses(slots[i]->label)) result.accepted.push_back(candidates[i]);
    result.report.push_back(std::move(*slots[i]));
  }
  return result;
}

}  // namespace

AlignmentResult align_rules(const std::vector<CandidateRule>& candidates, oracle::Oracle& judge,
                            const MetaRegistry& meta, const AlignOptions& options) {
  return run(candidates, judge, meta, {}, options.report_path, false, options.parallelism);
}

AlignmentResult resume_alignment(const std::filesystem::path& partial_report,
                                 const std::vector<CandidateRule>& candidates, oracle::Oracle& judge,
                                 const MetaRegistry& meta, unsigned parallelism) {
  std::map<std::string, ReportEntry> known;
  for (auto& e : read_report(partial_report)) known.insert_or_assign(e.rule_id, std::move(e));
  return run(candidates, judge, meta, std::move(known), partial_report, true, parallelism);
}

}  // namespace chainedit::alignment
