#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chainedit/dataset.hpp"
#include "chainedit/oracle.hpp"
#include "chainedit/relation_meta.hpp"

namespace chainedit::dataset {

struct BuildOptions {
  /// JSON lines, one record per query: kept / dropped / rewritten / unchanged.
  std::optional<std::filesystem::path> decision_log;
  /// Finished cases are appended here as they complete. If the file exists
  /// when a build starts, those cases are reused instead of re-queried; it is
  /// removed once the build finishes.
  std::optional<std::filesystem::path> progress_file;
};

/// Keeps a chained query only if the oracle confirms every fact of its chain.
std::vector<BenchmarkCase> build_filtered(const std::vector<BenchmarkCase>& cases, oracle::Oracle& oracle,
                                          const MetaRegistry& meta, const BuildOptions& options = {});

/// Re-walks each chain through the oracle and replaces the gold answer with
/// the oracle's terminal answer. Queries whose walk hits an unknown or refused
/// answer are dropped.
std::vector<BenchmarkCase> build_replaced(const std::vector<BenchmarkCase>& cases, oracle::Oracle& oracle,
                                          const MetaRegistry& meta, const BuildOptions& options = {});

/// Prefixes chained prompts with their verbalized chain facts. No oracle.
std::vector<BenchmarkCase> build_in_prompt(const std::vector<BenchmarkCase>& cases, const MetaRegistry& meta,
                                           const BuildOptions& options = {});

/// "Given the following information: <facts>; Complete the following sentence: <prompt>"
std::string in_prompt_text(const std::vector<ChainFact>& chain, const std::string& prompt, const MetaRegistry& meta);

/// Whether two chain answers agree after normalization, ignoring case.
bool answers_match(const std::string& answer, const std::string& expected);

}  // namespace chainedit::dataset
