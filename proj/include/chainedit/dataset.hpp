#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chainedit/chain_engine.hpp"

namespace chainedit::dataset {

enum class Metric { Reliability, LG, RE, SA, RS, FF };

inline constexpr Metric kAllMetrics[] = {Metric::Reliability, Metric::LG, Metric::RE,
                                         Metric::SA,          Metric::RS, Metric::FF};

/// Short column name: "Reliability", "LG", "RE", "SA", "RS", "FF".
std::string_view to_string(Metric m);
/// Key used when writing case files.
std::string_view file_key(Metric m);
/// Accepts short names and the benchmark's long keys. Both compositionality
/// tags map to RE.
std::optional<Metric> parse_metric(std::string_view tag);

enum class VariantKind { original, filtered, replaced, in_prompt };

std::string_view to_string(VariantKind v);
VariantKind parse_variant(std::string_view s);

/// An intermediate fact the query's gold answer depends on.
struct ChainFact {
  std::string subject;
  std::string relation;
  std::string expected_object;
  bool operator==(const ChainFact&) const = default;
};

struct TestQuery {
  Metric metric = Metric::Reliability;
  std::string prompt;
  std::vector<std::string> gold_aliases;
  std::vector<ChainFact> chain;
  bool operator==(const TestQuery&) const = default;
};

struct BenchmarkCase {
  std::string case_id;
  chain::EditRequest edit;
  /// The edit as a sentence, when the source file has one.
  std::string edit_prompt;
  std::vector<TestQuery> queries;
  VariantKind variant = VariantKind::original;

  bool operator==(const BenchmarkCase&) const = default;
  std::size_t count(Metric m) const;
};

/// Schema violation in a case file. The message names the case index and the
/// JSON path of the offending field.
class SchemaError : public FormatError {
 public:
  SchemaError(std::size_t case_index, const std::string& field_path, const std::string& what);
  const std::string& field_path() const noexcept { return field_path_; }

 private:
  std::string field_path_;
};

std::vector<BenchmarkCase> parse_cases(const nlohmann::json& doc);
std::vector<BenchmarkCase> load_cases(const std::filesystem::path& path);

nlohmann::ordered_json case_to_json(const BenchmarkCase& c);
nlohmann::ordered_json cases_to_json(const std::vector<BenchmarkCase>& cases);
void save_cases(const std::vector<BenchmarkCase>& cases, const std::filesystem::path& path);

}  // namespace chainedit::dataset
