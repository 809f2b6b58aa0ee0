#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace chainedit {

enum class Direction { forward, inverse };

std::string_view to_string(Direction d);

/// One hop of a rule body or path expression.
struct BodyStep {
  std::string relation;
  Direction direction = Direction::forward;

  auto operator<=>(const BodyStep&) const = default;
};

/// Mined rule `head <- body` with its support over the sampled head facts.
struct CandidateRule {
  std::string head;
  std::vector<BodyStep> body;
  std::size_t support = 0;
  std::size_t sample_size = 0;

  bool operator==(const CandidateRule&) const = default;

  /// "head <- forward:r1, forward:r2"; identifies the rule independent of support.
  std::string key() const;
  /// "head <- forward:r1, forward:r2 | support/sample_size".
  std::string to_line() const;
};

/// Parses a `to_line()` rendering. Throws FormatError (location 0).
CandidateRule parse_rule_line(std::string_view line);

/// One rule per line; lines starting with '#' carry metadata and are skipped
/// on read. Errors name the 1-based line.
void write_rules(std::ostream& out, const std::vector<CandidateRule>& rules,
                 const std::vector<std::string>& header_comments = {});
std::vector<CandidateRule> read_rules(std::istream& in);

nlohmann::ordered_json to_json(const CandidateRule& rule);
CandidateRule rule_from_json(const nlohmann::json& j);

}  // namespace chainedit
