#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "chainedit/candidate_rule.hpp"
#include "chainedit/util.hpp"

namespace chainedit::dsl {

/// S binds the edit subject, O the edit object, X an entity defined by the
/// directive's binding constraint.
enum class PathRoot { S, O, X };

std::string_view to_string(PathRoot root);

/// Dot-path template slot.
///
///   path   := [prefix "."] root ("." relation)*
///   prefix := relation          (one inverse step: "father.S")
///   root   := "S" | "O" | "X"
///
/// Suffix steps are forward hops resolved left to right, so
/// "S.birthplace.country" is the country of the subject's birthplace. A
/// prefix is an inverse hop taken before any suffix: "father.S" is the entity
/// whose father is S. Only steps.front() may be inverse.
struct PathExpr {
  PathRoot root = PathRoot::S;
  std::vector<BodyStep> steps;

  bool operator==(const PathExpr&) const = default;

  bool is_bare() const { return steps.empty(); }
  bool valid() const;
};

class PathParseError : public Error {
 public:
  PathParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Either a complete PathExpr or PathParseError; never a partial result.
PathExpr parse_path(std::string_view text);
/// Canonical text; parse_path(render_path(p)) == p for every valid p.
std::string render_path(const PathExpr& path);

/// Relation tokens: non-empty, none of the root names, and free of '.',
/// whitespace, ',', '(' and ')'.
bool is_relation_token(std::string_view token);

}  // namespace chainedit::dsl
