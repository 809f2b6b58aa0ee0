#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chainedit/candidate_rule.hpp"
#include "chainedit/path_expr.hpp"
#include "chainedit/relation_meta.hpp"

namespace chainedit::dsl {

enum class Anchor { S, O };

/// Defines X as "the entity whose {relation} is {anchor}".
struct XBinding {
  std::string relation;
  Anchor anchor = Anchor::S;
  bool operator==(const XBinding&) const = default;
};

/// Executable rule: when an edit's relation equals `trigger`, generate the
/// triple (target_subject, target_relation, target_object).
struct DirectiveRule {
  std::string trigger;
  PathExpr target_subject;
  std::string target_relation;
  PathExpr target_object;
  std::optional<XBinding> x_binding;
  bool enabled = true;
  /// Mined rule this directive was derived from; absent for hand-authored ones.
  std::optional<CandidateRule> provenance;

  bool operator==(const DirectiveRule&) const = default;

  /// Canonical rendering, e.g. "spouse => (X, mother, O) | X = father.S".
  std::string id() const;
  bool uses_x() const;
  /// Throws Error naming the broken invariant.
  void validate() const;
};

/// Directives indexed by trigger relation, in insertion order.
class RuleSet {
 public:
  RuleSet() = default;
  explicit RuleSet(std::vector<DirectiveRule> directives);

  void add(DirectiveRule directive);
  const std::vector<DirectiveRule>& directives() const { return directives_; }
  std::size_t size() const { return directives_.size(); }
  bool empty() const { return directives_.empty(); }
  /// Positions of the directives whose trigger equals `relation`.
  std::span<const std::size_t> positions_for(const std::string& relation) const;
  const std::map<std::string, std::vector<std::size_t>>& index() const { return index_; }
  /// Content hash of the canonical serialization.
  std::string hash() const;

  bool operator==(const RuleSet& other) const { return directives_ == other.directives_; }

 private:
  std::vector<DirectiveRule> directives_;
  std::map<std::string, std::vector<std::size_t>> index_;
};

struct Derivation {
  std::vector<DirectiveRule> directives;
  /// Set when the rule has to be authored by hand (3-hop or mixed-direction bodies).
  std::optional<std::string> not_auto_derivable;
};

/// Turns a mined rule into directives.
///
///   R <- (r1, r2)   gives <r1: (S, R, O.r2)> and <r2: (X, R, O)>, X = r1.S;
///                   a symmetric r1 adds the swapped-anchor <r1: (O, R, S.r2)>
///   R <- inverse r' gives <r': (O, R, S)> and <R: (O, r', S)>
///   R <- (r1)       gives <r1: (S, R, O)>
Derivation derive_directives(const CandidateRule& rule, const MetaRegistry& meta);

/// "If the father of A is B, then the mother of A is the spouse of B".
/// Throws MissingMetaError for any relation without metadata.
std::string verbalize_rule(const CandidateRule& rule, const MetaRegistry& meta);

inline constexpr std::string_view kRuleSetVersion = "chainedit-ruleset/1";

std::string serialize_ruleset(const RuleSet& rules);
RuleSet parse_ruleset(std::string_view text);
void save_ruleset(const RuleSet& rules, const std::filesystem::path& path);
RuleSet load_ruleset(const std::filesystem::path& path);

}  // namespace chainedit::dsl
