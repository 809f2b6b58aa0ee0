#pragma once

#include <compare>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chainedit/directive_rule.hpp"
#include "chainedit/oracle.hpp"
#include "chainedit/relation_meta.hpp"

namespace chainedit::chain {

/// Grounded (subject, relation, object) over entity labels.
struct Fact {
  std::string subject;
  std::string relation;
  std::string object;

  auto operator<=>(const Fact&) const = default;
  std::string to_string() const { return "(" + subject + ", " + relation + ", " + object + ")"; }
};

struct EditRequest {
  std::string subject;
  std::string relation;
  std::string new_object;

  bool operator==(const EditRequest&) const = default;
  Fact fact() const { return {subject, relation, new_object}; }
  void validate() const;
  /// "subject|relation|object".
  static EditRequest parse(std::string_view literal);
};

/// One oracle exchange made while resolving a directive.
struct QueryRecord {
  std::string prompt;
  oracle::OracleAnswer answer;
  bool operator==(const QueryRecord&) const = default;
};

struct DerivedEdit {
  Fact triple;
  std::string directive_id;
  std::vector<QueryRecord> resolved_queries;
  /// Expansion level that produced this edit; 1 for direct consequences.
  int depth = 1;
  bool operator==(const DerivedEdit&) const = default;
};

struct SkippedDirective {
  std::string directive_id;
  std::string reason;
  bool operator==(const SkippedDirective&) const = default;
};

/// The original edit plus everything derived from it. Applied as one unit.
struct EditBatch {
  EditRequest original;
  std::vector<DerivedEdit> derived;
  std::vector<SkippedDirective> skipped;

  bool operator==(const EditBatch&) const = default;
  /// Original first, then derived edits in derivation order.
  std::vector<Fact> facts() const;
};

enum class ConflictPolicy { drop_derived, error };

struct ExpansionConfig {
  int depth = 1;
  ConflictPolicy conflict_policy = ConflictPolicy::drop_derived;
  bool include_disabled_dual_paths = false;
  /// Drop derived edits whose object the oracle already believes.
  bool skip_noop = false;

  void validate() const;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Directives triggered by the edit's relation, in ruleset order. Disabled
/// directives are included only on request.
std::vector<const dsl::DirectiveRule*> match_rules(const EditRequest& edit, const dsl::RuleSet& rules,
                                                   bool include_disabled = false);

/// A template slot after S/O substitution: an entity plus the hops still to
/// be resolved through the oracle.
struct PendingSlot {
  std::string start;
  std::vector<BodyStep> steps;
  bool grounded() const { return steps.empty(); }
};

struct Substitution {
  std::string directive_id;
  PendingSlot subject;
  std::string relation;
  PendingSlot object;
};

/// Binds S and O to the edit. An X slot becomes an inverse hop through the
/// X binding from its anchor, followed by the slot's own steps.
Substitution substitute(const dsl::DirectiveRule& directive, const EditRequest& edit);

using Resolution = std::variant<DerivedEdit, SkippedDirective>;

/// Walks every pending hop left to right, feeding each answer into the next
/// query. The first unknown or refused answer skips the directive with reason
/// "<status>_at_step(<relation>)". Transport errors propagate.
Resolution resolve(const Substitution& substitution, oracle::Oracle& oracle, const MetaRegistry& meta);

/// match -> substitute -> resolve for every triggered directive, then
/// deduplicate and apply the conflict policy. Every query goes to the oracle
/// in its pre-edit state. With depth > 1 the derived edits are expanded again;
/// a visited set stops cycles and re-derivation of the original edit.
EditBatch expand(const EditRequest& edit, const dsl::RuleSet& rules, oracle::Oracle& oracle,
                 const MetaRegistry& meta, const ExpansionConfig& cfg = {});

inline constexpr std::string_view kBatchVersion = "chainedit-batch/1";

/// JSON lines: original (carrying the version), derived..., skipped...
std::string serialize_batch(const EditBatch& batch);
EditBatch parse_batch(std::string_view text);
void emit_batch(const EditBatch& batch, const std::filesystem::path& path);
EditBatch load_batch(const std::filesystem::path& path);
/// Several batches concatenated, each starting at its "original" line.
std::vector<EditBatch> load_batches(const std::filesystem::path& path);

/// The same entries as one JSON array, for the subject-model protocol.
nlohmann::ordered_json batch_entries(const EditBatch& batch);
EditBatch batch_from_entries(const nlohmann::json& entries);

}  // namespace chainedit::chain
