#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chainedit/util.hpp"

namespace chainedit::kg {

/// Dense handles into a TripleStore. Indices are assigned in sorted id order,
/// so comparing handles compares ids.
enum class EntityIndex : std::uint32_t {};
enum class RelationIndex : std::uint32_t {};

struct Entity {
  std::string id;
  std::string label;
};

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  auto operator<=>(const Triple&) const = default;
};

class IngestError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Immutable indexed set of (subject, relation, object) facts.
///
/// Three indexes are kept as CSR projections of the packed triple array:
/// by subject (edges sorted by relation then object), by object (sorted by
/// relation then subject) and by relation (triple positions in (s, r, o)
/// order). Lookups return ids in sorted order.
class TripleStore {
 public:
  struct Packed {
    EntityIndex subject;
    RelationIndex relation;
    EntityIndex object;
    auto operator<=>(const Packed&) const = default;
  };

  struct Edge {
    RelationIndex relation;
    EntityIndex node;
    auto operator<=>(const Edge&) const = default;
  };

  class Builder {
   public:
    void add(std::string subject, std::string relation, std::string object);
    void set_label(std::string id, std::string label);
    TripleStore build() &&;

   private:
    std::vector<Triple> rows_;
    std::unordered_map<std::string, std::string> labels_;
  };

  TripleStore() = default;

  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }
  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }

  /// All facts in (subject, relation, object) id order.
  std::vector<Triple> triples() const;
  Triple triple_at(std::size_t position) const;

  std::vector<std::string> relations() const { return relations_; }
  bool has_relation(std::string_view id) const { return find_relation(id).has_value(); }
  bool has_entity(std::string_view id) const { return find_entity(id).has_value(); }

  /// Display label for an entity or relation id; the id itself when unlabeled.
  std::string label(std::string_view id) const;
  Entity entity(std::string_view id) const { return {std::string(id), label(id)}; }
  /// Entity ids whose label (or id) equals `label`, sorted.
  std::vector<std::string> ids_for_label(std::string_view label) const;

  std::vector<std::string> objects_of(std::string_view subject, std::string_view relation) const;
  std::vector<std::string> subjects_of(std::string_view relation, std::string_view object) const;

  /// min(n, population) distinct facts with relation `relation`, drawn
  /// uniformly without replacement; identical (n, seed) give identical output.
  /// Returned in store order.
  std::vector<Triple> sample_instances(std::string_view relation, std::size_t n,
                                       std::uint64_t seed) const;

  // Dense access used by the miner.
  std::optional<EntityIndex> find_entity(std::string_view id) const;
  std::optional<RelationIndex> find_relation(std::string_view id) const;
  const std::string& entity_id(EntityIndex e) const { return entities_[static_cast<std::uint32_t>(e)]; }
  const std::string& relation_id(RelationIndex r) const { return relations_[static_cast<std::uint32_t>(r)]; }
  std::span<const Packed> packed() const { return triples_; }
  std::span<const Edge> out_edges(EntityIndex e) const;
  std::span<const Edge> in_edges(EntityIndex e) const;
  /// Positions into packed() of every fact with the given relation.
  std::span<const std::uint32_t> relation_positions(RelationIndex r) const;
  std::vector<std::uint32_t> sample_positions(RelationIndex r, std::size_t n,
                                              std::uint64_t seed) const;

  /// Rebuilds every index from the packed triples and compares; true when
  /// the stored indexes are exact projections of the triple set.
  bool verify_indexes() const;

 private:
  struct Indexes {
    std::vector<std::uint32_t> out_offsets;
    std::vector<Edge> out;
    std::vector<std::uint32_t> in_offsets;
    std::vector<Edge> in;
    std::vector<std::uint32_t> rel_offsets;
    std::vector<std::uint32_t> rel;
    bool operator==(const Indexes&) const = default;
  };

  static Indexes build_indexes(std::span<const Packed> triples, std::size_t entities,
                               std::size_t relations);

  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::uint32_t> entity_lookup_;
  std::unordered_map<std::string, std::uint32_t> relation_lookup_;
  std::unordered_map<std::string, std::string> labels_;
  std::unordered_map<std::string, std::vector<std::string>> by_label_;
  std::vector<Packed> triples_;
  Indexes idx_;
};

/// Reads `subject<TAB>relation<TAB>object` rows (`#` comments and blank
/// lines skipped) and optional `id<TAB>label` rows.
TripleStore ingest(std::istream& triples, std::istream* labels = nullptr);
TripleStore ingest(const std::filesystem::path& triples,
                   const std::optional<std::filesystem::path>& labels = std::nullopt);

}  // namespace chainedit::kg
