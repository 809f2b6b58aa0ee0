#include "chainedit/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>

namespace chainedit::kg {

namespace {

std::uint32_t raw(EntityIndex e) { return static_cast<std::uint32_t>(e); }
std::uint32_t raw(RelationIndex r) { return static_cast<std::uint32_t>(r); }

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool next_data_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

void TripleStore::Builder::add(std::string subject, std::string relation, std::string object) {
  rows_.push_back({std::move(subject), std::move(relation), std::move(object)});
}

void TripleStore::Builder::set_label(std::string id, std::string label) {
  labels_[std::move(id)] = std::move(label);
}

TripleStore TripleStore::Builder::build() && {
  TripleStore store;

  std::vector<std::string> entity_ids;
  std::vector<std::string> relation_ids;
  entity_ids.reserve(rows_.size() * 2);
  relation_ids.reserve(rows_.size());
  for (const auto& t : rows_) {
    entity_ids.push_back(t.subject);
    entity_ids.push_back(t.object);
    relation_ids.push_back(t.relation);
  }
  store.entities_ = sorted_unique(std::move(entity_ids));
  store.relations_ = sorted_unique(std::move(relation_ids));
  for (std::uint32_t i = 0; i < store.entities_.size(); ++i) store.entity_lookup_.emplace(store.entities_[i], i);
  for (std::uint32_t i = 0; i < store.relations_.size(); ++i) store.relation_lookup_.emplace(store.relations_[i], i);

  store.triples_.reserve(rows_.size());
  for (const auto& t : rows_) {
    store.triples_.push_back({EntityIndex{store.entity_lookup_.at(t.subject)},
                              RelationIndex{store.relation_lookup_.at(t.relation)},
                              EntityIndex{store.entity_lookup_.at(t.object)}});
  }
  rows_.clear();
  std::sort(store.triples_.begin(), store.triples_.end());
  store.triples_.erase(std::unique(store.triples_.begin(), store.triples_.end()), store.triples_.end());

  store.labels_ = std::move(labels_);
  for (const auto& id : store.entities_) {
    store.by_label_[store.label(id)].push_back(id);
  }
  for (auto& [label, ids] : store.by_label_) std::sort(ids.begin(), ids.end());

  store.idx_ = build_indexes(store.triples_, store.entities_.size(), store.relations_.size());
  return store;
}

TripleStore::Indexes TripleStore::build_indexes(std::span<const Packed> triples, std::size_t entities,
                                                std::size_t relations) {
  Indexes idx;
  idx.out_offsets.assign(entities + 1, 0);
  idx.in_offsets.assign(entities + 1, 0);
  idx.rel_offsets.assign(relations + 1, 0);
  for (const auto& t : triples) {
    ++idx.out_offsets[raw(t.subject) + 1];
    ++idx.in_offsets[raw(t.object) + 1];
    ++idx.rel_offsets[raw(t.relation) + 1];
  }
  std::partial_sum(idx.out_offsets.begin(), idx.out_offsets.end(), idx.out_offsets.begin());
  std::partial_sum(idx.in_offsets.begin(), idx.in_offsets.end(), idx.in_offsets.begin());
  std::partial_sum(idx.rel_offsets.begin(), idx.rel_offsets.end(), idx.rel_offsets.begin());

  idx.out.resize(triples.size());
  idx.in.resize(triples.size());
  idx.rel.resize(triples.size());
  auto out_fill = std::vector<std::uint32_t>(idx.out_offsets.begin(), idx.out_offsets.end() - 1);
  auto in_fill = std::vector<std::uint32_t>(idx.in_offsets.begin(), idx.in_offsets.end() - 1);
  auto rel_fill = std::vector<std::uint32_t>(idx.rel_offsets.begin(), idx.rel_offsets.end() - 1);
  for (std::uint32_t pos = 0; pos < triples.size(); ++pos) {
    const auto& t = triples[pos];
    idx.out[out_fill[raw(t.subject)]++] = {t.relation, t.object};
    idx.in[in_fill[raw(t.object)]++] = {t.relation, t.subject};
    idx.rel[rel_fill[raw(t.relation)]++] = pos;
  }
  // Triples are sorted by (s, r, o), so out-edges and relation positions are
  // already ordered; in-edges need a per-bucket sort.
  for (std::size_t e = 0; e < entities; ++e) {
    std::sort(idx.in.begin() + idx.in_offsets[e], idx.in.begin() + idx.in_offsets[e + 1]);
  }
  return idx;
}

std::vector<Triple> TripleStore::triples() const {
  std::vector<Triple> out;
  out.reserve(triples_.size());
  for (std::size_t i = 0; i < triples_.size(); ++i) out.push_back(triple_at(i));
  return out;
}

Triple TripleStore::triple_at(std::size_t position) const {
  const auto& t = triples_.at(position);
  return {entity_id(t.subject), relation_id(t.relation), entity_id(t.object)};
}

std::string TripleStore::label(std::string_view id) const {
  if (auto it = labels_.find(std::string(id)); it != labels_.end()) return it->second;
  return std::string(id);
}

std::vector<std::string> TripleStore::ids_for_label(std::string_view label) const {
  if (auto it = by_label_.find(std::string(label)); it != by_label_.end()) return it->second;
  return {};
}

std::optional<EntityIndex> TripleStore::find_entity(std::string_view id) const {
  if (auto it = entity_lookup_.find(std::string(id)); it != entity_lookup_.end()) return EntityIndex{it->second};
  return std::nullopt;
}

std::optional<RelationIndex> TripleStore::find_relation(std::string_view id) const {
  if (auto it = relation_lookup_.find(std::string(id)); it != relation_lookup_.end()) return RelationIndex{it->second};
  return std::nullopt;
}

std::span<const TripleStore::Edge> TripleStore::out_edges(EntityIndex e) const {
  const auto i = raw(e);
  return std::span<const Edge>(idx_.out).subspan(idx_.out_offsets[i], idx_.out_offsets[i + 1] - idx_.out_offsets[i]);
}

std::span<const TripleStore::Edge> TripleStore::in_edges(EntityIndex e) const {
  const auto i = raw(e);
  return std::span<const Edge>(idx_.in).subspan(idx_.in_offsets[i], idx_.in_offsets[i + 1] - idx_.in_offsets[i]);
}

std::span<const std::uint32_t> TripleStore::relation_positions(RelationIndex r) const {
  const auto i = raw(r);
  return std::span<const std::uint32_t>(idx_.rel).subspan(idx_.rel_offsets[i],
                                                          idx_.rel_offsets[i + 1] - idx_.rel_offsets[i]);
}

namespace {

std::vector<std::string> edge_targets(std::span<const TripleStore::Edge> edges, RelationIndex rel,
                                      const TripleStore& store) {
  auto lo = std::lower_bound(edges.begin(), edges.end(), TripleStore::Edge{rel, EntityIndex{0}});
  std::vector<std::string> out;
  for (auto it = lo; it != edges.end() && it->relation == rel; ++it) out.push_back(store.entity_id(it->node));
  return out;
}

}  // namespace

std::vector<std::string> TripleStore::objects_of(std::string_view subject, std::string_view relation) const {
  auto s = find_entity(subject);
  auto r = find_relation(relation);
  if (!s || !r) return {};
  return edge_targets(out_edges(*s), *r, *this);
}

std::vector<std::string> TripleStore::subjects_of(std::string_view relation, std::string_view object) const {
  auto o = find_entity(object);
  auto r = find_relation(relation);
  if (!o || !r) return {};
  return edge_targets(in_edges(*o), *r, *this);
}

std::vector<std::uint32_t> TripleStore::sample_positions(RelationIndex r, std::size_t n, std::uint64_t seed) const {
  auto population = relation_positions(r);
  std::vector<std::uint32_t> pool(population.begin(), population.end());
  if (n >= pool.size()) return pool;
  // Partial Fisher-Yates: the first n slots become the sample.
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<Triple> TripleStore::sample_instances(std::string_view relation, std::size_t n,
                                                  std::uint64_t seed) const {
  auto r = find_relation(relation);
  if (!r || n == 0) return {};
  std::vector<Triple> out;
  for (auto pos : sample_positions(*r, n, seed)) out.push_back(triple_at(pos));
  return out;
}

bool TripleStore::verify_indexes() const {
  if (!std::is_sorted(triples_.begin(), triples_.end()) ||
      std::adjacent_find(triples_.begin(), triples_.end()) != triples_.end()) {
    return false;
  }
  return build_indexes(triples_, entities_.size(), relations_.size()) == idx_;
}

TripleStore ingest(std::istream& triples, std::istream* labels) {
  TripleStore::Builder builder;
  std::string line;
  std::size_t line_no = 0;
  while (next_data_line(triples, line, line_no)) {
    auto cols = text::split(line, '\t');
    if (cols.size() != 3) {
      throw IngestError("triple file line " + std::to_string(line_no) + ": expected 3 tab-separated columns, got " +
                            std::to_string(cols.size()),
                        line_no);
    }
    for (auto& c : cols) {
      c = std::string(text::trim(c));
      if (c.empty()) throw IngestError("triple file line " + std::to_string(line_no) + ": empty column", line_no);
    }
    builder.add(std::move(cols[0]), std::move(cols[1]), std::move(cols[2]));
  }
  if (labels) {
    line_no = 0;
    while (next_data_line(*labels, line, line_no)) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw IngestError("label file line " + std::to_string(line_no) + ": expected id<TAB>label", line_no);
      }
      auto id = text::trim(std::string_view(line).substr(0, tab));
      auto label = text::trim(std::string_view(line).substr(tab + 1));
      if (id.empty() || label.empty()) {
        throw IngestError("label file line " + std::to_string(line_no) + ": empty id or label", line_no);
      }
      builder.set_label(std::string(id), std::string(label));
    }
  }
  return std::move(builder).build();
}

TripleStore ingest(const std::filesystem::path& triples, const std::optional<std::filesystem::path>& labels) {
  std::ifstream tin(triples);
  if (!tin) throw Error("cannot open triple file " + triples.string());
  if (!labels) return ingest(tin, nullptr);
  std::ifstream lin(*labels);
  if (!lin) throw Error("cannot open label file " + labels->string());
  return ingest(tin, &lin);
}

}  // namespace chainedit::kg
