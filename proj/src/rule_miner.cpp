#include "chainedit/rule_miner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "chainedit/util.hpp"

namespace chainedit {

std::string_view to_string(Direction d) { return d == Direction::forward ? "forward" : "inverse"; }

std::string CandidateRule::key() const {
  std::string out = head + " <-";
  for (std::size_t i = 0; i < body.size(); ++i) {
    out += i ? ", " : " ";
    out += to_string(body[i].direction);
    out += ':';
    out += body[i].relation;
  }
  return out;
}

std::string CandidateRule::to_line() const {
  return key() + " | " + std::to_string(support) + "/" + std::to_string(sample_size);
}

CandidateRule parse_rule_line(std::string_view line) {
  auto fail = [&](const std::string& why) -> CandidateRule {
    throw FormatError("rule \"" + std::string(line) + "\": " + why, 0);
  };
  CandidateRule rule;
  auto arrow = line.find(" <- ");
  auto bar = line.rfind(" | ");
  if (arrow == std::string_view::npos || bar == std::string_view::npos || bar < arrow) {
    return fail("expected 'head <- dir:rel[, dir:rel] | support/sample_size'");
  }
  rule.head = std::string(text::trim(line.substr(0, arrow)));
  if (rule.head.empty()) return fail("empty head");
  for (const auto& part : text::split(line.substr(arrow + 4, bar - arrow - 4), ',')) {
    auto step = text::trim(part);
    auto colon = step.find(':');
    if (colon == std::string_view::npos) return fail("body step without direction");
    auto dir = step.substr(0, colon);
    BodyStep s;
    s.relation = std::string(step.substr(colon + 1));
    if (s.relation.empty()) return fail("body step without relation");
    if (dir == "forward") {
      s.direction = Direction::forward;
    } else if (dir == "inverse") {
      s.direction = Direction::inverse;
    } else {
      return fail("unknown direction '" + std::string(dir) + "'");
    }
    rule.body.push_back(std::move(s));
  }
  if (rule.body.empty() || rule.body.size() > 3) return fail("body must have 1 to 3 steps");
  auto counts = text::trim(line.substr(bar + 3));
  auto slash = counts.find('/');
  if (slash == std::string_view::npos) return fail("expected support/sample_size");
  try {
    std::size_t used = 0;
    auto sup = std::string(counts.substr(0, slash));
    auto tot = std::string(counts.substr(slash + 1));
    rule.support = std::stoul(sup, &used);
    if (used != sup.size()) return fail("bad support");
    rule.sample_size = std::stoul(tot, &used);
    if (used != tot.size()) return fail("bad sample size");
  } catch (const std::logic_error&) {
    return fail("bad support counts");
  }
  if (rule.support > rule.sample_size) return fail("support exceeds sample size");
  return rule;
}

void write_rules(std::ostream& out, const std::vector<CandidateRule>& rules,
                 const std::vector<std::string>& header_comments) {
  for (const auto& c : header_comments) out << "# " << c << '\n';
  for (const auto& r : rules) out << r.to_line() << '\n';
}

std::vector<CandidateRule> read_rules(std::istream& in) {
  std::vector<CandidateRule> rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    try {
      rules.push_back(parse_rule_line(line));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return rules;
}

nlohmann::ordered_json to_json(const CandidateRule& rule) {
  nlohmann::ordered_json body = nlohmann::ordered_json::array();
  for (const auto& s : rule.body) body.push_back({{"relation", s.relation}, {"direction", to_string(s.direction)}});
  return {{"head", rule.head}, {"body", body}, {"support", rule.support}, {"sample_size", rule.sample_size}};
}

CandidateRule rule_from_json(const nlohmann::json& j) {
  CandidateRule rule;
  rule.head = j.at("head").get<std::string>();
  for (const auto& s : j.at("body")) {
    BodyStep step;
    step.relation = s.at("relation").get<std::string>();
    auto dir = s.at("direction").get<std::string>();
    if (dir == "forward") {
      step.direction = Direction::forward;
    } else if (dir == "inverse") {
      step.direction = Direction::inverse;
    } else {
      throw Error("unknown direction '" + dir + "'");
    }
    rule.body.push_back(std::move(step));
  }
  rule.support = j.at("support").get<std::size_t>();
  rule.sample_size = j.at("sample_size").get<std::size_t>();
  return rule;
}

namespace mining {

using kg::EntityIndex;
using kg::RelationIndex;
using kg::TripleStore;

void MiningConfig::validate() const {
  if (sample_n == 0) throw Error("mining: sample_n must be > 0");
  if (gamma && *gamma == 0) throw Error("mining: gamma must be > 0");
  if (max_hops != 2 && max_hops != 3) throw Error("mining: max_hops must be 2 or 3");
  if (degree_cap == 0) throw Error("mining: degree_cap must be > 0");
}

std::size_t MiningConfig::effective_gamma(std::size_t sample_size) const {
  if (gamma) return *gamma;
  auto relative = static_cast<std::size_t>(std::ceil(0.005 * static_cast<double>(sample_size)));
  return std::max<std::size_t>(5, relative);
}

bool rule_order(const CandidateRule& a, const CandidateRule& b) {
  if (a.support != b.support) return a.support > b.support;
  if (a.body != b.body) return a.body < b.body;
  return a.head < b.head;
}

namespace {

/// Relation sequence of a forward path, packed for hashing.
struct PathKey {
  std::uint32_t rel[3] = {0, 0, 0};
  std::uint8_t len = 0;
  bool operator==(const PathKey&) const = default;
  auto operator<=>(const PathKey&) const = default;
};

struct PathKeyHash {
  std::size_t operator()(const PathKey& k) const noexcept {
    std::uint64_t h = k.len;
    for (auto r : k.rel) h = h * 0x100000001b3ULL ^ r;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

RelationIndex require_relation(const TripleStore& store, const std::string& relation) {
  auto r = store.find_relation(relation);
  if (!r) throw Error("unknown relation '" + relation + "'");
  return *r;
}

std::uint32_t raw(RelationIndex r) { return static_cast<std::uint32_t>(r); }

/// Relations r' with (m, r', target) in the store, appended to `out`.
/// out_edges(m) is sorted by (relation, node): binary-search each group.
void closing_relations(const TripleStore& store, EntityIndex m, EntityIndex target,
                       std::vector<RelationIndex>& out) {
  auto edges = store.out_edges(m);
  auto it = edges.begin();
  while (it != edges.end()) {
    auto rel = it->relation;
    auto group_end = std::upper_bound(it, edges.end(), TripleStore::Edge{rel, EntityIndex{UINT32_MAX}});
    if (std::binary_search(it, group_end, TripleStore::Edge{rel, target})) out.push_back(rel);
    it = group_end;
  }
}

std::span<const TripleStore::Edge> capped(std::span<const TripleStore::Edge> edges, std::size_t cap) {
  return edges.first(std::min(edges.size(), cap));
}

std::vector<CandidateRule> finish(const TripleStore& store, const std::string& head,
                                  const std::unordered_map<PathKey, std::size_t, PathKeyHash>& counts,
                                  Direction direction, std::size_t sample_size, std::size_t gamma) {
  std::vector<CandidateRule> rules;
  for (const auto& [key, support] : counts) {
    if (support < gamma) continue;
    CandidateRule rule;
    rule.head = head;
    rule.support = support;
    rule.sample_size = sample_size;
    for (std::uint8_t i = 0; i < key.len; ++i) {
      rule.body.push_back({store.relation_id(RelationIndex{key.rel[i]}), direction});
    }
    rules.push_back(std::move(rule));
  }
  std::sort(rules.begin(), rules.end(), rule_order);
  return rules;
}

}  // namespace

std::vector<CandidateRule> mine_inverse(const TripleStore& store, const std::string& relation,
                                        const MiningConfig& cfg) {
  cfg.validate();
  const auto r = require_relation(store, relation);
  const auto sample = store.sample_positions(r, cfg.sample_n, cfg.seed);
  const auto packed = store.packed();

  std::unordered_map<PathKey, std::size_t, PathKeyHash> counts;
  std::vector<RelationIndex> found;
  for (auto pos : sample) {
    const auto& t = packed[pos];
    found.clear();
    // Back-edges (b, r', a): scan whichever side has the smaller fan-out.
    auto out_b = store.out_edges(t.object);
    auto in_a = store.in_edges(t.subject);
    if (out_b.size() <= in_a.size()) {
      for (const auto& e : out_b) {
        if (e.node == t.subject) found.push_back(e.relation);
      }
    } else {
      for (const auto& e : in_a) {
        if (e.node == t.object) found.push_back(e.relation);
      }
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    for (auto rel : found) {
      PathKey key;
      key.rel[0] = raw(rel);
      key.len = 1;
      ++counts[key];
    }
  }
  return finish(store, relation, counts, Direction::inverse, sample.size(), cfg.effective_gamma(sample.size()));
}

std::vector<CandidateRule> mine_paths(const TripleStore& store, const std::string& relation,
                                      const MiningConfig& cfg) {
  cfg.validate();
  const auto r = require_relation(store, relation);
  const auto sample = store.sample_positions(r, cfg.sample_n, cfg.seed);
  const auto packed = store.packed();

  std::unordered_map<PathKey, std::size_t, PathKeyHash> counts;
  std::vector<PathKey> paths;
  std::vector<RelationIndex> closing;
  for (auto pos : sample) {
    const auto& t = packed[pos];
    paths.clear();
    for (const auto& hop1 : capped(store.out_edges(t.subject), cfg.degree_cap)) {
      closing.clear();
      closing_relations(store, hop1.node, t.object, closing);
      for (auto last : closing) {
        PathKey key;
        key.rel[0] = raw(hop1.relation);
        key.rel[1] = raw(last);
        key.len = 2;
        paths.push_back(key);
      }
      if (cfg.max_hops < 3) continue;
      for (const auto& hop2 : capped(store.out_edges(hop1.node), cfg.degree_cap)) {
        closing.clear();
        closing_relations(store, hop2.node, t.object, closing);
        for (auto last : closing) {
          PathKey key;
          key.rel[0] = raw(hop1.relation);
          key.rel[1] = raw(hop2.relation);
          key.rel[2] = raw(last);
          key.len = 3;
          paths.push_back(key);
        }
      }
    }
    // Once per instance, however many intermediate entities realise it.
    std::sort(paths.begin(), paths.end());
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    for (const auto& key : paths) {
      if (key.len == 1 && key.rel[0] == raw(r)) continue;  // trivial self-path
      ++counts[key];
    }
  }
  return finish(store, relation, counts, Direction::forward, sample.size(), cfg.effective_gamma(sample.size()));
}

std::vector<CandidateRule> mine_all(const TripleStore& store, const std::vector<std::string>& targets,
                                    const MiningConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<CandidateRule>> per_target(targets.size());
  std::vector<std::exception_ptr> errors(targets.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (auto i = next++; i < targets.size(); i = next++) {
      try {
        auto inverse = mine_inverse(store, targets[i], cfg);
        auto paths = mine_paths(store, targets[i], cfg);
        inverse.insert(inverse.end(), std::make_move_iterator(paths.begin()), std::make_move_iterator(paths.end()));
        per_target[i] = std::move(inverse);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(1, targets.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error("mining target '" + targets[i] + "': " + e.what());
    }
  }

  std::vector<CandidateRule> merged;
  std::unordered_set<std::string> seen;
  for (auto& rules : per_target) {
    for (auto& rule : rules) {
      if (seen.insert(rule.key()).second) merged.push_back(std::move(rule));
    }
  }
  return merged;
}

}  // namespace mining
}  // namespace chainedit
