#include "testkit.hpp"

#include <set>

namespace testkit {

kg::TripleStore make_store(const std::vector<RawTriple>& triples) {
  kg::TripleStore::Builder b;
  for (const auto& [s, r, o] : triples) b.add(s, r, o);
  return std::move(b).build();
}

std::shared_ptr<const kg::TripleStore> share(const std::vector<RawTriple>& triples) {
  return std::make_shared<const kg::TripleStore>(make_store(triples));
}

std::filesystem::path source_dir() { return CHAINEDIT_SOURCE_DIR; }

std::filesystem::path fixture(const std::string& relative) { return source_dir() / "tests" / "fixtures" / relative; }

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("chainedit-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<RawTriple> random_triples(std::uint64_t seed, std::size_t triples, std::size_t entities,
                                      std::size_t relations) {
  SplitMix64 rng(seed);
  std::set<RawTriple> out;
  for (std::size_t i = 0; i < triples; ++i) {
    out.insert({"e" + std::to_string(rng.below(entities)), "r" + std::to_string(rng.below(relations)),
                "e" + std::to_string(rng.below(entities))});
  }
  return {out.begin(), out.end()};
}

// ---- brute force ---------------------------------------------------------

namespace {

std::set<RawTriple> unique_triples(const std::vector<RawTriple>& triples) { return {triples.begin(), triples.end()}; }

std::map<std::string, std::vector<RawTriple>> by_subject(const std::set<RawTriple>& triples) {
  std::map<std::string, std::vector<RawTriple>> out;
  for (const auto& t : triples) out[t[0]].push_back(t);
  return out;
}

std::string rule_key(const std::string& head, const std::vector<std::string>& body, Direction dir) {
  CandidateRule r;
  r.head = head;
  for (const auto& b : body) r.body.push_back({b, dir});
  return r.key();
}

std::map<std::string, std::size_t> threshold(std::map<std::string, std::size_t> counts, std::size_t gamma) {
  std::erase_if(counts, [gamma](const auto& kv) { return kv.second < gamma; });
  return counts;
}

}  // namespace

std::map<std::string, std::size_t> brute_force_inverse(const std::vector<RawTriple>& triples,
                                                       const std::string& head, std::size_t gamma) {
  auto all = unique_triples(triples);
  std::map<std::string, std::size_t> counts;
  for (const auto& t : all) {
    if (t[1] != head) continue;
    std::set<std::string> found;
    for (const auto& u : all) {
      if (u[0] == t[2] && u[2] == t[0]) found.insert(u[1]);
    }
    for (const auto& r : found) ++counts[rule_key(head, {r}, Direction::inverse)];
  }
  return threshold(std::move(counts), gamma);
}

std::map<std::string, std::size_t> brute_force_paths(const std::vector<RawTriple>& triples,
                                                     const std::string& head, std::size_t gamma, int max_hops) {
  auto all = unique_triples(triples);
  auto out = by_subject(all);
  auto edges = [&](const std::string& s) -> const std::vector<RawTriple>& {
    static const std::vector<RawTriple> none;
    auto it = out.find(s);
    return it == out.end() ? none : it->second;
  };
  std::map<std::string, std::size_t> counts;
  for (const auto& t : all) {
    if (t[1] != head) continue;
    const auto& a = t[0];
    const auto& b = t[2];
    std::set<std::vector<std::string>> found;
    for (const auto& h1 : edges(a)) {
      for (const auto& h2 : edges(h1[2])) {
        if (h2[2] == b) found.insert({h1[1], h2[1]});
        if (max_hops < 3) continue;
        for (const auto& h3 : edges(h2[2])) {
          if (h3[2] == b) found.insert({h1[1], h2[1], h3[1]});
        }
      }
    }
    for (const auto& path : found) ++counts[rule_key(head, path, Direction::forward)];
  }
  return threshold(std::move(counts), gamma);
}

std::map<std::string, std::size_t> as_support_map(const std::vector<CandidateRule>& rules) {
  std::map<std::string, std::size_t> out;
  for (const auto& r : rules) out[r.key()] = r.support;
  return out;
}

bool body_connects(const std::vector<RawTriple>& triples, const CandidateRule& rule, const std::string& x,
                   const std::string& y) {
  std::set<std::string> frontier{x};
  for (const auto& step : rule.body) {
    std::set<std::string> next;
    for (const auto& [s, r, o] : triples) {
      if (r != step.relation) continue;
      if (step.direction == Direction::forward && frontier.contains(s)) next.insert(o);
      if (step.direction == Direction::inverse && frontier.contains(o)) next.insert(s);
    }
    frontier = std::move(next);
  }
  return frontier.contains(y);
}

// ---- generators ----------------------------------------------------------

dsl::PathExpr random_path(SplitMix64& rng, std::size_t relations, bool allow_x) {
  static const std::vector<std::string> shapes = {"rel", "birth_place", "P", "country-of", "x"};
  auto token = [&] {
    return shapes[rng.below(shapes.size())] + std::to_string(rng.below(relations));
  };
  dsl::PathExpr p;
  p.root = static_cast<dsl::PathRoot>(rng.below(allow_x ? 3 : 2));
  auto n = rng.below(5);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto dir = (i == 0 && rng.below(3) == 0) ? Direction::inverse : Direction::forward;
    p.steps.push_back({token(), dir});
  }
  return p;
}

dsl::DirectiveRule random_directive(SplitMix64& rng, std::size_t relations) {
  auto rel = [&] { return "r" + std::to_string(rng.below(relations)); };
  auto slot = [&] {
    dsl::PathExpr p;
    p.root = static_cast<dsl::PathRoot>(rng.below(3));
    auto n = rng.below(3);
    for (std::uint64_t i = 0; i < n; ++i) {
      p.steps.push_back({rel(), (i == 0 && rng.below(4) == 0) ? Direction::inverse : Direction::forward});
    }
    return p;
  };
  dsl::DirectiveRule d;
  d.trigger = rel();
  d.target_subject = slot();
  d.target_relation = rel();
  d.target_object = slot();
  if (d.uses_x()) d.x_binding = dsl::XBinding{rel(), rng.below(2) ? dsl::Anchor::S : dsl::Anchor::O};
  d.enabled = rng.below(8) != 0;
  return d;
}

MetaRegistry nominal_meta(std::size_t relations, const std::string& prefix) {
  MetaRegistry m;
  for (std::size_t i = 0; i < relations; ++i) m.add(RelationMeta::nominal(prefix + std::to_string(i)));
  return m;
}

MetaRegistry family_meta() {
  MetaRegistry m;
  m.add(RelationMeta::nominal("father"));
  m.add(RelationMeta::nominal("mother"));
  m.add(RelationMeta::nominal("spouse", "", true));
  m.add(RelationMeta::nominal("sibling", "", true));
  m.add(RelationMeta::nominal("child"));
  m.add(RelationMeta::nominal("birthplace"));
  m.add(RelationMeta::nominal("occupation"));
  return m;
}

CandidateRule mother_rule() {
  return {"mother", {{"father", Direction::forward}, {"spouse", Direction::forward}}, 1, 1};
}

dsl::RuleSet family_ruleset() {
  auto derivation = dsl::derive_directives(mother_rule(), family_meta());
  return dsl::RuleSet(derivation.directives);
}

// ---- synthetic benchmarks ------------------------------------------------

VariantSuite variant_suite(std::size_t n_cases, std::uint64_t seed) {
  VariantSuite s;
  s.meta.add(RelationMeta::nominal("educated_at", "university"));
  s.meta.add(RelationMeta::nominal("located_in", "city"));
  s.meta.add(RelationMeta::nominal("country"));
  s.meta.add(RelationMeta::nominal("birthplace"));

  SplitMix64 rng(seed);
  for (std::size_t k = 0; k < n_cases; ++k) {
    auto id = std::to_string(k);
    std::string person = "Person" + id, uni = "University" + id, city = "City" + id, elsewhere = "Elsewhere" + id,
                nation = "Nation" + id, other_nation = "OtherNation" + id;
    // 0 agree, 1 the oracle places the university elsewhere, 2 the oracle does not know
    auto roll = rng.below(20);
    int kind = roll < 11 ? 0 : roll < 16 ? 1 : 2;
    if (k == 0) kind = 1;
    if (k == 1) kind = 2;

    s.oracle_triples.push_back({person, "birthplace", "Town" + id});
    s.oracle_triples.push_back({city, "country", nation});
    s.oracle_triples.push_back({elsewhere, "country", other_nation});
    if (kind == 0) s.oracle_triples.push_back({uni, "located_in", city});
    if (kind == 1) s.oracle_triples.push_back({uni, "located_in", elsewhere});

    dataset::BenchmarkCase c;
    c.case_id = "variant-" + id;
    c.edit = {person, "educated_at", uni};
    c.edit_prompt = "The university of " + person + " is " + uni;
    c.queries.push_back({dataset::Metric::Reliability, "The university of " + person + " is", {uni}, {}});

    dataset::TestQuery lg{dataset::Metric::LG, "The city of the university of " + person + " is", {city},
                          {{uni, "located_in", city}}};
    c.queries.push_back(lg);
    ++s.chained_queries;
    bool two_hop = k % 2 == 0;
    dataset::TestQuery re{dataset::Metric::RE,
                          "The country of the city of the university of " + person + " is",
                          {nation},
                          {{uni, "located_in", city}, {city, "country", nation}}};
    if (two_hop) {
      c.queries.push_back(re);
      ++s.chained_queries;
    }
    c.queries.push_back({dataset::Metric::RS, "The birthplace of " + person + " is", {"Town" + id}, {}});

    std::size_t chained_here = two_hop ? 2 : 1;
    if (kind == 0) {
      s.replaced_gold[lg.prompt] = city;
      if (two_hop) s.replaced_gold[re.prompt] = nation;
    } else {
      s.disagreeing_prompts.insert(lg.prompt);
      if (two_hop) s.disagreeing_prompts.insert(re.prompt);
      if (kind == 1) {
        s.planted_disagreements += chained_here;
        s.replaced_gold[lg.prompt] = elsewhere;
        if (two_hop) s.replaced_gold[re.prompt] = other_nation;
      } else {
        s.planted_unknown += chained_here;
      }
    }
    s.cases.push_back(std::move(c));
  }
  return s;
}

FamilySuite family_suite(std::size_t n_cases) {
  FamilySuite s;
  for (std::size_t k = 0; k < n_cases; ++k) {
    auto id = std::to_string(k);
    std::string child = "Child" + id, father = "Father" + id, mother = "Mother" + id, new_father = "NewFather" + id,
                new_mother = "NewMother" + id, town = "Town" + id, job = "Job" + id;
    // A few edits leave the mother unchanged, so the unedited base already answers LG.
    bool same_mother = k % 20 == 0;
    s.triples.push_back({child, "father", father});
    s.triples.push_back({child, "mother", mother});
    s.triples.push_back({father, "spouse", mother});
    s.triples.push_back({child, "birthplace", town});
    s.triples.push_back({father, "occupation", job});
    s.triples.push_back({new_father, "spouse", same_mother ? mother : new_mother});

    s.aliases["Little " + child] = child;
    s.aliases["Little " + father] = father;

    dataset::BenchmarkCase c;
    c.case_id = "family-" + id;
    using dataset::Metric;
    if (k % 2 == 0 || same_mother) {
      // new father: the mother becomes the new father's spouse
      c.edit = {child, "father", new_father};
      std::string expected_mother = same_mother ? mother : new_mother;
      c.queries.push_back({Metric::Reliability, "The father of " + child + " is", {new_father}, {}});
      c.queries.push_back({Metric::LG, "The mother of " + child + " is", {expected_mother},
                           {{new_father, "spouse", expected_mother}}});
      c.queries.push_back({Metric::SA, "The father of Little " + child + " is", {new_father}, {}});
      c.queries.push_back({Metric::RS, "The birthplace of " + child + " is", {town}, {}});
      c.queries.push_back({Metric::FF, "The spouse of " + new_father + " is", {expected_mother}, {}});
      if (same_mother) ++s.base_answerable_lg;
    } else {
      // new spouse for the father: the child's mother follows
      c.edit = {father, "spouse", new_mother};
      c.queries.push_back({Metric::Reliability, "The spouse of " + father + " is", {new_mother}, {}});
      c.queries.push_back({Metric::LG, "The mother of " + child + " is", {new_mother}, {}});
      c.queries.push_back({Metric::SA, "The spouse of Little " + father + " is", {new_mother}, {}});
      c.queries.push_back({Metric::RS, "The occupation of " + father + " is", {job}, {}});
      c.queries.push_back({Metric::FF, "The father of " + child + " is", {father}, {}});
    }
    s.cases.push_back(std::move(c));
  }
  return s;
}

AlignmentSuite alignment_suite() {
  AlignmentSuite s;
  for (const auto* rel : {"father", "mother", "spouse", "child", "sibling", "country", "continent", "birthplace",
                          "nationality", "occupation", "employer"}) {
    s.meta.add(RelationMeta::nominal(rel, "", std::string_view(rel) == "spouse"));
  }
  s.meta.add(RelationMeta::verbal("mentored"));
  s.meta.add(RelationMeta::nominal("advisor"));

  auto path2 = [](std::string head, std::string r1, std::string r2, std::size_t support) {
    return CandidateRule{std::move(head),
                         {{std::move(r1), Direction::forward}, {std::move(r2), Direction::forward}},
                         support,
                         100};
  };
  auto inverse = [](std::string head, std::string r, std::size_t support) {
    return CandidateRule{std::move(head), {{std::move(r), Direction::inverse}}, support, 100};
  };
  struct Row {
    CandidateRule rule;
    std::optional<std::string> response;
    bool endorsed;
  };
  std::vector<Row> rows = {
      {path2("sibling", "father", "child", 40), "The sibling of an person is his father's child. Answer: True", true},
      {path2("continent", "country", "continent", 35),
       "The continent of a location is usually the same as the continent of the country location belongs to. "
       "Answer: Usually True", true},
      {path2("mother", "father", "spouse", 30), "A child's mother is normally married to the father. Answer: True", true},
      {path2("nationality", "birthplace", "country", 28),
       "People often but not always hold the nationality of their birth country. Answer: Sometimes True", false},
      {inverse("spouse", "sibling", 12), "Siblings are not spouses. Answer: False", false},
      {path2("occupation", "father", "occupation", 9), "Hard to say. Answer: Uncertain", false},
      {inverse("child", "father", 50), "If B is the father of A then A is a child of B. Answer: true", true},
      {path2("employer", "spouse", "employer", 7), std::nullopt, false},
      {inverse("advisor", "mentored", 6), "A mentor usually acts as an advisor.", false},
      {path2("continent", "birthplace", "continent", 5), "Answer: usually true", true},
  };
  for (auto& row : rows) {
    if (row.response) s.judge_table[dsl::verbalize_rule(row.rule, s.meta)] = *row.response;
    if (row.endorsed) s.expected_accepted.insert(row.rule.key());
    s.candidates.push_back(std::move(row.rule));
  }
  return s;
}

oracle::Judgment InterruptingJudge::judge_rule(const std::string& rule) {
  if (used_ >= budget_) throw oracle::TransportError("judge unreachable");
  ++used_;
  return inner_.judge_rule(rule);
}

}  // namespace testkit
