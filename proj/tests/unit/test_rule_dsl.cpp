#include <doctest.h>

#include "chainedit/chain_engine.hpp"
#include "chainedit/oracle.hpp"
#include "testkit.hpp"

using namespace testkit;
using dsl::PathExpr;
using dsl::PathRoot;

namespace {

PathExpr path(PathRoot root, std::vector<BodyStep> steps = {}) { return {root, std::move(steps)}; }
BodyStep fwd(std::string r) { return {std::move(r), Direction::forward}; }
BodyStep inv(std::string r) { return {std::move(r), Direction::inverse}; }

std::size_t error_offset(std::string_view text) {
  try {
    dsl::parse_path(text);
  } catch (const dsl::PathParseError& e) {
    return e.offset();
  }
  FAIL("expected a parse error for '" << std::string(text) << "'");
  return 0;
}

const dsl::DirectiveRule* find_id(const std::vector<dsl::DirectiveRule>& ds, const std::string& id) {
  for (const auto& d : ds)
    if (d.id() == id) return &d;
  return nullptr;
}

}  // namespace

TEST_SUITE("rule_dsl") {
  TEST_CASE("literal paths") {
    CHECK(dsl::parse_path("O.father") == path(PathRoot::O, {fwd("father")}));
    CHECK(dsl::parse_path("S.birthplace.country") == path(PathRoot::S, {fwd("birthplace"), fwd("country")}));
    CHECK(dsl::parse_path("father.S") == path(PathRoot::S, {inv("father")}));
    CHECK(dsl::parse_path("O") == path(PathRoot::O));
    CHECK(dsl::parse_path("father.X.country") == path(PathRoot::X, {inv("father"), fwd("country")}));
    CHECK(dsl::render_path(path(PathRoot::O, {fwd("spouse")})) == "O.spouse");
    CHECK(dsl::render_path(path(PathRoot::S)) == "S");
  }

  TEST_CASE("parse errors report offsets") {
    CHECK(error_offset("") == 0);
    CHECK(error_offset(".S") == 0);
    CHECK(error_offset("S.") == 1);
    CHECK(error_offset("S..father") == 2);
    CHECK(error_offset("Q.father") == 2);
    CHECK(error_offset("father") == 0);
    CHECK(error_offset("S.O") == 2);
    CHECK(error_offset("a.b.S") == 2);
    CHECK(error_offset("S.birth place") == 7);
    CHECK(error_offset("S.f(x)") == 3);
  }

  TEST_CASE("round trip on generated paths") {
    SplitMix64 rng(99);
    for (int i = 0; i < 3000; ++i) {
      auto p = random_path(rng, 7, true);
      REQUIRE(p.valid());
      auto text = dsl::render_path(p);
      REQUIRE(dsl::parse_path(text) == p);
      REQUIRE(dsl::render_path(dsl::parse_path(text)) == text);
    }
  }

  TEST_CASE("parser never half-succeeds on mutated text") {
    SplitMix64 rng(5);
    const std::string alphabet = "SOX.ab_ (),";
    for (int i = 0; i < 3000; ++i) {
      auto text = dsl::render_path(random_path(rng, 4, true));
      auto edits = 1 + rng.below(3);
      for (std::uint64_t k = 0; k < edits; ++k) {
        auto pos = rng.below(text.size() + 1);
        if (rng.below(2) && pos < text.size()) {
          text.erase(pos, 1);
        } else {
          text.insert(pos, 1, alphabet[rng.below(alphabet.size())]);
        }
      }
      try {
        auto p = dsl::parse_path(text);
        CHECK(p.valid());
        CHECK(dsl::parse_path(dsl::render_path(p)) == p);
      } catch (const dsl::PathParseError& e) {
        CHECK(e.offset() <= text.size());
      }
    }
  }

  TEST_CASE("derivation of the family rule") {
    auto d = dsl::derive_directives(mother_rule(), family_meta());
    CHECK_FALSE(d.not_auto_derivable);
    REQUIRE(d.directives.size() == 2);
    const auto& d1 = d.directives[0];
    CHECK(d1.trigger == "father");
    CHECK(d1.target_subject == path(PathRoot::S));
    CHECK(d1.target_relation == "mother");
    CHECK(d1.target_object == path(PathRoot::O, {fwd("spouse")}));
    CHECK_FALSE(d1.x_binding);
    const auto& d2 = d.directives[1];
    CHECK(d2.trigger == "spouse");
    CHECK(d2.target_subject == path(PathRoot::X));
    CHECK(d2.target_object == path(PathRoot::O));
    REQUIRE(d2.x_binding);
    CHECK(d2.x_binding->relation == "father");
    CHECK(d2.x_binding->anchor == dsl::Anchor::S);
    CHECK(d2.id() == "spouse => (X, mother, O) | X = father.S");
    for (const auto& x : d.directives) {
      CHECK(x.enabled);
      CHECK(x.provenance == mother_rule());
    }
  }

  TEST_CASE("symmetric first hop adds the swapped-anchor directive") {
    CandidateRule rule{"father", {fwd("sibling"), fwd("father")}, 4, 10};
    auto d = dsl::derive_directives(rule, family_meta());
    const auto* forward_dir = find_id(d.directives, "sibling => (S, father, O.father)");
    const auto* swapped_dir = find_id(d.directives, "sibling => (O, father, S.father)");
    REQUIRE(forward_dir);
    REQUIRE(swapped_dir);
    CHECK(swapped_dir->target_subject == path(PathRoot::O));
    CHECK(swapped_dir->target_object == path(PathRoot::S, {fwd("father")}));
    CHECK(forward_dir->enabled);
    CHECK(swapped_dir->enabled);
    MetaRegistry asym;
    asym.add(RelationMeta::nominal("sibling"));
    asym.add(RelationMeta::nominal("father"));
    CHECK_FALSE(find_id(dsl::derive_directives(rule, asym).directives, "sibling => (O, father, S.father)"));
  }

  TEST_CASE("inverse and unsupported bodies") {
    auto d = dsl::derive_directives({"spouse", {inv("spouse")}, 9, 9}, family_meta());
    REQUIRE(d.directives.size() == 1);
    CHECK(d.directives[0].id() == "spouse => (O, spouse, S)");
    auto child = dsl::derive_directives({"child", {inv("father")}, 9, 9}, family_meta());
    REQUIRE(child.directives.size() == 2);
    CHECK(child.directives[0].id() == "father => (O, child, S)");
    CHECK(child.directives[1].id() == "child => (O, father, S)");
    auto three = dsl::derive_directives({"r", {fwd("a"), fwd("b"), fwd("c")}, 1, 1}, family_meta());
    CHECK(three.directives.empty());
    CHECK(three.not_auto_derivable);
    auto mixed = dsl::derive_directives({"r", {fwd("a"), inv("b")}, 1, 1}, family_meta());
    CHECK(mixed.directives.empty());
    CHECK(mixed.not_auto_derivable);
  }

  TEST_CASE("verbalization") {
    MetaRegistry m = family_meta();
    CandidateRule father_from_mother{"mother", {fwd("father"), fwd("spouse")}, 1, 1};
    CHECK(dsl::verbalize_rule(father_from_mother, m) ==
          "If the father of A is B, then the mother of A is the spouse of B");
    m.add(RelationMeta::verbal("mentored"));
    m.add(RelationMeta::nominal("advisor"));
    CHECK(dsl::verbalize_rule({"advisor", {inv("mentored")}, 1, 1}, m) ==
          "If B mentored A, then the advisor of A is B");
    CHECK(dsl::verbalize_rule({"mother", {fwd("father")}, 1, 1}, m) == "If the father of A is B, then the mother of A is B");
    CHECK_THROWS_AS(dsl::verbalize_rule({"mother", {fwd("unknown_rel")}, 1, 1}, m), MissingMetaError);
  }

  TEST_CASE("validation") {
    dsl::DirectiveRule d;
    d.trigger = "spouse";
    d.target_subject = path(PathRoot::X);
    d.target_relation = "mother";
    d.target_object = path(PathRoot::O);
    CHECK_THROWS_AS(d.validate(), Error);
    dsl::RuleSet rs;
    CHECK_THROWS_AS(rs.add(d), Error);
    d.x_binding = dsl::XBinding{"father", dsl::Anchor::S};
    CHECK_NOTHROW(d.validate());
    d.trigger = "bad trigger";
    CHECK_THROWS_AS(d.validate(), Error);
  }

  TEST_CASE("index partitions the list") {
    SplitMix64 rng(8);
    for (int round = 0; round < 50; ++round) {
      std::vector<dsl::DirectiveRule> ds;
      auto n = rng.below(20);
      for (std::uint64_t i = 0; i < n; ++i) ds.push_back(random_directive(rng, 5));
      dsl::RuleSet rs(ds);
      std::size_t covered = 0;
      for (const auto& [rel, positions] : rs.index()) {
        covered += positions.size();
        CHECK(std::is_sorted(positions.begin(), positions.end()));
        for (auto p : positions) CHECK(rs.directives()[p].trigger == rel);
      }
      CHECK(covered == ds.size());
      for (std::size_t i = 0; i < ds.size(); ++i) {
        auto pos = rs.positions_for(ds[i].trigger);
        CHECK(std::find(pos.begin(), pos.end(), i) != pos.end());
      }
      CHECK(dsl::parse_ruleset(dsl::serialize_ruleset(rs)) == rs);
    }
  }

  TEST_CASE("ruleset files") {
    auto rs = dsl::load_ruleset(fixture("worked_example/ruleset.json"));
    CHECK(rs.size() == 2);
    CHECK(rs.positions_for("father").size() == 1);
    CHECK(rs.positions_for("spouse").size() == 1);
    CHECK(rs == family_ruleset());

    auto dir = scratch_dir("ruleset");
    dsl::save_ruleset(rs, dir / "r.json");
    CHECK(dsl::load_ruleset(dir / "r.json") == rs);
    CHECK(dsl::load_ruleset(dir / "r.json").hash() == rs.hash());
    CHECK(dsl::parse_ruleset(R"({"version":"chainedit-ruleset/1","directives":[]})").empty());
    CHECK_THROWS_AS(dsl::parse_ruleset(R"({"version":"chainedit-ruleset/0","directives":[]})"), Error);
    try {
      dsl::parse_ruleset(R"({"version":"chainedit-ruleset/1","directives":[
        {"trigger":"father","target":["S","mother","O.spouse"]},
        {"trigger":"spouse","target":["X","mother","O"]}]})");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.location() == 1);
    }
  }

  TEST_CASE("derived directives are sound on rule-closed stores") {
    MetaRegistry meta;
    meta.add(RelationMeta::nominal("a", "", true));
    meta.add(RelationMeta::nominal("b"));
    meta.add(RelationMeta::nominal("h"));
    CandidateRule rule{"h", {fwd("a"), fwd("b")}, 1, 1};
    dsl::RuleSet rules(dsl::derive_directives(rule, meta).directives);
    REQUIRE(rules.size() == 3);

    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      SplitMix64 rng(seed);
      std::set<RawTriple> closed;
      for (int i = 0; i < 25; ++i) {
        auto x = "e" + std::to_string(rng.below(10)), y = "e" + std::to_string(rng.below(10));
        if (rng.below(2)) {
          closed.insert({x, "a", y});
          closed.insert({y, "a", x});
        } else {
          closed.insert({x, "b", y});
        }
      }
      std::vector<RawTriple> base(closed.begin(), closed.end());
      for (const auto& t1 : base)
        for (const auto& t2 : base)
          if (t1[1] == "a" && t2[1] == "b" && t1[2] == t2[0]) closed.insert({t1[0], "h", t2[2]});
      REQUIRE(closed.size() <= 100);
      std::vector<RawTriple> all(closed.begin(), closed.end());
      oracle::MockOracle mock(make_store(all));

      for (const auto& t : all) {
        if (t[1] == "h") continue;
        chain::EditRequest edit{t[0], t[1], t[2]};
        for (const auto* d : chain::match_rules(edit, rules)) {
          auto res = chain::resolve(chain::substitute(*d, edit), mock, meta);
          if (auto* derived = std::get_if<chain::DerivedEdit>(&res)) {
            CAPTURE(d->id());
            CHECK(closed.contains({derived->triple.subject, derived->triple.relation, derived->triple.object}));
            CHECK(body_connects(all, rule, derived->triple.subject, derived->triple.object));
          }
        }
      }
    }
  }
}
