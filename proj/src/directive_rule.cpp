#include "chainedit/directive_rule.hpp"

#include <json.hpp>

#include <set>

namespace chainedit::dsl {

namespace {

PathExpr bare(PathRoot root) { return PathExpr{root, {}}; }

PathExpr hop(PathRoot root, const std::string& relation) {
  return PathExpr{root, {{relation, Direction::forward}}};
}

std::string_view anchor_name(Anchor a) { return a == Anchor::S ? "S" : "O"; }

}  // namespace

std::string DirectiveRule::id() const {
  std::string out = trigger + " => (" + render_path(target_subject) + ", " + target_relation + ", " +
                    render_path(target_object) + ")";
  if (x_binding) {
    out += " | X = " + x_binding->relation + "." + std::string(anchor_name(x_binding->anchor));
  }
  return out;
}

bool DirectiveRule::uses_x() const { return target_subject.root == PathRoot::X || target_object.root == PathRoot::X; }

void DirectiveRule::validate() const {
  if (!is_relation_token(trigger)) throw Error("directive: invalid trigger relation '" + trigger + "'");
  if (!is_relation_token(target_relation)) throw Error("directive: invalid generated relation '" + target_relation + "'");
  if (!target_subject.valid() || !target_object.valid())
    throw Error("directive " + trigger + ": invalid path expression");
  if (uses_x() && !x_binding) throw Error("directive " + id() + ": X-rooted slot without an X binding");
  if (x_binding && !is_relation_token(x_binding->relation)) {
    throw Error("directive " + trigger + ": invalid X binding relation '" + x_binding->relation + "'");
  }
}

RuleSet::RuleSet(std::vector<DirectiveRule> directives) {
  for (auto& d : directives) add(std::move(d));
}

void RuleSet::add(DirectiveRule directive) {
  directive.validate();
  index_[directive.trigger].push_back(directives_.size());
  directives_.push_back(std::move(directive));
}

std::span<const std::size_t> RuleSet::positions_for(const std::string& relation) const {
  auto it = index_.find(relation);
  if (it == index_.end()) return {};
  return it->second;
}

std::string RuleSet::hash() const { return sha256_hex(serialize_ruleset(*this)); }

Derivation derive_directives(const CandidateRule& rule, const MetaRegistry& meta) {
  Derivation out;
  const auto& body = rule.body;
  const auto& R = rule.head;

  auto emit = [&](std::string trigger, PathExpr subject, std::string relation, PathExpr object,
                  std::optional<XBinding> binding = std::nullopt) {
    DirectiveRule d{std::move(trigger), std::move(subject), std::move(relation), std::move(object), std::move(binding),
                    true, rule};
    for (const auto& existing : out.directives) {
      if (existing.id() == d.id()) return;
    }
    out.directives.push_back(std::move(d));
  };

  if (body.size() == 1 && body[0].direction == Direction::inverse) {
    const auto& inv = body[0].relation;
    emit(inv, bare(PathRoot::O), R, bare(PathRoot::S));
    emit(R, bare(PathRoot::O), inv, bare(PathRoot::S));
  } else if (body.size() == 1) {
    emit(body[0].relation, bare(PathRoot::S), R, bare(PathRoot::O));
  } else if (body.size() == 2 && body[0].direction == Direction::forward &&
             body[1].direction == Direction::forward) {
    const auto& r1 = body[0].relation;
    const auto& r2 = body[1].relation;
    emit(r1, bare(PathRoot::S), R, hop(PathRoot::O, r2));
    const auto* m1 = meta.find(r1);
    if (m1 && m1->symmetric) emit(r1, bare(PathRoot::O), R, hop(PathRoot::S, r2));
    emit(r2, bare(PathRoot::X), R, bare(PathRoot::O), XBinding{r1, Anchor::S});
  } else if (body.size() == 3) {
    out.not_auto_derivable = "three-step body " + rule.key() + " needs a hand-authored directive";
  } else {
    out.not_auto_derivable = "mixed-direction body " + rule.key() + " needs a hand-authored directive";
  }
  return out;
}

std::string verbalize_rule(const CandidateRule& rule, const MetaRegistry& meta) {
  if (rule.body.empty()) throw Error("verbalize_rule: empty body in " + rule.key());
  const auto head = meta.at(rule.head);
  std::vector<RelationMeta> steps;
  for (const auto& s : rule.body) steps.push_back(meta.at(s.relation));

  const auto& first = rule.body.front();
  std::string antecedent =
      first.direction == Direction::forward ? steps[0].statement("A", "B") : steps[0].statement("B", "A");
  std::string chain = "B";
  for (std::size_t i = 1; i < rule.body.size(); ++i) {
    chain = rule.body[i].direction == Direction::forward ? steps[i].noun_phrase(chain)
                                                         : steps[i].inverse_noun_phrase(chain);
  }
  return "If " + antecedent + ", then " + head.statement("A", chain);
}

namespace {

using ojson = nlohmann::ordered_json;

ojson directive_to_json(const DirectiveRule& d) {
  ojson j;
  j["trigger"] = d.trigger;
  j["target"] = {render_path(d.target_subject), d.target_relation, render_path(d.target_object)};
  if (d.x_binding) j["x_binding"] = {{"relation", d.x_binding->relation}, {"anchor", anchor_name(d.x_binding->anchor)}};
  j["enabled"] = d.enabled;
  j["provenance"] = d.provenance ? to_json(*d.provenance) : ojson(nullptr);
  return j;
}

DirectiveRule directive_from_json(const nlohmann::json& j) {
  DirectiveRule d;
  d.trigger = j.at("trigger").get<std::string>();
  const auto& target = j.at("target");
  if (!target.is_array() || target.size() != 3) throw Error("target must be [subject_path, relation, object_path]");
  d.target_subject = parse_path(target[0].get<std::string>());
  d.target_relation = target[1].get<std::string>();
  d.target_object = parse_path(target[2].get<std::string>());
  if (j.contains("x_binding") && !j["x_binding"].is_null()) {
    const auto& xb = j["x_binding"];
    auto anchor = xb.at("anchor").get<std::string>();
    if (anchor != "S" && anchor != "O") throw Error("x_binding anchor must be S or O");
    d.x_binding = XBinding{xb.at("relation").get<std::string>(), anchor == "S" ? Anchor::S : Anchor::O};
  }
  d.enabled = j.value("enabled", true);
  if (j.contains("provenance") && !j["provenance"].is_null()) d.provenance = rule_from_json(j["provenance"]);
  d.validate();
  return d;
}

}  // namespace

std::string serialize_ruleset(const RuleSet& rules) {
  ojson doc;
  doc["version"] = kRuleSetVersion;
  doc["directives"] = ojson::array();
  for (const auto& d : rules.directives()) doc["directives"].push_back(directive_to_json(d));
  return doc.dump(2) + "\n";
}

RuleSet parse_ruleset(std::string_view text) {
  if (text::trim(text).empty()) return {};
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ruleset: ") + e.what(), 0);
  }
  if (!doc.is_object() || !doc.contains("version")) throw Error("ruleset: missing version header");
  auto version = doc["version"].is_string() ? doc["version"].get<std::string>() : std::string("<non-string>");
  if (version != kRuleSetVersion) {
    throw Error("ruleset: version mismatch, expected " + std::string(kRuleSetVersion) + " got " + version);
  }
  RuleSet rules;
  if (!doc.contains("directives")) return rules;
  const auto& list = doc["directives"];
  if (!list.is_array()) throw FormatError("ruleset: directives must be an array", 0);
  for (std::size_t i = 0; i < list.size(); ++i) {
    try {
      rules.add(directive_from_json(list[i]));
    } catch (const std::exception& e) {
      throw FormatError("ruleset entry " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return rules;
}

void save_ruleset(const RuleSet& rules, const std::filesystem::path& path) {
  write_file(path, serialize_ruleset(rules));
}

RuleSet load_ruleset(const std::filesystem::path& path) { return parse_ruleset(read_file(path)); }

}  // namespace chainedit::dsl
