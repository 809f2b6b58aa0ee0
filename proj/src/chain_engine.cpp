#include "chainedit/chain_engine.hpp"

#include <map>
#include <set>

namespace chainedit::chain {

void EditRequest::validate() const {
  if (subject.empty() || relation.empty() || new_object.empty()) {
    throw Error("edit request needs non-empty subject, relation and object");
  }
}

EditRequest EditRequest::parse(std::string_view literal) {
  auto parts = text::split(literal, '|');
  if (parts.size() != 3) throw Error("edit literal '" + std::string(literal) + "' must be subject|relation|object");
  EditRequest edit{std::string(text::trim(parts[0])), std::string(text::trim(parts[1])),
                   std::string(text::trim(parts[2]))};
  edit.validate();
  return edit;
}

std::vector<Fact> EditBatch::facts() const {
  std::vector<Fact> out{original.fact()};
  for (const auto& d : derived) out.push_back(d.triple);
  return out;
}

void ExpansionConfig::validate() const {
  if (depth < 1) throw Error("expansion depth must be >= 1");
}

std::vector<const dsl::DirectiveRule*> match_rules(const EditRequest& edit, const dsl::RuleSet& rules,
                                                   bool include_disabled) {
  std::vector<const dsl::DirectiveRule*> out;
  for (auto pos : rules.positions_for(edit.relation)) {
    const auto& d = rules.directives()[pos];
    if (d.enabled || include_disabled) out.push_back(&d);
  }
  return out;
}

namespace {

PendingSlot ground(const dsl::PathExpr& path, const dsl::DirectiveRule& d, const EditRequest& edit) {
  auto entity_for = [&](dsl::PathRoot root) -> const std::string& {
    return root == dsl::PathRoot::S ? edit.subject : edit.new_object;
  };
  PendingSlot slot;
  if (path.root == dsl::PathRoot::X) {
    if (!d.x_binding) throw Error("ruleset integrity: directive " + d.trigger + " has an X slot but no X binding");
    slot.start = d.x_binding->anchor == dsl::Anchor::S ? edit.subject : edit.new_object;
    slot.steps.push_back({d.x_binding->relation, Direction::inverse});
  } else {
    slot.start = entity_for(path.root);
  }
  slot.steps.insert(slot.steps.end(), path.steps.begin(), path.steps.end());
  return slot;
}

std::string step_name(const BodyStep& step) {
  return step.direction == Direction::forward ? step.relation : "inverse:" + step.relation;
}

}  // namespace

Substitution substitute(const dsl::DirectiveRule& directive, const EditRequest& edit) {
  if (directive.trigger != edit.relation) {
    throw Error("directive " + directive.id() + " does not trigger on relation " + edit.relation);
  }
  return {directive.id(), ground(directive.target_subject, directive, edit), directive.target_relation,
          ground(directive.target_object, directive, edit)};
}

Resolution resolve(const Substitution& sub, oracle::Oracle& oracle, const MetaRegistry& meta) {
  std::vector<QueryRecord> log;
  std::optional<SkippedDirective> skip;

  auto walk = [&](const PendingSlot& slot) -> std::optional<std::string> {
    std::string entity = slot.start;
    for (const auto& step : slot.steps) {
      auto m = meta.at(step.relation);
      QueryRecord rec;
      if (step.direction == Direction::forward) {
        rec.prompt = m.query_prompt(entity);
        rec.answer = oracle.answer_query({entity, step.relation}, m);
      } else {
        rec.prompt = m.inverse_prompt(entity);
        rec.answer = oracle.answer_inverse_query(step.relation, entity, m);
      }
      auto status = rec.answer.status;
      log.push_back(std::move(rec));
      if (status != oracle::AnswerStatus::answered) {
        skip = SkippedDirective{sub.directive_id,
                                std::string(oracle::to_string(status)) + "_at_step(" + step_name(step) + ")"};
        return std::nullopt;
      }
      entity = *log.back().answer.entity;
    }
    return entity;
  };

  auto subject = walk(sub.subject);
  if (!subject) return *skip;
  auto object = walk(sub.object);
  if (!object) return *skip;
  return DerivedEdit{{*subject, sub.relation, *object}, sub.directive_id, std::move(log), 1};
}

EditBatch expand(const EditRequest& edit, const dsl::RuleSet& rules, oracle::Oracle& oracle, const MetaRegistry& meta,
                 const ExpansionConfig& cfg) {
  edit.validate();
  cfg.validate();

  EditBatch batch;
  batch.original = edit;
  std::set<Fact> visited{edit.fact()};
  std::map<std::pair<std::string, std::string>, Fact> claimed{{{edit.subject, edit.relation}, edit.fact()}};

  std::vector<EditRequest> frontier{edit};
  for (int level = 1; level <= cfg.depth && !frontier.empty(); ++level) {
    std::vector<EditRequest> next;
    for (const auto& trigger : frontier) {
      for (const auto* directive : match_rules(trigger, rules, cfg.include_disabled_dual_paths)) {
        auto resolution = resolve(substitute(*directive, trigger), oracle, meta);
        if (auto* skipped = std::get_if<SkippedDirective>(&resolution)) {
          batch.skipped.push_back(std::move(*skipped));
          continue;
        }
        auto derived = std::get<DerivedEdit>(std::move(resolution));
        derived.depth = level;
        const auto& f = derived.triple;

        if (visited.contains(f)) {
          batch.skipped.push_back({derived.directive_id, "duplicate_of" + f.to_string()});
          continue;
        }
        if (auto it = claimed.find({f.subject, f.relation}); it != claimed.end()) {
          if (cfg.conflict_policy == ConflictPolicy::error) {
            throw ConflictError("derived edit " + f.to_string() + " conflicts with " + it->second.to_string());
          }
          batch.skipped.push_back({derived.directive_id, "conflicts_with" + it->second.to_string()});
          continue;
        }
        if (cfg.skip_noop) {
          auto current = oracle.answer_query({f.subject, f.relation}, meta.at(f.relation));
          if (current.entity && text::iequals(oracle::normalize_answer(*current.entity),
                                              oracle::normalize_answer(f.object))) {
            batch.skipped.push_back({derived.directive_id, "noop" + f.to_string()});
            continue;
          }
        }
        visited.insert(f);
        claimed.emplace(std::make_pair(f.subject, f.relation), f);
        next.push_back({f.subject, f.relation, f.object});
        batch.derived.push_back(std::move(derived));
      }
    }
    frontier = std::move(next);
  }
  return batch;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson answer_json(const QueryRecord& q) {
  ojson j;
  j["prompt"] = q.prompt;
  j["answer"] = q.answer.entity ? ojson(*q.answer.entity) : ojson(nullptr);
  j["status"] = oracle::to_string(q.answer.status);
  j["raw"] = q.answer.raw_text;
  return j;
}

QueryRecord answer_from_json(const nlohmann::json& j) {
  QueryRecord q;
  q.prompt = j.at("prompt").get<std::string>();
  q.answer.status = oracle::parse_status(j.at("status").get<std::string>());
  if (!j.at("answer").is_null()) q.answer.entity = j["answer"].get<std::string>();
  q.answer.raw_text = j.value("raw", std::string());
  if ((q.answer.status == oracle::AnswerStatus::answered) != q.answer.entity.has_value()) {
    throw Error("query answer inconsistent with status");
  }
  return q;
}

}  // namespace

ojson batch_entries(const EditBatch& batch) {
  ojson entries = ojson::array();
  ojson original;
  original["type"] = "original";
  original["version"] = kBatchVersion;
  original["subject"] = batch.original.subject;
  original["relation"] = batch.original.relation;
  original["object"] = batch.original.new_object;
  entries.push_back(std::move(original));
  for (const auto& d : batch.derived) {
    ojson j;
    j["type"] = "derived";
    j["subject"] = d.triple.subject;
    j["relation"] = d.triple.relation;
    j["object"] = d.triple.object;
    j["directive_id"] = d.directive_id;
    j["depth"] = d.depth;
    j["queries"] = ojson::array();
    for (const auto& q : d.resolved_queries) j["queries"].push_back(answer_json(q));
    entries.push_back(std::move(j));
  }
  for (const auto& s : batch.skipped) {
    ojson j;
    j["type"] = "skipped";
    j["directive_id"] = s.directive_id;
    j["reason"] = s.reason;
    entries.push_back(std::move(j));
  }
  return entries;
}

namespace {

/// Appends one entry to `batch`; `first` says whether this must be the original line.
void absorb(EditBatch& batch, const nlohmann::json& j, bool first) {
  auto type = j.at("type").get<std::string>();
  if (first != (type == "original")) {
    throw Error(first ? "batch must start with an original entry" : "unexpected second original entry");
  }
  if (type == "original") {
    auto version = j.value("version", std::string());
    if (version != kBatchVersion) throw Error("batch version mismatch: expected " + std::string(kBatchVersion));
    batch.original = {j.at("subject").get<std::string>(), j.at("relation").get<std::string>(),
                      j.at("object").get<std::string>()};
    batch.original.validate();
  } else if (type == "derived") {
    DerivedEdit d;
    d.triple = {j.at("subject").get<std::string>(), j.at("relation").get<std::string>(),
                j.at("object").get<std::string>()};
    d.directive_id = j.at("directive_id").get<std::string>();
    d.depth = j.value("depth", 1);
    for (const auto& q : j.at("queries")) d.resolved_queries.push_back(answer_from_json(q));
    batch.derived.push_back(std::move(d));
  } else if (type == "skipped") {
    batch.skipped.push_back({j.at("directive_id").get<std::string>(), j.at("reason").get<std::string>()});
  } else {
    throw Error("unknown entry type '" + type + "'");
  }
}

}  // namespace

EditBatch batch_from_entries(const nlohmann::json& entries) {
  if (!entries.is_array() || entries.empty()) throw Error("batch: expected a non-empty entry array");
  EditBatch batch;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    try {
      absorb(batch, entries[i], i == 0);
    } catch (const std::exception& e) {
      throw FormatError("batch entry " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return batch;
}

std::string serialize_batch(const EditBatch& batch) {
  std::string out;
  for (const auto& entry : batch_entries(batch)) out += entry.dump() + "\n";
  return out;
}

std::vector<EditBatch> parse_batches(std::string_view text) {
  std::vector<EditBatch> batches;
  std::size_t line_no = 0;
  for (const auto& line : text::split(text, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      bool is_original = j.value("type", std::string()) == "original";
      if (is_original) batches.emplace_back();
      if (batches.empty()) throw Error("batch must start with an original entry");
      absorb(batches.back(), j, is_original);
    } catch (const std::exception& e) {
      throw FormatError("batch line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return batches;
}

EditBatch parse_batch(std::string_view text) {
  auto batches = parse_batches(text);
  if (batches.size() != 1) {
    throw FormatError("batch file must hold exactly one batch, found " + std::to_string(batches.size()), 0);
  }
  return std::move(batches.front());
}

void emit_batch(const EditBatch& batch, const std::filesystem::path& path) { write_file(path, serialize_batch(batch)); }

EditBatch load_batch(const std::filesystem::path& path) { return parse_batch(read_file(path)); }

std::vector<EditBatch> load_batches(const std::filesystem::path& path) { return parse_batches(read_file(path)); }

}  // namespace chainedit::chain
