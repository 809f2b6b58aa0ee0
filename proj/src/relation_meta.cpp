#include "chainedit/relation_meta.hpp"

#include <json.hpp>

namespace chainedit {

namespace {

constexpr std::string_view kSubjectSlot = "{subject}";
constexpr std::string_view kObjectSlot = "{object}";

std::size_t count_of(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

std::string fill(std::string_view tmpl, std::string_view subject, std::string_view object) {
  std::string out(tmpl);
  auto s = out.find(kSubjectSlot);
  out.replace(s, kSubjectSlot.size(), subject);
  if (auto o = out.find(kObjectSlot); o != std::string::npos) out.replace(o, kObjectSlot.size(), object);
  return out;
}

}  // namespace

RelationMeta RelationMeta::nominal(std::string relation, std::string phrase, bool symmetric) {
  RelationMeta m;
  m.phrase = phrase.empty() ? relation : std::move(phrase);
  m.relation = std::move(relation);
  m.grammatical_class = GrammaticalClass::nominal;
  m.symmetric = symmetric;
  m.verbalization_template = "the " + m.phrase + " of {subject} is {object}";
  return m;
}

RelationMeta RelationMeta::verbal(std::string relation, std::string phrase, bool symmetric) {
  RelationMeta m;
  m.phrase = phrase.empty() ? relation : std::move(phrase);
  m.relation = std::move(relation);
  m.grammatical_class = GrammaticalClass::verbal;
  m.symmetric = symmetric;
  m.verbalization_template = "{subject} " + m.phrase + " {object}";
  return m;
}

void RelationMeta::validate() const {
  const std::string_view t = verbalization_template;
  auto fail = [&](const std::string& why) {
    throw Error("relation '" + relation + "': template \"" + verbalization_template + "\" " + why);
  };
  if (relation.empty()) throw Error("relation metadata with empty id");
  if (count_of(t, kSubjectSlot) != 1) fail("must contain {subject} exactly once");
  if (count_of(t, kObjectSlot) != 1) fail("must contain {object} exactly once");
  if (grammatical_class == GrammaticalClass::nominal) {
    if (!t.starts_with("the ") || !t.ends_with(" of {subject} is {object}")) {
      fail("is not of the form 'the <relation> of {subject} is {object}'");
    }
  } else {
    if (!t.starts_with("{subject} ") || !t.ends_with(" {object}")) {
      fail("is not of the form '{subject} <relation> {object}'");
    }
  }
}

std::string RelationMeta::statement(std::string_view subject, std::string_view object) const {
  return fill(verbalization_template, subject, object);
}

std::string RelationMeta::query_prompt(std::string_view subject) const {
  std::string_view t = verbalization_template;
  auto head = text::trim(t.substr(0, t.find(kObjectSlot)));
  return text::capitalize(fill(head, subject, {}));
}

std::string RelationMeta::inverse_prompt(std::string_view object) const {
  return text::capitalize(inverse_noun_phrase(object)) + " is";
}

std::string RelationMeta::noun_phrase(std::string_view subject) const {
  if (grammatical_class == GrammaticalClass::nominal) return "the " + phrase + " of " + std::string(subject);
  return "the entity that " + std::string(subject) + " " + phrase;
}

std::string RelationMeta::inverse_noun_phrase(std::string_view object) const {
  if (grammatical_class == GrammaticalClass::nominal) return "the entity whose " + phrase + " is " + std::string(object);
  return "the entity that " + phrase + " " + std::string(object);
}

void MetaRegistry::add(RelationMeta meta) {
  meta.validate();
  auto key = meta.relation;
  entries_.insert_or_assign(std::move(key), std::move(meta));
}

const RelationMeta* MetaRegistry::find(std::string_view relation) const {
  auto it = entries_.find(relation);
  return it == entries_.end() ? nullptr : &it->second;
}

RelationMeta MetaRegistry::at(std::string_view relation) const {
  if (const auto* m = find(relation)) return *m;
  if (nominal_fallback_) return RelationMeta::nominal(std::string(relation));
  throw MissingMetaError(std::string(relation));
}

MetaRegistry parse_meta(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("relation metadata: ") + e.what());
  }
  MetaRegistry registry;
  if (!doc.is_object() || !doc.contains("relations") || !doc["relations"].is_array()) {
    throw Error("relation metadata: expected an object with a \"relations\" array");
  }
  const auto& list = doc["relations"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& entry = list[i];
    try {
      auto id = entry.at("id").get<std::string>();
      auto phrase = entry.value("phrase", id);
      auto cls = entry.value("class", std::string("nominal"));
      bool symmetric = entry.value("symmetric", false);
      RelationMeta m;
      if (cls == "nominal") {
        m = RelationMeta::nominal(id, phrase, symmetric);
      } else if (cls == "verbal") {
        m = RelationMeta::verbal(id, phrase, symmetric);
      } else {
        throw FormatError("relation metadata entry " + std::to_string(i) + ": unknown class '" + cls + "'", i);
      }
      if (entry.contains("template")) m.verbalization_template = entry.at("template").get<std::string>();
      registry.add(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("relation metadata entry " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return registry;
}

MetaRegistry load_meta(const std::filesystem::path& path) { return parse_meta(read_file(path)); }

}  // namespace chainedit
