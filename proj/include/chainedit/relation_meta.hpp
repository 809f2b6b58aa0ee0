#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "chainedit/util.hpp"

namespace chainedit {

enum class GrammaticalClass { nominal, verbal };

class MissingMetaError : public Error {
 public:
  explicit MissingMetaError(const std::string& relation)
      : Error("no relation metadata for '" + relation + "'"), relation_(relation) {}
  const std::string& relation() const noexcept { return relation_; }

 private:
  std::string relation_;
};

/// How a relation is put into words.
///
/// Nominal relations read "the {relation} of {subject} is {object}", verbal
/// ones "{subject} {relation} {object}". The template always carries the
/// relation phrase already substituted, e.g. "the father of {subject} is {object}".
struct RelationMeta {
  std::string relation;
  std::string phrase;
  GrammaticalClass grammatical_class = GrammaticalClass::nominal;
  bool symmetric = false;
  std::string verbalization_template;

  static RelationMeta nominal(std::string relation, std::string phrase = {}, bool symmetric = false);
  static RelationMeta verbal(std::string relation, std::string phrase = {}, bool symmetric = false);

  /// Throws Error when the template has the wrong shape for its class.
  void validate() const;

  /// "the father of Alice is Bob" / "Alice mentored Bob".
  std::string statement(std::string_view subject, std::string_view object) const;
  /// Sentence prefix whose completion is the object: "The father of Alice is".
  std::string query_prompt(std::string_view subject) const;
  /// Sentence prefix whose completion is the subject: "The entity whose father is Bob is".
  std::string inverse_prompt(std::string_view object) const;
  /// Noun phrase naming the object of `subject`: "the spouse of B".
  std::string noun_phrase(std::string_view subject) const;
  /// Noun phrase naming the subject of `object`: "the entity whose father is B".
  std::string inverse_noun_phrase(std::string_view object) const;

  bool operator==(const RelationMeta&) const = default;
};

/// Relation metadata lookup. With a nominal fallback enabled, unknown
/// relations are verbalized as nominal with the id as phrase.
class MetaRegistry {
 public:
  void add(RelationMeta meta);
  const RelationMeta* find(std::string_view relation) const;
  /// Throws MissingMetaError unless the fallback is enabled.
  RelationMeta at(std::string_view relation) const;
  bool contains(std::string_view relation) const { return find(relation) != nullptr; }
  void set_nominal_fallback(bool enabled) { nominal_fallback_ = enabled; }
  bool nominal_fallback() const { return nominal_fallback_; }
  const std::map<std::string, RelationMeta, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, RelationMeta, std::less<>> entries_;
  bool nominal_fallback_ = false;
};

/// JSON file: {"relations": [{"id", "phrase"?, "class": "nominal"|"verbal",
/// "symmetric"?, "template"?}]}.
MetaRegistry load_meta(const std::filesystem::path& path);
MetaRegistry parse_meta(std::string_view json_text);

}  // namespace chainedit
