#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainedit/kg_store.hpp"
#include "chainedit/relation_meta.hpp"
#include "chainedit/util.hpp"

namespace chainedit::oracle {

struct KnowledgeQuery {
  std::string subject;
  std::string relation;
};

enum class AnswerStatus { answered, unknown, refused };

std::string_view to_string(AnswerStatus s);
AnswerStatus parse_status(std::string_view s);

struct OracleAnswer {
  std::string raw_text;
  std::optional<std::string> entity;  // present iff status == answered
  AnswerStatus status = AnswerStatus::unknown;

  bool operator==(const OracleAnswer&) const = default;

  static OracleAnswer answered(std::string raw, std::string entity);
  static OracleAnswer unknown(std::string raw = {});
  static OracleAnswer refused(std::string raw);
};

enum class ConfidenceLabel { True, UsuallyTrue, SometimesTrue, False, Uncertain };

std::string_view to_string(ConfidenceLabel label);
std::optional<ConfidenceLabel> parse_label(std::string_view text);
/// True and UsuallyTrue count as valid rules.
inline bool endorses(ConfidenceLabel label) {
  return label == ConfidenceLabel::True || label == ConfidenceLabel::UsuallyTrue;
}

struct Judgment {
  std::string rationale;
  ConfidenceLabel label = ConfidenceLabel::Uncertain;
  bool operator==(const Judgment&) const = default;
};

/// The oracle could not be reached (after retries) or answered garbage.
/// Distinct from an `unknown` answer.
class TransportError : public Error {
 public:
  using Error::Error;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// Free text to entity label: first sentence, trimmed, terminal punctuation
/// and quotes stripped, leading "the"/"a"/"an" removed. Idempotent.
std::string normalize_answer(std::string_view text);

const std::vector<std::string>& default_refusal_phrases();

/// Classifies raw model output. Any refusal phrase (case-insensitive) gives
/// `refused`; an empty normalized answer gives `unknown`.
OracleAnswer interpret_response(std::string_view raw, const std::vector<std::string>& refusal_phrases);

/// Extracts the trailing "Answer: <label>" token (case-insensitive); the text
/// before it is the rationale. Anything unparseable is Uncertain.
Judgment parse_judgment(std::string_view response);

std::vector<ChatMessage> answer_messages(std::string_view prompt);
std::vector<ChatMessage> judge_messages(std::string_view nl_rule);

/// Anything that can answer (subject, relation) queries and judge rules.
/// Implementations must be callable from several threads at once.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleAnswer answer_query(const KnowledgeQuery& query, const RelationMeta& meta) = 0;
  /// "The entity whose {relation} is {object} is".
  virtual OracleAnswer answer_inverse_query(const std::string& relation, const std::string& object_entity,
                                            const RelationMeta& meta) = 0;
  virtual Judgment judge_rule(const std::string& nl_rule) = 0;
};

/// Deterministic oracle backed by a TripleStore. Entities are addressed by
/// label (falling back to id). Forward queries answer the first object in id
/// order; inverse queries answer only a unique subject.
class MockOracle : public Oracle {
 public:
  explicit MockOracle(kg::TripleStore store, std::map<std::string, std::string> judge_responses = {});
  explicit MockOracle(std::shared_ptr<const kg::TripleStore> store,
                      std::map<std::string, std::string> judge_responses = {});

  OracleAnswer answer_query(const KnowledgeQuery& query, const RelationMeta& meta) override;
  OracleAnswer answer_inverse_query(const std::string& relation, const std::string& object_entity,
                                    const RelationMeta& meta) override;
  /// Replays the configured raw response for `nl_rule` through
  /// parse_judgment; rules without an entry are Uncertain.
  Judgment judge_rule(const std::string& nl_rule) override;

  const kg::TripleStore& store() const { return *store_; }

 private:
  std::vector<std::string> resolve(const std::string& label) const;

  std::shared_ptr<const kg::TripleStore> store_;
  std::map<std::string, std::string> judge_responses_;
};

/// Judge table file: one `rule text<TAB>raw response` per line.
std::map<std::string, std::string> load_judge_table(const std::filesystem::path& path);

/// Forwards to another oracle and counts calls.
class CountingOracle : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner) : inner_(inner) {}

  OracleAnswer answer_query(const KnowledgeQuery& query, const RelationMeta& meta) override {
    ++queries_;
    return inner_.answer_query(query, meta);
  }
  OracleAnswer answer_inverse_query(const std::string& relation, const std::string& object_entity,
                                    const RelationMeta& meta) override {
    ++inverse_queries_;
    return inner_.answer_inverse_query(relation, object_entity, meta);
  }
  Judgment judge_rule(const std::string& nl_rule) override {
    ++judgments_;
    return inner_.judge_rule(nl_rule);
  }

  std::size_t queries() const { return queries_; }
  std::size_t inverse_queries() const { return inverse_queries_; }
  std::size_t judgments() const { return judgments_; }
  std::size_t total() const { return queries_ + inverse_queries_ + judgments_; }

 private:
  Oracle& inner_;
  std::atomic<std::size_t> queries_{0};
  std::atomic<std::size_t> inverse_queries_{0};
  std::atomic<std::size_t> judgments_{0};
};

}  // namespace chainedit::oracle
