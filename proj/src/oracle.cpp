#include "chainedit/oracle.hpp"

#include <algorithm>
#include <cctype>

namespace chainedit::oracle {

std::string_view to_string(AnswerStatus s) {
  switch (s) {
    case AnswerStatus::answered: return "answered";
    case AnswerStatus::unknown: return "unknown";
    case AnswerStatus::refused: return "refused";
  }
  return "unknown";
}

AnswerStatus parse_status(std::string_view s) {
  if (s == "answered") return AnswerStatus::answered;
  if (s == "unknown") return AnswerStatus::unknown;
  if (s == "refused") return AnswerStatus::refused;
  throw Error("unknown answer status '" + std::string(s) + "'");
}

OracleAnswer OracleAnswer::answered(std::string raw, std::string entity) {
  return {std::move(raw), std::move(entity), AnswerStatus::answered};
}

OracleAnswer OracleAnswer::unknown(std::string raw) { return {std::move(raw), std::nullopt, AnswerStatus::unknown}; }

OracleAnswer OracleAnswer::refused(std::string raw) { return {std::move(raw), std::nullopt, AnswerStatus::refused}; }

std::string_view to_string(ConfidenceLabel label) {
  switch (label) {
    case ConfidenceLabel::True: return "True";
    case ConfidenceLabel::UsuallyTrue: return "Usually True";
    case ConfidenceLabel::SometimesTrue: return "Sometimes True";
    case ConfidenceLabel::False: return "False";
    case ConfidenceLabel::Uncertain: return "Uncertain";
  }
  return "Uncertain";
}

std::optional<ConfidenceLabel> parse_label(std::string_view text) {
  std::string squashed;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) squashed += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (squashed == "true") return ConfidenceLabel::True;
  if (squashed == "usuallytrue") return ConfidenceLabel::UsuallyTrue;
  if (squashed == "sometimestrue") return ConfidenceLabel::SometimesTrue;
  if (squashed == "false") return ConfidenceLabel::False;
  if (squashed == "uncertain") return ConfidenceLabel::Uncertain;
  return std::nullopt;
}

namespace {

bool is_terminal_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?': case '"': case '\'': case '`': case '*':
      return true;
    default:
      return false;
  }
}

bool is_opening_punct(char c) { return c == '"' || c == '\'' || c == '`' || c == '*'; }

std::string normalize_once(std::string_view text) {
  std::string_view s = text;
  if (auto nl = s.find('\n'); nl != std::string_view::npos) s = s.substr(0, nl);
  for (std::string_view boundary : {". ", "! ", "? "}) {
    if (auto pos = s.find(boundary); pos != std::string_view::npos) s = s.substr(0, pos + 1);
  }
  s = text::trim(s);
  while (!s.empty() && (is_terminal_punct(s.back()) || std::isspace(static_cast<unsigned char>(s.back())))) {
    s.remove_suffix(1);
  }
  while (!s.empty() && (is_opening_punct(s.front()) || std::isspace(static_cast<unsigned char>(s.front())))) {
    s.remove_prefix(1);
  }
  for (std::string_view article : {"the ", "a ", "an "}) {
    if (text::starts_with_icase(s, article) && s.size() > article.size()) {
      s.remove_prefix(article.size());
      break;
    }
  }
  return std::string(text::trim(s));
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string current(text);
  while (true) {
    auto next = normalize_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

const std::vector<std::string>& default_refusal_phrases() {
  static const std::vector<std::string> phrases = {
      "i don't know", "i do not know", "cannot determine", "can't determine", "i'm not sure",
      "i am not sure", "unable to determine", "no information", "not enough information"};
  return phrases;
}

OracleAnswer interpret_response(std::string_view raw, const std::vector<std::string>& refusal_phrases) {
  auto lowered = text::to_lower(raw);
  for (const auto& phrase : refusal_phrases) {
    if (!phrase.empty() && lowered.find(text::to_lower(phrase)) != std::string::npos) {
      return OracleAnswer::refused(std::string(raw));
    }
  }
  auto entity = normalize_answer(raw);
  auto marker = text::to_lower(entity);
  if (entity.empty() || marker == "unknown" || marker == "none" || marker == "n/a") {
    return OracleAnswer::unknown(std::string(raw));
  }
  return OracleAnswer::answered(std::string(raw), std::move(entity));
}

Judgment parse_judgment(std::string_view response) {
  auto lowered = text::to_lower(response);
  auto pos = lowered.rfind("answer:");
  if (pos == std::string::npos) return {std::string(text::trim(response)), ConfidenceLabel::Uncertain};
  auto rest = response.substr(pos + 7);
  if (auto nl = rest.find('\n'); nl != std::string_view::npos) rest = rest.substr(0, nl);
  auto label = parse_label(rest);
  return {std::string(text::trim(response.substr(0, pos))), label.value_or(ConfidenceLabel::Uncertain)};
}

std::vector<ChatMessage> answer_messages(std::string_view prompt) {
  return {
      {"system",
       "Complete the sentence with the name of a single entity and nothing else. "
       "If you do not know the answer, reply \"I don't know\"."},
      {"user", std::string(prompt)},
  };
}

std::vector<ChatMessage> judge_messages(std::string_view nl_rule) {
  return {
      {"system",
       "You are given a logical rule in natural language. State your own rule that supports or opposes it, "
       "then judge how universally it holds on a five-level scale: True, Usually True, Sometimes True, False, "
       "Uncertain. End your reply with \"Answer: <label>\"."},
      {"user", "When the father of X is Y, then the sibling of X is the child of Y."},
      {"assistant", "The sibling of an person is his father's child. Answer: True"},
      {"user", "When the country of X is Y, then the continent of X is the continent of Y."},
      {"assistant",
       "The continent of a location is usually the same as the continent of the country location belongs to. "
       "Answer: Usually True"},
      {"user", std::string(nl_rule)},
  };
}

MockOracle::MockOracle(kg::TripleStore store, std::map<std::string, std::string> judge_responses)
    : MockOracle(std::make_shared<const kg::TripleStore>(std::move(store)), std::move(judge_responses)) {}

MockOracle::MockOracle(std::shared_ptr<const kg::TripleStore> store, std::map<std::string, std::string> judge_responses)
    : store_(std::move(store)), judge_responses_(std::move(judge_responses)) {}

std::vector<std::string> MockOracle::resolve(const std::string& label) const {
  auto ids = store_->ids_for_label(label);
  if (ids.empty() && store_->has_entity(label)) ids.push_back(label);
  return ids;
}

OracleAnswer MockOracle::answer_query(const KnowledgeQuery& query, const RelationMeta&) {
  std::vector<std::string> objects;
  for (const auto& id : resolve(query.subject)) {
    auto found = store_->objects_of(id, query.relation);
    objects.insert(objects.end(), found.begin(), found.end());
  }
  if (objects.empty()) return OracleAnswer::unknown();
  auto first = *std::min_element(objects.begin(), objects.end());
  auto label = store_->label(first);
  return OracleAnswer::answered(label, label);
}

OracleAnswer MockOracle::answer_inverse_query(const std::string& relation, const std::string& object_entity,
                                              const RelationMeta&) {
  std::vector<std::string> subjects;
  for (const auto& id : resolve(object_entity)) {
    auto found = store_->subjects_of(relation, id);
    subjects.insert(subjects.end(), found.begin(), found.end());
  }
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() != 1) return OracleAnswer::unknown();
  auto label = store_->label(subjects.front());
  return OracleAnswer::answered(label, label);
}

Judgment MockOracle::judge_rule(const std::string& nl_rule) {
  auto it = judge_responses_.find(std::string(text::trim(nl_rule)));
  if (it == judge_responses_.end()) return {"no recorded judgment", ConfidenceLabel::Uncertain};
  return parse_judgment(it->second);
}

std::map<std::string, std::string> load_judge_table(const std::filesystem::path& path) {
  std::map<std::string, std::string> table;
  std::size_t line_no = 0;
  for (const auto& line : text::split(read_file(path), '\n')) {
    ++line_no;
    auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto tab = trimmed.find('\t');
    if (tab == std::string_view::npos) {
      throw FormatError("judge table line " + std::to_string(line_no) + ": expected rule<TAB>response", line_no);
    }
    table[std::string(text::trim(trimmed.substr(0, tab)))] = std::string(text::trim(trimmed.substr(tab + 1)));
  }
  return table;
}

}  // namespace chainedit::oracle
