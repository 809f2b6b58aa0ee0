#include "chainedit/scoring.hpp"

#include <algorithm>

#include "chainedit/util.hpp"

namespace chainedit::eval {

std::vector<std::string> answer_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (word) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool score_answer(std::string_view answer, const std::vector<std::string>& gold_aliases) {
  if (gold_aliases.empty()) throw Error("score_answer: gold alias set is empty");
  auto haystack = answer_tokens(answer);
  for (const auto& alias : gold_aliases) {
    auto needle = answer_tokens(alias);
    if (needle.empty()) continue;
    if (std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end()) return true;
  }
  return false;
}

}  // namespace chainedit::eval
