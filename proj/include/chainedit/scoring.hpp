#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chainedit::eval {

/// Lowercased tokens: maximal runs of ASCII letters and digits, with any
/// non-ASCII byte counted as a letter.
std::vector<std::string> answer_tokens(std::string_view text);

/// True iff some alias, tokenized, occurs as a contiguous token run inside the
/// tokenized answer. Throws Error when `gold_aliases` is empty.
bool score_answer(std::string_view answer, const std::vector<std::string>& gold_aliases);

}  // namespace chainedit::eval
