#include "chainedit/path_expr.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace chainedit::dsl {

namespace {

bool is_token_char(char c) {
  auto u = static_cast<unsigned char>(c);
  if (u >= 0x80) return true;
  if (std::isspace(u) || std::iscntrl(u)) return false;
  return c != '.' && c != ',' && c != '(' && c != ')';
}

std::optional<PathRoot> root_of(std::string_view token) {
  if (token == "S") return PathRoot::S;
  if (token == "O") return PathRoot::O;
  if (token == "X") return PathRoot::X;
  return std::nullopt;
}

struct Segment {
  std::string_view text;
  std::size_t offset;
};

}  // namespace

std::string_view to_string(PathRoot root) {
  switch (root) {
    case PathRoot::S: return "S";
    case PathRoot::O: return "O";
    case PathRoot::X: return "X";
  }
  return "?";
}

bool is_relation_token(std::string_view token) {
  return !token.empty() && !root_of(token) && std::all_of(token.begin(), token.end(), is_token_char);
}

bool PathExpr::valid() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!is_relation_token(steps[i].relation)) return false;
    if (i > 0 && steps[i].direction == Direction::inverse) return false;
  }
  return true;
}

PathExpr parse_path(std::string_view text) {
  if (text.empty()) throw PathParseError("empty path", 0);

  std::vector<Segment> segments;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i < text.size() && text[i] != '.') {
      if (!is_token_char(text[i])) {
        throw PathParseError(std::string("unexpected character '") + text[i] + "'", i);
      }
      continue;
    }
    if (i == start) {
      // Leading dot, doubled dot or trailing dot.
      auto dot = i < text.size() ? i : i - 1;
      throw PathParseError("dangling dot", start == 0 ? 0 : dot);
    }
    segments.push_back({text.substr(start, i - start), start});
    start = i + 1;
  }

  std::optional<std::size_t> root_at;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!root_of(segments[i].text)) continue;
    if (root_at) throw PathParseError("second root token '" + std::string(segments[i].text) + "'", segments[i].offset);
    root_at = i;
  }
  if (!root_at) {
    auto culprit = segments.size() > 1 ? segments[1] : segments[0];
    throw PathParseError("unknown root token '" + std::string(culprit.text) + "', expected S, O or X",
                         culprit.offset);
  }
  if (*root_at > 1) {
    throw PathParseError("only one inverse prefix step is allowed", segments[1].offset);
  }

  PathExpr path;
  path.root = *root_of(segments[*root_at].text);
  if (*root_at == 1) path.steps.push_back({std::string(segments[0].text), Direction::inverse});
  for (std::size_t i = *root_at + 1; i < segments.size(); ++i) {
    path.steps.push_back({std::string(segments[i].text), Direction::forward});
  }
  return path;
}

std::string render_path(const PathExpr& path) {
  if (!path.valid()) throw Error("render_path: invalid path expression");
  std::string out;
  std::size_t first_suffix = 0;
  if (!path.steps.empty() && path.steps.front().direction == Direction::inverse) {
    out = path.steps.front().relation + ".";
    first_suffix = 1;
  }
  out += to_string(path.root);
  for (std::size_t i = first_suffix; i < path.steps.size(); ++i) {
    out += '.';
    out += path.steps[i].relation;
  }
  return out;
}

}  // namespace chainedit::dsl
