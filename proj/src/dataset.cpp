#include "chainedit/dataset.hpp"

#include <algorithm>

namespace chainedit::dataset {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Reliability: return "Reliability";
    case Metric::LG: return "LG";
    case Metric::RE: return "RE";
    case Metric::SA: return "SA";
    case Metric::RS: return "RS";
    case Metric::FF: return "FF";
  }
  return "?";
}

std::string_view file_key(Metric m) {
  switch (m) {
    case Metric::Reliability: return "Reliability";
    case Metric::LG: return "Logical_Generalization";
    case Metric::RE: return "Reasoning";
    case Metric::SA: return "Subject_Aliasing";
    case Metric::RS: return "Relation_Specificity";
    case Metric::FF: return "Forgetfulness";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view tag) {
  struct Alias {
    std::string_view name;
    Metric metric;
  };
  static constexpr Alias aliases[] = {
      {"Reliability", Metric::Reliability},
      {"Efficacy", Metric::Reliability},
      {"LG", Metric::LG},
      {"Logical_Generalization", Metric::LG},
      {"RE", Metric::RE},
      {"Reasoning", Metric::RE},
      {"CI", Metric::RE},
      {"CII", Metric::RE},
      {"Compositionality_I", Metric::RE},
      {"Compositionality_II", Metric::RE},
      {"SA", Metric::SA},
      {"Subject_Aliasing", Metric::SA},
      {"RS", Metric::RS},
      {"Relation_Specificity", Metric::RS},
      {"FF", Metric::FF},
      {"Forgetfulness", Metric::FF},
  };
  for (const auto& a : aliases) {
    if (a.name == tag) return a.metric;
  }
  return std::nullopt;
}

std::string_view to_string(VariantKind v) {
  switch (v) {
    case VariantKind::original: return "original";
    case VariantKind::filtered: return "filtered";
    case VariantKind::replaced: return "replaced";
    case VariantKind::in_prompt: return "in-prompt";
  }
  return "?";
}

VariantKind parse_variant(std::string_view s) {
  for (auto v : {VariantKind::original, VariantKind::filtered, VariantKind::replaced, VariantKind::in_prompt}) {
    if (to_string(v) == s) return v;
  }
  if (s == "in_prompt") return VariantKind::in_prompt;
  throw Error("unknown dataset variant '" + std::string(s) + "'");
}

std::size_t BenchmarkCase::count(Metric m) const {
  return static_cast<std::size_t>(
      std::count_if(queries.begin(), queries.end(), [m](const TestQuery& q) { return q.metric == m; }));
}

SchemaError::SchemaError(std::size_t case_index, const std::string& field_path, const std::string& what)
    : FormatError("case " + std::to_string(case_index) + ", field " + (field_path.empty() ? "<case>" : field_path) +
                      ": " + what,
                  case_index),
      field_path_(field_path) {}

namespace {

using json = nlohmann::json;

struct CaseReader {
  std::size_t index;

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw SchemaError(index, path, what);
  }

  const json& field(const json& obj, const std::string& key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + key, "missing");
    return *it;
  }

  std::string text(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    auto s = v.get<std::string>();
    if (text::trim(s).empty()) fail(path, "must not be empty");
    return s;
  }

  std::string text_field(const json& obj, const std::string& key, const std::string& prefix) const {
    return text(field(obj, key, prefix), prefix + key);
  }

  /// First present key among `keys`.
  std::string text_field_any(const json& obj, std::initializer_list<const char*> keys,
                             const std::string& prefix) const {
    for (const char* k : keys) {
      if (obj.contains(k)) return text(obj[k], prefix + k);
    }
    fail(prefix + *keys.begin(), "missing");
  }

  ChainFact chain_fact(const json& v, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected an object");
    return {text_field(v, "subject", path + "."), text_field(v, "relation", path + "."),
            text_field_any(v, {"object", "expected_object"}, path + ".")};
  }

  TestQuery query(Metric metric, const json& v, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected an object");
    TestQuery q;
    q.metric = metric;
    q.prompt = text_field(v, "prompt", path + ".");
    const auto& answers = field(v, "answers", path + ".");
    if (!answers.is_array()) fail(path + ".answers", "expected an array");
    if (answers.empty()) fail(path + ".answers", "gold answer list is empty");
    for (std::size_t a = 0; a < answers.size(); ++a) {
      auto apath = path + ".answers[" + std::to_string(a) + "]";
      const auto& ans = answers[a];
      if (ans.is_string()) {
        q.gold_aliases.push_back(text(ans, apath));
        continue;
      }
      if (!ans.is_object()) fail(apath, "expected an object or a string");
      q.gold_aliases.push_back(text_field(ans, "value", apath + "."));
      if (ans.contains("aliases")) {
        const auto& al = ans["aliases"];
        if (!al.is_array()) fail(apath + ".aliases", "expected an array");
        for (std::size_t k = 0; k < al.size(); ++k) {
          q.gold_aliases.push_back(text(al[k], apath + ".aliases[" + std::to_string(k) + "]"));
        }
      }
    }
    std::vector<std::string> unique;
    for (auto& g : q.gold_aliases) {
      if (std::find(unique.begin(), unique.end(), g) == unique.end()) unique.push_back(std::move(g));
    }
    q.gold_aliases = std::move(unique);
    if (v.contains("chain")) {
      const auto& ch = v["chain"];
      if (!ch.is_array()) fail(path + ".chain", "expected an array");
      for (std::size_t k = 0; k < ch.size(); ++k) {
        q.chain.push_back(chain_fact(ch[k], path + ".chain[" + std::to_string(k) + "]"));
      }
    }
    return q;
  }

  std::vector<TestQuery> metric_block(Metric metric, const json& v, const std::string& key) const {
    if (!v.is_array()) fail(key, "expected an array of test entries");
    std::vector<TestQuery> out;
    for (std::size_t e = 0; e < v.size(); ++e) {
      auto epath = key + "[" + std::to_string(e) + "]";
      const auto& entry = v[e];
      if (!entry.is_object()) fail(epath, "expected an object");
      const auto& tq = field(entry, "test_queries", epath + ".");
      if (!tq.is_array()) fail(epath + ".test_queries", "expected an array");
      for (std::size_t k = 0; k < tq.size(); ++k) {
        out.push_back(query(metric, tq[k], epath + ".test_queries[" + std::to_string(k) + "]"));
      }
    }
    return out;
  }

  BenchmarkCase read(const json& c) const {
    if (!c.is_object()) fail("", "expected an object");
    BenchmarkCase bc;
    std::vector<std::pair<Metric, std::vector<TestQuery>>> blocks;
    for (const auto& [key, value] : c.items()) {
      if (key == "edit" || key == "example_type") continue;
      if (key == "case_id") {
        bc.case_id = value.is_string() ? value.get<std::string>() : value.dump();
        continue;
      }
      if (key == "variant") {
        try {
          bc.variant = parse_variant(text(value, key));
        } catch (const SchemaError&) {
          throw;
        } catch (const Error& e) {
          fail(key, e.what());
        }
        continue;
      }
      auto metric = parse_metric(key);
      if (!metric) fail(key, "unknown metric tag");
      blocks.emplace_back(*metric, metric_block(*metric, value, key));
    }
    std::stable_sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [m, qs] : blocks) bc.queries.insert(bc.queries.end(), qs.begin(), qs.end());

    const auto& edit = field(c, "edit", "");
    if (!edit.is_object()) fail("edit", "expected an object");
    bc.edit.subject = text_field(edit, "subject", "edit.");
    bc.edit.relation = text_field(edit, "relation", "edit.");
    bc.edit.new_object = text_field_any(edit, {"target", "object"}, "edit.");
    if (edit.contains("prompt")) bc.edit_prompt = text(edit["prompt"], "edit.prompt");

    if (bc.count(Metric::Reliability) == 0 && bc.variant == VariantKind::original) {
      std::string_view sentence = text::trim(bc.edit_prompt);
      if (sentence.size() > bc.edit.new_object.size() && sentence.ends_with(bc.edit.new_object)) {
        auto prompt = text::trim(sentence.substr(0, sentence.size() - bc.edit.new_object.size()));
        bc.queries.insert(bc.queries.begin(),
                          TestQuery{Metric::Reliability, std::string(prompt), {bc.edit.new_object}, {}});
      } else {
        fail("Reliability", "at least one Reliability query is required");
      }
    }
    return bc;
  }
};

}  // namespace

std::vector<BenchmarkCase> parse_cases(const nlohmann::json& doc) {
  if (!doc.is_array()) throw SchemaError(0, "$", "expected a top-level array of cases");
  std::vector<BenchmarkCase> cases;
  cases.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) cases.push_back(CaseReader{i}.read(doc[i]));
  return cases;
}

std::vector<BenchmarkCase> load_cases(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("dataset " + path.string() + ": " + e.what(), e.byte);
  }
  return parse_cases(doc);
}

nlohmann::ordered_json case_to_json(const BenchmarkCase& c) {
  nlohmann::ordered_json j;
  if (!c.case_id.empty()) j["case_id"] = c.case_id;
  j["variant"] = to_string(c.variant);
  auto& edit = j["edit"];
  edit["subject"] = c.edit.subject;
  edit["relation"] = c.edit.relation;
  edit["target"] = c.edit.new_object;
  if (!c.edit_prompt.empty()) edit["prompt"] = c.edit_prompt;
  for (auto m : kAllMetrics) {
    auto queries = nlohmann::ordered_json::array();
    for (const auto& q : c.queries) {
      if (q.metric != m) continue;
      nlohmann::ordered_json qj;
      qj["prompt"] = q.prompt;
      nlohmann::ordered_json answer;
      answer["value"] = q.gold_aliases.front();
      answer["aliases"] = std::vector<std::string>(q.gold_aliases.begin() + 1, q.gold_aliases.end());
      qj["answers"].push_back(std::move(answer));
      if (!q.chain.empty()) {
        auto& chain = qj["chain"];
        chain = nlohmann::ordered_json::array();
        for (const auto& f : q.chain) {
          chain.push_back({{"subject", f.subject}, {"relation", f.relation}, {"object", f.expected_object}});
        }
      }
      queries.push_back(std::move(qj));
    }
    if (!queries.empty()) {
      nlohmann::ordered_json entry;
      entry["test_queries"] = std::move(queries);
      j[std::string(file_key(m))].push_back(std::move(entry));
    }
  }
  return j;
}

nlohmann::ordered_json cases_to_json(const std::vector<BenchmarkCase>& cases) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : cases) arr.push_back(case_to_json(c));
  return arr;
}

void save_cases(const std::vector<BenchmarkCase>& cases, const std::filesystem::path& path) {
  write_file(path, cases_to_json(cases).dump(2) + "\n");
}

}  // namespace chainedit::dataset
