#include "atp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "atp/error.hpp"
#include "atp/log.hpp"
#include "atp/random.hpp"

namespace atp {

std::string_view to_string(RawCategory c) {
  switch (c) {
    case RawCategory::resource: return "resource";
    case RawCategory::literal: return "literal";
    case RawCategory::boolean: return "boolean";
  }
  return "?";
}

std::string_view to_string(FlatCategory c) {
  switch (c) {
    case FlatCategory::boolean: return "boolean";
    case FlatCategory::literal_date: return "literal-date";
    case FlatCategory::literal_number: return "literal-number";
    case FlatCategory::literal_string: return "literal-string";
    case FlatCategory::resource: return "resource";
  }
  return "?";
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::dbpedia: return "dbpedia";
    case Source::wikidata: return "wikidata";
    case Source::combined: return "combined";
  }
  return "?";
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::optional<RawCategory> parse_raw_category(std::string_view s) {
  for (auto c : kRawCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::optional<FlatCategory> parse_flat_category(std::string_view s) {
  for (auto c : kFlatCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::optional<Source> parse_source(std::string_view s) {
  for (auto c : {Source::dbpedia, Source::wikidata, Source::combined})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  return std::nullopt;
}

bool Question::has_text() const {
  return std::any_of(text.begin(), text.end(),
                     [](unsigned char c) { return !std::isspace(c); });
}

std::optional<std::size_t> QuestionSet::find(std::string_view id) const {
  for (std::size_t i = 0; i < questions.size(); ++i)
    if (questions[i].id == id) return i;
  return std::nullopt;
}

namespace {

std::string record_id(const json& rec, std::size_t index, std::string_view origin) {
  const auto it = rec.find("id");
  if (it == rec.end() || it->is_null())
    throw ValidationError(std::string(origin) + ": record " + std::to_string(index) + " has no id");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw ValidationError(std::string(origin) + ": record " + std::to_string(index) +
                        " has a non-string id");
}

void check_invariants(const Question& q, std::string_view where) {
  if (!q.category) {
    return;
  }
  switch (*q.category) {
    case RawCategory::boolean:
      if (q.types.size() != 1 || q.types[0] != "boolean")
        throw ValidationError(std::string(where) + ": boolean question must have type [\"boolean\"]");
      break;
    case RawCategory::literal:
      if (q.types.size() != 1 ||
          std::find(kLiteralSubtypes.begin(), kLiteralSubtypes.end(), q.types[0]) ==
              kLiteralSubtypes.end())
        throw ValidationError(std::string(where) +
                              ": literal question must have exactly one of number/date/string");
      break;
    case RawCategory::resource:
      for (const auto& t : q.types)
        if (t.empty()) throw ValidationError(std::string(where) + ": empty resource type label");
      break;
  }
}

}  // namespace

QuestionSet parse_dataset(const json& doc, Source source, Split split, std::string_view origin) {
  if (!doc.is_array()) throw ParseError(std::string(origin) + ": expected a JSON array of records");
  QuestionSet qs{source, split, {}};
  qs.questions.reserve(doc.size());
  std::unordered_set<std::string> seen;
  std::size_t no_types = 0;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    if (!rec.is_object())
      throw ParseError(std::string(origin) + ": record " + std::to_string(i) + " is not an object");
    Question q;
    q.id = record_id(rec, i, origin);
    const std::string where = std::string(origin) + ": record " + q.id;
    if (auto it = rec.find("question"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw ValidationError(where + ": question must be a string or null");
      q.text = it->get<std::string>();
    }
    if (auto it = rec.find("category"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw ValidationError(where + ": category must be a string");
      const auto name = it->get<std::string>();
      q.category = parse_raw_category(name);
      if (!q.category) throw ValidationError(where + ": unknown category \"" + name + "\"");
    }
    if (auto it = rec.find("type"); it != rec.end() && !it->is_null()) {
      if (!it->is_array()) throw ValidationError(where + ": type must be an array");
      for (const auto& t : *it) {
        if (!t.is_string()) throw ValidationError(where + ": type entries must be strings");
        q.types.push_back(t.get<std::string>());
      }
    }
    check_invariants(q, where);
    if (q.category == RawCategory::resource && q.types.empty()) ++no_types;
    if (!seen.insert(q.id).second) throw ValidationError(std::string(origin) + ": duplicate id " + q.id);
    qs.questions.push_back(std::move(q));
  }
  if (no_types > 0)
    log::warning(std::string(origin) + ": " + std::to_string(no_types) +
                 " resource questions have no gold types");
  return qs;
}

QuestionSet load_dataset(const std::filesystem::path& path, Source source, Split split) {
  return parse_dataset(read_json_file(path), source, split, path.string());
}

json to_json(const Question& q) {
  json rec = json::object();
  rec["id"] = q.id;
  rec["question"] = q.has_text() ? json(q.text) : json(nullptr);
  rec["category"] = q.category ? json(std::string(to_string(*q.category))) : json(nullptr);
  rec["type"] = q.types;
  return rec;
}

json to_json(const QuestionSet& qs) {
  json arr = json::array();
  for (const auto& q : qs.questions) arr.push_back(to_json(q));
  return arr;
}

FlatCategory flatten_category(RawCategory category, std::span<const std::string> types) {
  switch (category) {
    case RawCategory::boolean: return FlatCategory::boolean;
    case RawCategory::resource: return FlatCategory::resource;
    case RawCategory::literal:
      if (types.empty()) throw ValidationError("literal category without a subtype");
      if (types[0] == "number") return FlatCategory::literal_number;
      if (types[0] == "date") return FlatCategory::literal_date;
      if (types[0] == "string") return FlatCategory::literal_string;
      throw ValidationError("literal subtype must be number, date or string, got \"" + types[0] + "\"");
  }
  throw ValidationError("invalid category");
}

FlatCategory flatten_category(const Question& q) {
  if (!q.category) throw ValidationError("question " + q.id + " has no category");
  return flatten_category(*q.category, q.types);
}

Unflattened unflatten(FlatCategory flat) {
  switch (flat) {
    case FlatCategory::boolean: return {RawCategory::boolean, "boolean"};
    case FlatCategory::literal_date: return {RawCategory::literal, "date"};
    case FlatCategory::literal_number: return {RawCategory::literal, "number"};
    case FlatCategory::literal_string: return {RawCategory::literal, "string"};
    case FlatCategory::resource: return {RawCategory::resource, ""};
  }
  return {RawCategory::resource, ""};
}

RawCategory raw_category(FlatCategory flat) { return unflatten(flat).category; }

namespace {

std::string_view id_prefix(Source s) {
  switch (s) {
    case Source::dbpedia: return "dbp:";
    case Source::wikidata: return "wd:";
    case Source::combined: return "";
  }
  return "";
}

}  // namespace

QuestionSet combine_sets(const QuestionSet& a, const QuestionSet& b) {
  if (a.split != b.split) throw ValidationError("combine_sets: splits differ");
  QuestionSet out{Source::combined, a.split, {}};
  out.questions.reserve(a.size() + b.size());
  std::unordered_set<std::string> seen;
  for (const QuestionSet* part : {&a, &b}) {
    const auto prefix = id_prefix(part->source);
    for (const auto& q : part->questions) {
      Question copy = q;
      copy.id = std::string(prefix) + q.id;
      if (!seen.insert(copy.id).second)
        throw ValidationError("combine_sets: id " + copy.id + " occurs in both sets");
      out.questions.push_back(std::move(copy));
    }
  }
  return out;
}

int FoldAssignment::fold_of(std::string_view id) const {
  auto it = assignment.find(std::string(id));
  if (it == assignment.end()) throw ValidationError("no fold assigned to id " + std::string(id));
  return it->second;
}

std::vector<std::size_t> FoldAssignment::members(const QuestionSet& qs, int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < qs.size(); ++i)
    if (fold_of(qs.questions[i].id) == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(const QuestionSet& qs, int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < qs.size(); ++i)
    if (fold_of(qs.questions[i].id) != f) out.push_back(i);
  return out;
}

FoldAssignment split_folds(const QuestionSet& qs, int n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("split_folds: need at least 2 folds");
  if (qs.empty()) throw ValidationError("split_folds: empty question set");
  if (static_cast<std::size_t>(n) > qs.size())
    throw ValidationError("split_folds: more folds than questions");

  // Strata 0..4 follow FlatCategory order; stratum 5 collects unlabelled records.
  std::array<std::vector<std::size_t>, 6> strata;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto& q = qs.questions[i];
    std::size_t s = 5;
    if (q.category) {
      try {
        s = static_cast<std::size_t>(flatten_category(q));
      } catch (const ValidationError&) {
        s = 5;
      }
    }
    strata[s].push_back(i);
  }

  FoldAssignment fa{seed, n, {}};
  std::mt19937_64 rng(seed);
  std::size_t counter = 0;
  for (auto& stratum : strata) {
    portable_shuffle(std::span<std::size_t>(stratum), rng);
    for (std::size_t idx : stratum) {
      fa.assignment[qs.questions[idx].id] = static_cast<int>(counter % static_cast<std::size_t>(n));
      ++counter;
    }
  }
  return fa;
}

json to_json(const FoldAssignment& folds) {
  json doc;
  doc["seed"] = folds.seed;
  doc["n_folds"] = folds.n_folds;
  doc["assignment"] = folds.assignment;
  return doc;
}

FoldAssignment fold_assignment_from_json(const json& doc) {
  FoldAssignment fa;
  try {
    fa.seed = doc.at("seed").get<std::uint64_t>();
    fa.n_folds = doc.at("n_folds").get<int>();
    fa.assignment = doc.at("assignment").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("fold assignment: ") + e.what());
  }
  for (const auto& [id, f] : fa.assignment)
    if (f < 0 || f >= fa.n_folds) throw ValidationError("fold index out of range for id " + id);
  return fa;
}

DatasetStats dataset_stats(const QuestionSet& qs) {
  DatasetStats st;
  for (auto c : kRawCategories) st.per_category[c] = 0;
  for (auto c : kFlatCategories) st.per_flat[c] = 0;
  st.total = qs.size();
  for (const auto& q : qs.questions) {
    if (!q.has_text()) ++st.without_text;
    if (!q.category) {
      ++st.unlabelled;
      continue;
    }
    ++st.per_category[*q.category];
    ++st.per_flat[flatten_category(q)];
  }
  return st;
}

json to_json(const DatasetStats& st) {
  json doc;
  doc["total"] = st.total;
  doc["without_text"] = st.without_text;
  doc["unlabelled"] = st.unlabelled;
  json cats = json::object();
  for (const auto& [c, n] : st.per_category) cats[std::string(to_string(c))] = n;
  json flat = json::object();
  for (const auto& [c, n] : st.per_flat) flat[std::string(to_string(c))] = n;
  doc["categories"] = cats;
  doc["flat_categories"] = flat;
  return doc;
}

std::string to_tsv(const DatasetStats& st) {
  std::ostringstream os;
  os << "total\t" << st.total << '\n';
  for (const auto& [c, n] : st.per_category) os << to_string(c) << '\t' << n << '\n';
  for (const auto& [c, n] : st.per_flat)
    if (c != FlatCategory::boolean && c != FlatCategory::resource) os << to_string(c) << '\t' << n << '\n';
  os << "unlabelled\t" << st.unlabelled << '\n';
  os << "without_text\t" << st.without_text << '\n';
  return os.str();
}

}  // namespace atp
