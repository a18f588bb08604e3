#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "atp/io.hpp"

namespace atp {

enum class RawCategory { resource, literal, boolean };

/// Five-way category used by the first stage. Enumerator order is the
/// tie-break order of the category classifier.
enum class FlatCategory { boolean, literal_date, literal_number, literal_string, resource };

inline constexpr std::array<FlatCategory, 5> kFlatCategories = {
    FlatCategory::boolean, FlatCategory::literal_date, FlatCategory::literal_number,
    FlatCategory::literal_string, FlatCategory::resource};

inline constexpr std::array<RawCategory, 3> kRawCategories = {
    RawCategory::boolean, RawCategory::literal, RawCategory::resource};

enum class Source { dbpedia, wikidata, combined };
enum class Split { train, test };

std::string_view to_string(RawCategory c);
std::string_view to_string(FlatCategory c);
std::string_view to_string(Source s);
std::string_view to_string(Split s);

std::optional<RawCategory> parse_raw_category(std::string_view s);
std::optional<FlatCategory> parse_flat_category(std::string_view s);
std::optional<Source> parse_source(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

/// One SMART record.
struct Question {
  std::string id;
  std::string text;
  std::optional<RawCategory> category;
  std::vector<std::string> types;

  /// False for records with null or blank question text; such records are
  /// kept but never used for training and always scored as incorrect.
  bool has_text() const;
};

struct QuestionSet {
  Source source = Source::dbpedia;
  Split split = Split::train;
  std::vector<Question> questions;

  std::size_t size() const { return questions.size(); }
  bool empty() const { return questions.empty(); }

  /// Index of a question by id, if present.
  std::optional<std::size_t> find(std::string_view id) const;
};

/// Reads a SMART JSON array. Records may omit category/type (unlabelled test
/// files). Unknown categories, invariant violations and duplicate ids raise
/// ValidationError; syntax errors raise ParseError with line context.
QuestionSet load_dataset(const std::filesystem::path& path, Source source, Split split);
QuestionSet parse_dataset(const json& doc, Source source, Split split, std::string_view origin = "<json>");

json to_json(const Question& q);
json to_json(const QuestionSet& qs);

/// Literal subtypes, in canonical order.
inline constexpr std::array<std::string_view, 3> kLiteralSubtypes = {"date", "number", "string"};

FlatCategory flatten_category(RawCategory category, std::span<const std::string> types);
/// Flattens a labelled question; throws ValidationError when unlabelled.
FlatCategory flatten_category(const Question& q);

struct Unflattened {
  RawCategory category;
  /// "number" | "date" | "string" for literals, "boolean" for boolean,
  /// empty for resource.
  std::string subtype;
};
Unflattened unflatten(FlatCategory flat);
RawCategory raw_category(FlatCategory flat);

/// Concatenates two sets of the same split. Ids receive a "dbp:" or "wd:"
/// prefix according to each set's source.
QuestionSet combine_sets(const QuestionSet& a, const QuestionSet& b);

struct FoldAssignment {
  std::uint64_t seed = 0;
  int n_folds = 0;
  std::map<std::string, int> assignment;

  int fold_of(std::string_view id) const;
  /// Indices into `qs` belonging to fold `f` (test) and to the rest (train).
  std::vector<std::size_t> members(const QuestionSet& qs, int f) const;
  std::vector<std::size_t> complement(const QuestionSet& qs, int f) const;
};

/// Stratified (by FlatCategory; unlabelled questions form their own stratum)
/// deterministic k-fold assignment.
FoldAssignment split_folds(const QuestionSet& qs, int n, std::uint64_t seed);

json to_json(const FoldAssignment& folds);
FoldAssignment fold_assignment_from_json(const json& doc);

struct DatasetStats {
  std::size_t total = 0;
  std::size_t without_text = 0;
  std::size_t unlabelled = 0;
  std::map<RawCategory, std::size_t> per_category;
  std::map<FlatCategory, std::size_t> per_flat;
};

DatasetStats dataset_stats(const QuestionSet& qs);
json to_json(const DatasetStats& stats);
/// Two-column `key<TAB>count` listing.
std::string to_tsv(const DatasetStats& stats);

}  // namespace atp
