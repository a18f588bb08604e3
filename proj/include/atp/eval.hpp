#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atp/dataset.hpp"
#include "atp/hierarchy.hpp"
#include "atp/io.hpp"
#include "atp/ranked.hpp"

namespace atp {

enum class EvalMode { dbpedia, wikidata };
std::string_view to_string(EvalMode m);
std::optional<EvalMode> parse_eval_mode(std::string_view s);

/// One line of a submission: predicted raw category and ranked type list.
struct Prediction {
  std::string id;
  RawCategory category = RawCategory::resource;
  std::vector<std::string> types;
};

struct PredictionRun {
  std::vector<Prediction> predictions;
  /// Method names, seeds and config hash; empty when the run has no sidecar.
  json metadata = json::object();

  const Prediction* find(std::string_view id) const;
};

/// Parses a submission array of {"id", "category", "type": [...]}. Throws
/// ValidationError on duplicate ids, a resource prediction without types, a
/// literal prediction that is not one of number/date/string, or a boolean
/// prediction other than ["boolean"].
PredictionRun parse_run(const json& doc, std::string_view origin = "<json>");
/// Also reads `<path>.meta.json` into metadata when present.
PredictionRun load_run(const std::filesystem::path& path);
json to_json(const PredictionRun& run);
void validate_prediction(const Prediction& p);

struct NdcgValue {
  double capped = 0.0;
  /// DCG / IDCG before capping; can exceed 1 under lenient ancestor credit.
  double raw = 0.0;
};

/// Lenient NDCG@k. IDCG gives each gold type gain 1 up to rank k. Throws
/// ValidationError for k < 1 or empty gold.
NdcgValue ndcg(std::span<const std::string> predicted, std::span<const std::string> gold,
               const TypeHierarchy& hier, std::size_t k);
double ndcg_at_k(std::span<const std::string> predicted, std::span<const std::string> gold,
                 const TypeHierarchy& hier, std::size_t k);
double ndcg_at_k(const RankedTypeList& predicted, std::span<const std::string> gold, const TypeHierarchy& hier,
                 std::size_t k);

/// 1 / rank of the first predicted type in gold, 0 if none.
double reciprocal_rank(std::span<const std::string> predicted, std::span<const std::string> gold);

struct RankedJudgement {
  std::vector<std::string> predicted;
  std::vector<std::string> gold;
};
/// Throws ValidationError on empty input.
double mrr(std::span<const RankedJudgement> runs);

struct CategoryBreakdown {
  std::size_t questions = 0;
  std::size_t correct = 0;
  /// Questions contributing to the type metrics.
  std::size_t typed = 0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  double mrr = 0.0;
};

struct EvalReport {
  EvalMode mode = EvalMode::dbpedia;
  std::size_t questions = 0;
  /// Gold questions with empty text; scored as incorrect.
  std::size_t excluded = 0;
  /// Gold questions without a prediction; scored 0.
  std::size_t missing = 0;
  /// Gold questions without a category; left out of every metric.
  std::size_t unlabelled = 0;
  /// Resource questions without gold types; left out of the type metrics.
  std::size_t untyped_resource = 0;
  /// Predictions whose id is not in the gold set.
  std::size_t unmatched = 0;
  /// Questions whose NDCG was capped at 1.
  std::size_t capped = 0;
  double accuracy3 = 0.0;
  double accuracy5 = 0.0;
  std::size_t typed = 0;
  double ndcg5 = 0.0;   // dbpedia mode
  double ndcg10 = 0.0;  // dbpedia mode
  double mrr = 0.0;     // wikidata mode
  std::map<FlatCategory, CategoryBreakdown> per_category;
  std::vector<std::string> notes;
  json run_metadata = json::object();

  json to_json() const;
  std::string to_text() const;
};

/// Accuracy over every labelled gold question; type metrics over gold
/// literal and resource questions only. A wrong predicted category scores 0
/// on the type metrics. Throws ValidationError in dbpedia mode without a
/// hierarchy.
EvalReport evaluate_run(const PredictionRun& run, const QuestionSet& gold, const TypeHierarchy* hier,
                        EvalMode mode);

struct MissRow {
  std::string type;
  std::size_t total = 0;
  std::size_t errors = 0;
};

/// Gold types absent from the predicted list, top `n` by miss count (then
/// total desc, type asc). Types with no misses are omitted.
std::vector<MissRow> error_analysis(const PredictionRun& run, const QuestionSet& gold, std::size_t n);
json to_json(std::span<const MissRow> rows);
std::string to_text(std::span<const MissRow> rows);

}  // namespace atp
