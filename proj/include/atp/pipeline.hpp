#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atp/category.hpp"
#include "atp/dataset.hpp"
#include "atp/eval.hpp"
#include "atp/fusion.hpp"
#include "atp/hinge.hpp"
#include "atp/text.hpp"
#include "atp/xmc.hpp"

namespace atp {

enum class Stage1Method { linear, imported };
enum class Stage2Method { tc, ec, xmc, imported };
std::string_view to_string(Stage1Method m);
std::string_view to_string(Stage2Method m);
std::optional<Stage1Method> parse_stage1_method(std::string_view s);
std::optional<Stage2Method> parse_stage2_method(std::string_view s);
std::string_view to_string(Aggregation a);
std::optional<Aggregation> parse_aggregation(std::string_view s);

struct PipelineConfig {
  std::filesystem::path dbpedia_train;
  std::filesystem::path wikidata_train;
  std::filesystem::path hierarchy;
  std::filesystem::path entities;
  /// JSON map id -> flattened category (stage-1 "imported").
  std::filesystem::path stage1_predictions;
  /// JSON map id -> label -> score (stage-2 "imported").
  std::filesystem::path stage2_scores;
  std::filesystem::path output_dir;

  EvalMode mode = EvalMode::dbpedia;
  Stage1Method stage1 = Stage1Method::linear;
  Stage2Method stage2 = Stage2Method::xmc;
  HingeParams category_hyper{1.0, 20, 1};
  Bm25Params bm25;
  std::size_t ec_k = 20;
  Aggregation ec_aggregation = Aggregation::sum;
  XmcConfig xmc;
  std::size_t top_k = 10;
  unsigned threads = 1;

  /// Unknown keys and bad values throw ValidationError. Relative paths are
  /// resolved against `base_dir`.
  static PipelineConfig from_json(const json& doc, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  json to_json() const;

  /// FNV-1a over the canonical JSON, without output_dir and threads.
  std::uint64_t hash() const;
  /// Seeds of every randomized component.
  json seeds() const;
  /// Checks that every path the selected methods need exists.
  void validate() const;
  /// Training set for stage 2 in the configured mode.
  const std::filesystem::path& mode_train() const;
};

struct TrainSummary {
  std::uint64_t config_hash = 0;
  std::size_t stage1_questions = 0;
  std::size_t stage1_excluded = 0;
  std::size_t stage2_questions = 0;
  std::vector<std::string> fallback_types;
};

/// Writes manifest.json, vocab.json, category_model.json (linear stage 1)
/// and the stage-2 files into `bundle_dir`. Stage 1 trains on every
/// configured training set (ids prefixed when two are combined); stage 2 on
/// the resource questions of the mode's training set.
TrainSummary train_pipeline(const PipelineConfig& config, const std::filesystem::path& bundle_dir);

/// A trained bundle ready to answer questions.
class Bundle {
 public:
  /// Throws ValidationError when a stored model was fitted on another
  /// vocabulary than the bundle's.
  static Bundle load(const std::filesystem::path& dir);

  const PipelineConfig& config() const { return config_; }
  const json& manifest() const { return manifest_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  Prediction predict(const Question& q, std::size_t top_k) const;
  /// Run metadata carries the config hash, seeds and method names.
  PredictionRun predict(const QuestionSet& qs, std::size_t top_k) const;

 private:
  RankedTypeList rank_types(const Question& q, std::size_t top_k) const;

  PipelineConfig config_;
  json manifest_;
  Vocabulary vocab_;
  std::unique_ptr<CategoryPredictor> stage1_;
  std::optional<InvertedIndex> index_;
  std::optional<XmcModel> xmc_;
  json imported_scores_;
  std::vector<std::string> fallback_types_;
};

/// Writes the submission array to `path` and metadata to `<path>.meta.json`.
void write_run(const PredictionRun& run, const std::filesystem::path& path);

struct CrossValidationResult {
  int folds = 0;
  std::vector<double> accuracy3;  // per fold
  std::vector<double> accuracy5;
  double mean3 = 0.0;
  double mean5 = 0.0;
  std::size_t excluded = 0;
};

/// Stratified k-fold stage-1 cross-validation. Each fold fits its own
/// vocabulary on the training part; questions without text or category are
/// left out.
CrossValidationResult cross_validate_category(const QuestionSet& qs, int folds, std::uint64_t seed,
                                              const HingeParams& hyper);

}  // namespace atp
