#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "atp/dataset.hpp"
#include "atp/hinge.hpp"
#include "atp/sparse.hpp"
#include "atp/text.hpp"

namespace atp {

/// Five one-vs-rest linear scorers over the flattened categories.
struct CategoryModel {
  std::array<FlatCategory, 5> classes = kFlatCategories;
  std::size_t dim = 0;
  std::vector<std::vector<double>> weights;  // [class][feature]
  std::vector<double> bias;
  HingeParams hyper;
  std::uint64_t vocab_hash = 0;
  std::vector<double> epoch_objective;

  json to_json() const;
  static CategoryModel from_json(const json& doc);
};

/// Needs at least two distinct classes among `y`; every feature index must be
/// below `dim`.
CategoryModel train_category_classifier(std::span<const SparseVector> x, std::span<const FlatCategory> y,
                                        std::size_t dim, const HingeParams& hyper,
                                        std::uint64_t vocab_hash = 0);

struct CategoryPrediction {
  FlatCategory category;
  std::array<double, 5> scores;  // indexed like CategoryModel::classes
};

/// Argmax of w.x + b; ties resolve to the earlier class in FlatCategory order.
CategoryPrediction predict_category(const CategoryModel& model, const SparseVector& x);

double accuracy(std::span<const FlatCategory> predicted, std::span<const FlatCategory> gold);
/// Accuracy after collapsing to boolean / literal / resource.
double accuracy_raw(std::span<const FlatCategory> predicted, std::span<const FlatCategory> gold);

/// Stage-one interface. Implementations must be safe for concurrent calls.
class CategoryPredictor {
 public:
  virtual ~CategoryPredictor() = default;
  virtual FlatCategory predict(const Question& q) const = 0;
};

class LinearCategoryPredictor final : public CategoryPredictor {
 public:
  /// Throws ValidationError when the model was trained on another vocabulary.
  LinearCategoryPredictor(Vocabulary vocab, CategoryModel model);
  FlatCategory predict(const Question& q) const override;
  const Vocabulary& vocabulary() const { return vocab_; }
  const CategoryModel& model() const { return model_; }

 private:
  Vocabulary vocab_;
  CategoryModel model_;
};

/// Predictions computed elsewhere (e.g. a fine-tuned transformer), loaded
/// from a JSON object mapping question id to flattened category name.
class ImportedCategoryPredictor final : public CategoryPredictor {
 public:
  explicit ImportedCategoryPredictor(std::map<std::string, FlatCategory> predictions);
  static ImportedCategoryPredictor from_json(const json& doc);
  static ImportedCategoryPredictor load(const std::filesystem::path& path);
  /// Throws ValidationError for ids without an imported prediction.
  FlatCategory predict(const Question& q) const override;

 private:
  std::map<std::string, FlatCategory> predictions_;
};

}  // namespace atp
