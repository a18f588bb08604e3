#include "atp/category.hpp"

#include <set>

#include "atp/error.hpp"

namespace atp {
namespace {

constexpr std::string_view kModelFormat = "atp-category-model";
constexpr int kModelVersion = 1;

}  // namespace

CategoryModel train_category_classifier(std::span<const SparseVector> x, std::span<const FlatCategory> y,
                                        std::size_t dim, const HingeParams& hyper,
                                        std::uint64_t vocab_hash) {
  if (x.empty() || x.size() != y.size())
    throw ValidationError("train_category_classifier: need equally many (> 0) vectors and labels");
  if (std::set<FlatCategory>(y.begin(), y.end()).size() < 2)
    throw ValidationError("train_category_classifier: at least two classes are required");
  std::vector<const SparseVector*> ptrs;
  ptrs.reserve(x.size());
  for (const auto& v : x) {
    if (v.extent() > dim) throw ValidationError("train_category_classifier: feature index exceeds dimension");
    ptrs.push_back(&v);
  }
  std::vector<std::vector<std::uint32_t>> positives(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) positives[i] = {static_cast<std::uint32_t>(y[i])};

  OvrModel ovr = train_ovr_hinge(ptrs, positives, kFlatCategories.size(), hyper);

  CategoryModel m;
  m.dim = dim;
  m.hyper = hyper;
  m.vocab_hash = vocab_hash;
  m.epoch_objective = ovr.epoch_objective;
  m.bias = ovr.bias;
  m.weights.assign(kFlatCategories.size(), std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < kFlatCategories.size(); ++c) ovr.weights[c].add_to(m.weights[c]);
  return m;
}

CategoryPrediction predict_category(const CategoryModel& model, const SparseVector& x) {
  if (x.extent() > model.dim)
    throw ValidationError("predict_category: feature index " + std::to_string(x.extent() - 1) +
                          " outside model dimension " + std::to_string(model.dim));
  CategoryPrediction p{model.classes[0], {}};
  std::size_t best = 0;
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    p.scores[c] = x.dot(model.weights[c]) + model.bias[c];
    if (p.scores[c] > p.scores[best]) best = c;
  }
  p.category = model.classes[best];
  return p;
}

double accuracy(std::span<const FlatCategory> predicted, std::span<const FlatCategory> gold) {
  if (predicted.size() != gold.size() || gold.empty())
    throw ValidationError("accuracy: lists must be nonempty and of equal length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double accuracy_raw(std::span<const FlatCategory> predicted, std::span<const FlatCategory> gold) {
  if (predicted.size() != gold.size() || gold.empty())
    throw ValidationError("accuracy: lists must be nonempty and of equal length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += raw_category(predicted[i]) == raw_category(gold[i]);
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

json CategoryModel::to_json() const {
  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  json cls = json::array();
  for (auto c : classes) cls.push_back(std::string(to_string(c)));
  doc["classes"] = cls;
  doc["dim"] = dim;
  doc["vocab_hash"] = hex64(vocab_hash);
  doc["hyper"] = atp::to_json(hyper);
  doc["bias"] = bias;
  doc["weights"] = weights;
  doc["epoch_objective"] = epoch_objective;
  return doc;
}

CategoryModel CategoryModel::from_json(const json& doc) {
  CategoryModel m;
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) throw ParseError("category model: wrong format tag");
    if (doc.at("version").get<int>() != kModelVersion) throw ParseError("category model: unsupported version");
    const auto& cls = doc.at("classes");
    if (cls.size() != 5) throw ValidationError("category model: expected 5 classes");
    for (std::size_t i = 0; i < 5; ++i) {
      auto c = parse_flat_category(cls[i].get<std::string>());
      if (!c) throw ValidationError("category model: unknown class " + cls[i].get<std::string>());
      m.classes[i] = *c;
    }
    m.dim = doc.at("dim").get<std::size_t>();
    m.vocab_hash = std::stoull(doc.at("vocab_hash").get<std::string>(), nullptr, 16);
    m.hyper = hinge_params_from_json(doc.at("hyper"));
    m.bias = doc.at("bias").get<std::vector<double>>();
    m.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
    m.epoch_objective = doc.value("epoch_objective", std::vector<double>{});
  } catch (const json::exception& e) {
    throw ParseError(std::string("category model: ") + e.what());
  }
  if (m.bias.size() != 5 || m.weights.size() != 5) throw ValidationError("category model: expected 5 class entries");
  for (const auto& w : m.weights)
    if (w.size() != m.dim) throw ValidationError("category model: weight dimension mismatch");
  return m;
}

LinearCategoryPredictor::LinearCategoryPredictor(Vocabulary vocab, CategoryModel model)
    : vocab_(std::move(vocab)), model_(std::move(model)) {
  if (vocab_.hash() != model_.vocab_hash || vocab_.size() != model_.dim)
    throw ValidationError("category model was trained on a different vocabulary");
}

FlatCategory LinearCategoryPredictor::predict(const Question& q) const {
  return predict_category(model_, vocab_.vectorize(q.text)).category;
}

ImportedCategoryPredictor::ImportedCategoryPredictor(std::map<std::string, FlatCategory> predictions)
    : predictions_(std::move(predictions)) {}

ImportedCategoryPredictor ImportedCategoryPredictor::from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("imported categories: expected an object id -> category");
  std::map<std::string, FlatCategory> preds;
  for (const auto& [id, value] : doc.items()) {
    if (!value.is_string()) throw ValidationError("imported categories: value for " + id + " is not a string");
    auto c = parse_flat_category(value.get<std::string>());
    if (!c) throw ValidationError("imported categories: unknown category for " + id);
    preds.emplace(id, *c);
  }
  return ImportedCategoryPredictor(std::move(preds));
}

ImportedCategoryPredictor ImportedCategoryPredictor::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

FlatCategory ImportedCategoryPredictor::predict(const Question& q) const {
  auto it = predictions_.find(q.id);
  if (it == predictions_.end()) throw ValidationError("no imported category for question " + q.id);
  return it->second;
}

}  // namespace atp
