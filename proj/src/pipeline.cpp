#include "atp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <map>
#include <set>

#include "atp/error.hpp"
#include "atp/log.hpp"

namespace atp {

namespace fs = std::filesystem;

std::string_view to_string(Stage1Method m) { return m == Stage1Method::linear ? "linear" : "imported"; }

std::string_view to_string(Stage2Method m) {
  switch (m) {
    case Stage2Method::tc: return "tc";
    case Stage2Method::ec: return "ec";
    case Stage2Method::xmc: return "xmc";
    case Stage2Method::imported: return "imported";
  }
  return "?";
}

std::optional<Stage1Method> parse_stage1_method(std::string_view s) {
  if (s == "linear") return Stage1Method::linear;
  if (s == "imported") return Stage1Method::imported;
  return std::nullopt;
}

std::optional<Stage2Method> parse_stage2_method(std::string_view s) {
  if (s == "tc") return Stage2Method::tc;
  if (s == "ec") return Stage2Method::ec;
  if (s == "xmc") return Stage2Method::xmc;
  if (s == "imported") return Stage2Method::imported;
  return std::nullopt;
}

std::string_view to_string(Aggregation a) { return a == Aggregation::sum ? "sum" : "max"; }

std::optional<Aggregation> parse_aggregation(std::string_view s) {
  if (s == "sum") return Aggregation::sum;
  if (s == "max") return Aggregation::max;
  return std::nullopt;
}

// ---------------------------------------------------------------- config

namespace {

const std::set<std::string> kTopLevelKeys = {"mode", "stage1", "stage2", "data", "output_dir", "category",
                                             "bm25", "ec",   "xmc",    "top_k", "threads"};
const std::set<std::string> kDataKeys = {"dbpedia_train", "wikidata_train",     "hierarchy",
                                         "entities",      "stage1_predictions", "stage2_scores"};

fs::path resolve(const json& v, const fs::path& base) {
  fs::path p(v.get<std::string>());
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

template <typename T, typename Parse>
T parse_enum(const json& doc, const char* key, T fallback, Parse parse) {
  if (!doc.contains(key)) return fallback;
  const auto s = doc.at(key).get<std::string>();
  auto v = parse(s);
  if (!v) throw ValidationError(std::string("config: unknown ") + key + " \"" + s + "\"");
  return *v;
}

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ValidationError("config: " + std::string(what) + " is required by the selected methods");
  if (!fs::exists(p)) throw ValidationError("config: " + std::string(what) + " not found: " + p.string());
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("config: expected a JSON object");
  for (const auto& [k, v] : doc.items())
    if (!kTopLevelKeys.contains(k)) throw ValidationError("config: unknown key \"" + k + "\"");
  PipelineConfig c;
  try {
    c.mode = parse_enum(doc, "mode", c.mode, parse_eval_mode);
    c.stage1 = parse_enum(doc, "stage1", c.stage1, parse_stage1_method);
    c.stage2 = parse_enum(doc, "stage2", c.stage2, parse_stage2_method);
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      if (!d.is_object()) throw ValidationError("config: data must be an object");
      for (const auto& [k, v] : d.items())
        if (!kDataKeys.contains(k)) throw ValidationError("config: unknown data key \"" + k + "\"");
      if (d.contains("dbpedia_train")) c.dbpedia_train = resolve(d.at("dbpedia_train"), base_dir);
      if (d.contains("wikidata_train")) c.wikidata_train = resolve(d.at("wikidata_train"), base_dir);
      if (d.contains("hierarchy")) c.hierarchy = resolve(d.at("hierarchy"), base_dir);
      if (d.contains("entities")) c.entities = resolve(d.at("entities"), base_dir);
      if (d.contains("stage1_predictions")) c.stage1_predictions = resolve(d.at("stage1_predictions"), base_dir);
      if (d.contains("stage2_scores")) c.stage2_scores = resolve(d.at("stage2_scores"), base_dir);
    }
    if (doc.contains("output_dir")) c.output_dir = resolve(doc.at("output_dir"), base_dir);
    c.category_hyper = hinge_params_from_json(doc.value("category", json()), c.category_hyper);
    if (doc.contains("bm25")) {
      c.bm25.k1 = doc.at("bm25").value("k1", c.bm25.k1);
      c.bm25.b = doc.at("bm25").value("b", c.bm25.b);
    }
    if (doc.contains("ec")) {
      const auto& ec = doc.at("ec");
      c.ec_k = ec.value("k", c.ec_k);
      c.ec_aggregation = parse_enum(ec, "aggregation", c.ec_aggregation, parse_aggregation);
    }
    c.xmc = XmcConfig::from_json(doc.value("xmc", json()), c.xmc);
    c.top_k = doc.value("top_k", c.top_k);
    c.threads = doc.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (c.top_k < 1) throw ValidationError("config: top_k must be >= 1");
  if (c.ec_k < 1) throw ValidationError("config: ec.k must be >= 1");
  if (!(c.bm25.k1 >= 0.0) || !(c.bm25.b >= 0.0 && c.bm25.b <= 1.0))
    throw ValidationError("config: bm25 needs k1 >= 0 and 0 <= b <= 1");
  if (c.threads < 1) c.threads = 1;
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return from_json(read_json_file(path), path.parent_path());
}

json PipelineConfig::to_json() const {
  json doc;
  doc["mode"] = atp::to_string(mode);
  doc["stage1"] = atp::to_string(stage1);
  doc["stage2"] = atp::to_string(stage2);
  json data = json::object();
  auto put = [&](const char* key, const fs::path& p) {
    if (!p.empty()) data[key] = p.generic_string();
  };
  put("dbpedia_train", dbpedia_train);
  put("wikidata_train", wikidata_train);
  put("hierarchy", hierarchy);
  put("entities", entities);
  put("stage1_predictions", stage1_predictions);
  put("stage2_scores", stage2_scores);
  doc["data"] = std::move(data);
  if (!output_dir.empty()) doc["output_dir"] = output_dir.generic_string();
  doc["category"] = atp::to_json(category_hyper);
  doc["bm25"] = json{{"k1", bm25.k1}, {"b", bm25.b}};
  doc["ec"] = json{{"k", ec_k}, {"aggregation", atp::to_string(ec_aggregation)}};
  doc["xmc"] = xmc.to_json();
  doc["top_k"] = top_k;
  doc["threads"] = threads;
  return doc;
}

std::uint64_t PipelineConfig::hash() const {
  json doc = to_json();
  doc.erase("output_dir");
  doc.erase("threads");
  return fnv1a64(doc.dump());
}

json PipelineConfig::seeds() const {
  return json{{"category", category_hyper.seed},
              {"xmc", xmc.seed},
              {"xmc_cluster", xmc.cluster_hyper.seed},
              {"xmc_label", xmc.label_hyper.seed}};
}

const fs::path& PipelineConfig::mode_train() const {
  return mode == EvalMode::dbpedia ? dbpedia_train : wikidata_train;
}

void PipelineConfig::validate() const {
  if (dbpedia_train.empty() && wikidata_train.empty())
    throw ValidationError("config: at least one training set is required");
  if (!dbpedia_train.empty()) require_file(dbpedia_train, "data.dbpedia_train");
  if (!wikidata_train.empty()) require_file(wikidata_train, "data.wikidata_train");
  require_file(mode_train(), mode == EvalMode::dbpedia ? "data.dbpedia_train" : "data.wikidata_train");
  if (stage1 == Stage1Method::imported) require_file(stage1_predictions, "data.stage1_predictions");
  if (stage2 == Stage2Method::tc || stage2 == Stage2Method::ec) require_file(entities, "data.entities");
  if (stage2 == Stage2Method::imported) require_file(stage2_scores, "data.stage2_scores");
  if (!hierarchy.empty()) require_file(hierarchy, "data.hierarchy");
}

// ---------------------------------------------------------------- training

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool trainable_resource(const Question& q) {
  return q.has_text() && q.category == RawCategory::resource && !q.types.empty();
}

/// The `k` most frequent gold types, ties by label.
std::vector<std::string> frequent_types(const QuestionSet& qs, std::size_t k) {
  std::map<std::string, std::size_t> counts;
  for (const auto& q : qs.questions)
    if (trainable_resource(q))
      for (const auto& t : q.types) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i) out.push_back(sorted[i].first);
  return out;
}

struct Stage1Data {
  std::vector<std::string> texts;
  std::vector<FlatCategory> labels;
  std::size_t excluded = 0;
};

Stage1Data stage1_data(const QuestionSet& qs) {
  Stage1Data d;
  for (const auto& q : qs.questions) {
    if (!q.has_text() || !q.category) {
      ++d.excluded;
      continue;
    }
    d.texts.push_back(q.text);
    d.labels.push_back(flatten_category(q));
  }
  return d;
}

std::vector<LabeledExample> labeled_examples(const QuestionSet& qs, const Vocabulary& vocab, LabelSet& labels) {
  std::set<std::string> all;
  for (const auto& q : qs.questions)
    if (trainable_resource(q)) all.insert(q.types.begin(), q.types.end());
  for (const auto& t : all) labels.add(t);
  std::vector<LabeledExample> out;
  for (const auto& q : qs.questions) {
    if (!trainable_resource(q)) continue;
    LabeledExample ex{q.id, vocab.vectorize(q.text), {}};
    for (const auto& t : q.types) ex.labels.push_back(*labels.id(t));
    std::sort(ex.labels.begin(), ex.labels.end());
    ex.labels.erase(std::unique(ex.labels.begin(), ex.labels.end()), ex.labels.end());
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TrainSummary train_pipeline(const PipelineConfig& config, const fs::path& bundle_dir) {
  config.validate();
  TrainSummary summary;
  summary.config_hash = config.hash();

  std::optional<QuestionSet> dbp, wd;
  if (!config.dbpedia_train.empty()) dbp = load_dataset(config.dbpedia_train, Source::dbpedia, Split::train);
  if (!config.wikidata_train.empty()) wd = load_dataset(config.wikidata_train, Source::wikidata, Split::train);
  const QuestionSet combined = dbp && wd ? combine_sets(*dbp, *wd) : (dbp ? *dbp : *wd);
  const QuestionSet& mode_set = config.mode == EvalMode::dbpedia ? *dbp : *wd;

  const Stage1Data s1 = stage1_data(combined);
  summary.stage1_questions = s1.texts.size();
  summary.stage1_excluded = s1.excluded;
  if (s1.texts.empty()) throw ValidationError("train: no labelled questions with text");
  const Vocabulary vocab = Vocabulary::fit(s1.texts);

  fs::create_directories(bundle_dir);
  write_json_file(bundle_dir / "vocab.json", vocab.to_json());

  if (config.stage1 == Stage1Method::linear) {
    std::vector<SparseVector> x;
    x.reserve(s1.texts.size());
    for (const auto& t : s1.texts) x.push_back(vocab.vectorize(t));
    HingeParams hp = config.category_hyper;
    hp.threads = config.threads;
    const auto model = train_category_classifier(x, s1.labels, vocab.size(), hp, vocab.hash());
    write_json_file(bundle_dir / "category_model.json", model.to_json());
  } else {
    ImportedCategoryPredictor::load(config.stage1_predictions);
    fs::copy_file(config.stage1_predictions, bundle_dir / "stage1_predictions.json",
                  fs::copy_options::overwrite_existing);
  }

  for (const auto& q : mode_set.questions) summary.stage2_questions += trainable_resource(q);
  summary.fallback_types = frequent_types(mode_set, config.top_k);

  switch (config.stage2) {
    case Stage2Method::tc:
    case Stage2Method::ec: {
      const auto entities = load_entities(config.entities);
      const auto index = config.stage2 == Stage2Method::tc ? build_type_index(entities, config.bm25)
                                                           : build_entity_index(entities, config.bm25);
      index.save(bundle_dir / "index.bin");
      break;
    }
    case Stage2Method::xmc: {
      LabelSet labels;
      const auto examples = labeled_examples(mode_set, vocab, labels);
      XmcConfig xc = config.xmc;
      xc.threads = config.threads;
      const auto model = train_xmc(examples, std::move(labels), xc, vocab.hash());
      model.save(bundle_dir / "xmc");
      break;
    }
    case Stage2Method::imported: {
      const json scores = read_json_file(config.stage2_scores);
      if (!scores.is_object()) throw ValidationError("stage-2 scores: expected an object id -> {label: score}");
      fs::copy_file(config.stage2_scores, bundle_dir / "stage2_scores.json", fs::copy_options::overwrite_existing);
      break;
    }
  }

  json manifest;
  manifest["format"] = "atp-bundle";
  manifest["version"] = 1;
  manifest["config"] = config.to_json();
  manifest["config_hash"] = hex64(summary.config_hash);
  manifest["seeds"] = config.seeds();
  manifest["vocab_hash"] = hex64(vocab.hash());
  manifest["stage1_questions"] = summary.stage1_questions;
  manifest["stage1_excluded"] = summary.stage1_excluded;
  manifest["stage2_questions"] = summary.stage2_questions;
  manifest["fallback_types"] = summary.fallback_types;
  manifest["created"] = utc_timestamp();
  write_json_file(bundle_dir / "manifest.json", manifest);
  log::info("train: bundle written to " + bundle_dir.string());
  return summary;
}

// ---------------------------------------------------------------- prediction

Bundle Bundle::load(const fs::path& dir) {
  Bundle b;
  b.manifest_ = read_json_file(dir / "manifest.json");
  if (b.manifest_.value("format", std::string()) != "atp-bundle" || b.manifest_.value("version", 0) != 1)
    throw ParseError(dir.string() + ": not a model bundle");
  try {
    b.config_ = PipelineConfig::from_json(b.manifest_.at("config"));
    b.fallback_types_ = b.manifest_.at("fallback_types").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  b.vocab_ = Vocabulary::from_json(read_json_file(dir / "vocab.json"));
  if (hex64(b.vocab_.hash()) != b.manifest_.value("vocab_hash", std::string()))
    throw ValidationError("bundle vocabulary does not match its manifest");

  if (b.config_.stage1 == Stage1Method::linear) {
    auto model = CategoryModel::from_json(read_json_file(dir / "category_model.json"));
    b.stage1_ = std::make_unique<LinearCategoryPredictor>(b.vocab_, std::move(model));
  } else {
    b.stage1_ = std::make_unique<ImportedCategoryPredictor>(
        ImportedCategoryPredictor::load(dir / "stage1_predictions.json"));
  }

  switch (b.config_.stage2) {
    case Stage2Method::tc:
    case Stage2Method::ec:
      b.index_ = InvertedIndex::load(dir / "index.bin");
      break;
    case Stage2Method::xmc:
      b.xmc_ = XmcModel::load(dir / "xmc");
      if (b.xmc_->vocab_hash != b.vocab_.hash())
        throw ValidationError("xmc model was trained on a different vocabulary");
      break;
    case Stage2Method::imported:
      b.imported_scores_ = read_json_file(dir / "stage2_scores.json");
      break;
  }
  return b;
}

RankedTypeList Bundle::rank_types(const Question& q, std::size_t top_k) const {
  RankedTypeList out;
  switch (config_.stage2) {
    case Stage2Method::tc:
      out = rank_types_tc(*index_, q.text, top_k);
      break;
    case Stage2Method::ec:
      out = rank_types_ec(*index_, q.text, config_.ec_k, config_.ec_aggregation);
      break;
    case Stage2Method::xmc: {
      const auto x = vocab_.vectorize(q.text);
      out = xmc_->predict(MatchQuery{q.id, x}, top_k);
      break;
    }
    case Stage2Method::imported: {
      std::vector<ScoredType> items;
      if (auto it = imported_scores_.find(q.id); it != imported_scores_.end() && it->is_object())
        for (const auto& [label, score] : it->items())
          if (score.is_number()) items.push_back({label, score.get<double>()});
      out = RankedTypeList(std::move(items));
      break;
    }
  }
  out.truncate(top_k);
  return out;
}

Prediction Bundle::predict(const Question& q, std::size_t top_k) const {
  if (top_k < 1) throw ValidationError("predict: top_k must be >= 1");
  const FlatCategory flat = stage1_->predict(q);
  const Unflattened u = unflatten(flat);
  Prediction p{q.id, u.category, {}};
  if (u.category != RawCategory::resource) {
    p.types.push_back(u.subtype);
    return p;
  }
  p.types = rank_types(q, top_k).labels();
  if (p.types.empty())
    p.types.assign(fallback_types_.begin(),
                   fallback_types_.begin() + static_cast<std::ptrdiff_t>(std::min(top_k, fallback_types_.size())));
  if (p.types.empty()) throw ValidationError("predict: no stage-2 result and no fallback types for " + q.id);
  return p;
}

PredictionRun Bundle::predict(const QuestionSet& qs, std::size_t top_k) const {
  PredictionRun run;
  for (const auto& q : qs.questions) {
    run.predictions.push_back(predict(q, top_k));
    validate_prediction(run.predictions.back());
  }
  run.metadata = json{{"config_hash", manifest_.at("config_hash")},
                      {"seeds", manifest_.at("seeds")},
                      {"mode", to_string(config_.mode)},
                      {"stage1", to_string(config_.stage1)},
                      {"stage2", to_string(config_.stage2)},
                      {"top_k", top_k}};
  return run;
}

void write_run(const PredictionRun& run, const fs::path& path) {
  write_json_file(path, to_json(run));
  auto meta = path;
  meta += ".meta.json";
  write_json_file(meta, run.metadata);
}

// ---------------------------------------------------------------- cross-validation

CrossValidationResult cross_validate_category(const QuestionSet& qs, int folds, std::uint64_t seed,
                                              const HingeParams& hyper) {
  QuestionSet usable{qs.source, qs.split, {}};
  CrossValidationResult r;
  r.folds = folds;
  for (const auto& q : qs.questions) {
    if (q.has_text() && q.category)
      usable.questions.push_back(q);
    else
      ++r.excluded;
  }
  const FoldAssignment assignment = split_folds(usable, folds, seed);
  for (int f = 0; f < folds; ++f) {
    std::vector<std::string> train_texts;
    std::vector<FlatCategory> train_y;
    for (auto i : assignment.complement(usable, f)) {
      train_texts.push_back(usable.questions[i].text);
      train_y.push_back(flatten_category(usable.questions[i]));
    }
    const Vocabulary vocab = Vocabulary::fit(train_texts);
    std::vector<SparseVector> x;
    x.reserve(train_texts.size());
    for (const auto& t : train_texts) x.push_back(vocab.vectorize(t));
    const auto model = train_category_classifier(x, train_y, vocab.size(), hyper, vocab.hash());
    std::vector<FlatCategory> pred, gold;
    for (auto i : assignment.members(usable, f)) {
      pred.push_back(predict_category(model, vocab.vectorize(usable.questions[i].text)).category);
      gold.push_back(flatten_category(usable.questions[i]));
    }
    r.accuracy3.push_back(accuracy_raw(pred, gold));
    r.accuracy5.push_back(accuracy(pred, gold));
  }
  for (int f = 0; f < folds; ++f) {
    r.mean3 += r.accuracy3[static_cast<std::size_t>(f)] / folds;
    r.mean5 += r.accuracy5[static_cast<std::size_t>(f)] / folds;
  }
  return r;
}

}  // namespace atp
