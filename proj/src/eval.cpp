#include "atp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "atp/error.hpp"
#include "atp/log.hpp"

namespace atp {

std::string_view to_string(EvalMode m) { return m == EvalMode::dbpedia ? "dbpedia" : "wikidata"; }

std::optional<EvalMode> parse_eval_mode(std::string_view s) {
  if (s == "dbpedia") return EvalMode::dbpedia;
  if (s == "wikidata") return EvalMode::wikidata;
  return std::nullopt;
}

// ---------------------------------------------------------------- runs

const Prediction* PredictionRun::find(std::string_view id) const {
  for (const auto& p : predictions)
    if (p.id == id) return &p;
  return nullptr;
}

void validate_prediction(const Prediction& p) {
  switch (p.category) {
    case RawCategory::boolean:
      if (p.types.size() != 1 || p.types[0] != "boolean")
        throw ValidationError("prediction " + p.id + ": boolean must carry [\"boolean\"]");
      break;
    case RawCategory::literal:
      if (p.types.size() != 1 ||
          std::find(kLiteralSubtypes.begin(), kLiteralSubtypes.end(), p.types[0]) == kLiteralSubtypes.end())
        throw ValidationError("prediction " + p.id + ": literal must carry exactly one of number/date/string");
      break;
    case RawCategory::resource:
      if (p.types.empty()) throw ValidationError("prediction " + p.id + ": resource prediction without types");
      for (const auto& t : p.types)
        if (t.empty()) throw ValidationError("prediction " + p.id + ": empty type label");
      break;
  }
}

PredictionRun parse_run(const json& doc, std::string_view origin) {
  const std::string where(origin);
  if (!doc.is_array()) throw ParseError(where + ": run must be a JSON array");
  PredictionRun run;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (!rec.is_object()) throw ParseError(at + ": expected object");
    Prediction p;
    const auto& id = rec.contains("id") ? rec.at("id") : json();
    if (id.is_string()) {
      p.id = id.get<std::string>();
    } else if (id.is_number_integer()) {
      p.id = std::to_string(id.get<long long>());
    } else {
      throw ValidationError(at + ": missing or invalid id");
    }
    if (!rec.contains("category") || !rec.at("category").is_string())
      throw ValidationError(at + ": missing category");
    auto cat = parse_raw_category(rec.at("category").get<std::string>());
    if (!cat) throw ValidationError(at + ": unknown category " + rec.at("category").dump());
    p.category = *cat;
    if (rec.contains("type") && !rec.at("type").is_null()) {
      if (!rec.at("type").is_array()) throw ValidationError(at + ": type must be an array");
      for (const auto& t : rec.at("type")) {
        if (!t.is_string()) throw ValidationError(at + ": type labels must be strings");
        p.types.push_back(t.get<std::string>());
      }
    }
    validate_prediction(p);
    if (!seen.insert(p.id).second) throw ValidationError(at + ": duplicate id " + p.id);
    run.predictions.push_back(std::move(p));
  }
  return run;
}

PredictionRun load_run(const std::filesystem::path& path) {
  PredictionRun run = parse_run(read_json_file(path), path.string());
  auto meta = path;
  meta += ".meta.json";
  if (std::filesystem::exists(meta)) run.metadata = read_json_file(meta);
  return run;
}

json to_json(const PredictionRun& run) {
  json out = json::array();
  for (const auto& p : run.predictions)
    out.push_back(json{{"id", p.id}, {"category", to_string(p.category)}, {"type", p.types}});
  return out;
}

// ---------------------------------------------------------------- metrics

NdcgValue ndcg(std::span<const std::string> predicted, std::span<const std::string> gold,
               const TypeHierarchy& hier, std::size_t k) {
  if (k < 1) throw ValidationError("ndcg: k must be >= 1");
  if (gold.empty()) throw ValidationError("ndcg: empty gold type set");
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, predicted.size()); ++i)
    dcg += hier.lenient_gain(predicted[i], gold) / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, gold.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  NdcgValue v;
  v.raw = dcg / idcg;
  v.capped = std::min(1.0, v.raw);
  if (v.raw > 1.0) log::debug("ndcg capped at 1 (uncapped " + std::to_string(v.raw) + ")");
  return v;
}

double ndcg_at_k(std::span<const std::string> predicted, std::span<const std::string> gold,
                 const TypeHierarchy& hier, std::size_t k) {
  return ndcg(predicted, gold, hier, k).capped;
}

double ndcg_at_k(const RankedTypeList& predicted, std::span<const std::string> gold, const TypeHierarchy& hier,
                 std::size_t k) {
  const auto labels = predicted.labels();
  return ndcg_at_k(labels, gold, hier, k);
}

double reciprocal_rank(std::span<const std::string> predicted, std::span<const std::string> gold) {
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (std::find(gold.begin(), gold.end(), predicted[i]) != gold.end()) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

double mrr(std::span<const RankedJudgement> runs) {
  if (runs.empty()) throw ValidationError("mrr: no questions");
  double sum = 0.0;
  for (const auto& r : runs) sum += reciprocal_rank(r.predicted, r.gold);
  return sum / static_cast<double>(runs.size());
}

// ---------------------------------------------------------------- evaluation

namespace {

std::unordered_map<std::string_view, const Prediction*> index_run(const PredictionRun& run) {
  std::unordered_map<std::string_view, const Prediction*> out;
  for (const auto& p : run.predictions) out.emplace(p.id, &p);
  return out;
}

double ratio(double num, std::size_t den) { return den == 0 ? 0.0 : num / static_cast<double>(den); }

}  // namespace

EvalReport evaluate_run(const PredictionRun& run, const QuestionSet& gold, const TypeHierarchy* hier,
                        EvalMode mode) {
  if (mode == EvalMode::dbpedia && hier == nullptr)
    throw ValidationError("evaluate: dbpedia mode needs a type hierarchy");
  EvalReport r;
  r.mode = mode;
  r.run_metadata = run.metadata;
  const auto by_id = index_run(run);

  std::size_t labelled = 0, correct3 = 0, correct5 = 0;
  double sum5 = 0.0, sum10 = 0.0, sum_rr = 0.0;
  std::set<std::string_view> gold_ids;
  for (const auto& q : gold.questions) {
    gold_ids.insert(q.id);
    ++r.questions;
    if (!q.category) {
      ++r.unlabelled;
      continue;
    }
    ++labelled;
    const FlatCategory gold_flat = flatten_category(q);
    auto& cat = r.per_category[gold_flat];
    ++cat.questions;

    const Prediction* p = nullptr;
    if (auto it = by_id.find(q.id); it != by_id.end()) p = it->second;
    if (!p) ++r.missing;
    if (!q.has_text()) {
      ++r.excluded;
      p = nullptr;
    }

    if (p) {
      const FlatCategory pred_flat = flatten_category(p->category, p->types);
      correct5 += pred_flat == gold_flat;
      correct3 += p->category == *q.category;
      cat.correct += pred_flat == gold_flat;
    }

    if (*q.category == RawCategory::boolean) continue;
    if (*q.category == RawCategory::resource && q.types.empty()) {
      ++r.untyped_resource;
      continue;
    }
    ++r.typed;
    ++cat.typed;
    double s5 = 0.0, s10 = 0.0, rr = 0.0;
    if (p && p->category == *q.category) {
      if (*q.category == RawCategory::literal) {
        s5 = s10 = rr = p->types.front() == q.types.front() ? 1.0 : 0.0;
      } else if (mode == EvalMode::dbpedia) {
        const auto v5 = ndcg(p->types, q.types, *hier, 5);
        const auto v10 = ndcg(p->types, q.types, *hier, 10);
        if (v5.raw > 1.0 || v10.raw > 1.0) ++r.capped;
        s5 = v5.capped;
        s10 = v10.capped;
      } else {
        rr = reciprocal_rank(p->types, q.types);
      }
    }
    sum5 += s5;
    sum10 += s10;
    sum_rr += rr;
    cat.ndcg5 += s5;
    cat.ndcg10 += s10;
    cat.mrr += rr;
  }
  for (const auto& p : run.predictions) r.unmatched += !gold_ids.contains(p.id);
  if (r.unmatched > 0) log::warning("evaluate: " + std::to_string(r.unmatched) + " predictions have no gold question");

  r.accuracy3 = ratio(static_cast<double>(correct3), labelled);
  r.accuracy5 = ratio(static_cast<double>(correct5), labelled);
  if (mode == EvalMode::dbpedia) {
    r.ndcg5 = ratio(sum5, r.typed);
    r.ndcg10 = ratio(sum10, r.typed);
  } else {
    r.mrr = ratio(sum_rr, r.typed);
  }
  for (auto& [flat, cat] : r.per_category) {
    cat.ndcg5 = ratio(cat.ndcg5, cat.typed);
    cat.ndcg10 = ratio(cat.ndcg10, cat.typed);
    cat.mrr = ratio(cat.mrr, cat.typed);
  }

  if (mode == EvalMode::dbpedia)
    r.notes.push_back("NDCG is capped at 1 when lenient ancestor credit pushes DCG above the ideal DCG (" +
                      std::to_string(r.capped) + " questions capped)");
  if (r.run_metadata.is_object() && r.run_metadata.value("stage2", std::string()) == "xmc")
    r.notes.push_back("XMC matchers are sparse linear models; transformer-matcher scores are not reproduced");
  if (r.excluded > 0)
    r.notes.push_back(std::to_string(r.excluded) + " questions without text are scored as incorrect");
  return r;
}

json EvalReport::to_json() const {
  json doc;
  doc["format"] = "atp-eval-report";
  doc["version"] = 1;
  doc["mode"] = to_string(mode);
  doc["notes"] = notes;
  doc["questions"] = questions;
  doc["excluded"] = excluded;
  doc["missing"] = missing;
  doc["unlabelled"] = unlabelled;
  doc["untyped_resource"] = untyped_resource;
  doc["unmatched"] = unmatched;
  doc["typed"] = typed;
  doc["accuracy"] = json{{"3way", accuracy3}, {"5way", accuracy5}};
  if (mode == EvalMode::dbpedia) {
    doc["ndcg@5"] = ndcg5;
    doc["ndcg@10"] = ndcg10;
    doc["capped"] = capped;
  } else {
    doc["mrr"] = mrr;
  }
  json per = json::object();
  for (const auto& [flat, c] : per_category) {
    json row{{"questions", c.questions},
             {"accuracy", ratio(static_cast<double>(c.correct), c.questions)},
             {"typed", c.typed}};
    if (mode == EvalMode::dbpedia) {
      row["ndcg@5"] = c.ndcg5;
      row["ndcg@10"] = c.ndcg10;
    } else {
      row["mrr"] = c.mrr;
    }
    per[std::string(to_string(flat))] = std::move(row);
  }
  doc["per_category"] = std::move(per);
  doc["run"] = run_metadata;
  return doc;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  for (const auto& n : notes) os << "# " << n << '\n';
  if (run_metadata.contains("config_hash"))
    os << "# config " << run_metadata["config_hash"].get<std::string>() << '\n';
  os << std::fixed << std::setprecision(4);
  os << "mode       " << to_string(mode) << '\n';
  os << "questions  " << questions << " (excluded " << excluded << ", missing " << missing << ", unlabelled "
     << unlabelled << ")\n";
  os << "accuracy   " << accuracy3 << " (3-way)  " << accuracy5 << " (5-way)\n";
  if (mode == EvalMode::dbpedia)
    os << "ndcg@5     " << ndcg5 << "\nndcg@10    " << ndcg10 << '\n';
  else
    os << "mrr        " << mrr << '\n';
  os << '\n' << std::left << std::setw(16) << "category" << std::right << std::setw(8) << "n" << std::setw(10)
     << "acc" << std::setw(8) << "typed";
  if (mode == EvalMode::dbpedia)
    os << std::setw(10) << "ndcg@5" << std::setw(10) << "ndcg@10";
  else
    os << std::setw(10) << "mrr";
  os << '\n';
  for (const auto& [flat, c] : per_category) {
    os << std::left << std::setw(16) << to_string(flat) << std::right << std::setw(8) << c.questions
       << std::setw(10) << ratio(static_cast<double>(c.correct), c.questions) << std::setw(8) << c.typed;
    if (mode == EvalMode::dbpedia)
      os << std::setw(10) << c.ndcg5 << std::setw(10) << c.ndcg10;
    else
      os << std::setw(10) << c.mrr;
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- error analysis

std::vector<MissRow> error_analysis(const PredictionRun& run, const QuestionSet& gold, std::size_t n) {
  const auto by_id = index_run(run);
  std::map<std::string, MissRow> rows;
  for (const auto& q : gold.questions) {
    const Prediction* p = nullptr;
    if (auto it = by_id.find(q.id); it != by_id.end()) p = it->second;
    for (const auto& t : q.types) {
      auto& row = rows[t];
      row.type = t;
      ++row.total;
      if (!p || std::find(p->types.begin(), p->types.end(), t) == p->types.end()) ++row.errors;
    }
  }
  std::vector<MissRow> out;
  for (auto& [t, row] : rows)
    if (row.errors > 0) out.push_back(std::move(row));
  std::sort(out.begin(), out.end(), [](const MissRow& a, const MissRow& b) {
    if (a.errors != b.errors) return a.errors > b.errors;
    if (a.total != b.total) return a.total > b.total;
    return a.type < b.type;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

json to_json(std::span<const MissRow> rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back(json{{"type", r.type}, {"total", r.total}, {"errors", r.errors}});
  return out;
}

std::string to_text(std::span<const MissRow> rows) {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.type.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "Type" << std::right << std::setw(9) << "#Total"
     << std::setw(9) << "#Errors" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(static_cast<int>(width)) << r.type << std::right << std::setw(9) << r.total
       << std::setw(9) << r.errors << '\n';
  return os.str();
}

}  // namespace atp
