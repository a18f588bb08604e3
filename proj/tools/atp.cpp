// atp: ingest, train, predict, evaluate, analyze, stats.
//
// Exit codes: 0 success, 2 usage or validation error, 3 data error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "atp/dataset.hpp"
#include "atp/error.hpp"
#include "atp/eval.hpp"
#include "atp/hierarchy.hpp"
#include "atp/io.hpp"
#include "atp/log.hpp"
#include "atp/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

atp::Source source_arg(const std::string& s) {
  auto v = atp::parse_source(s);
  if (!v || *v == atp::Source::combined) throw atp::ValidationError("unknown source \"" + s + "\"");
  return *v;
}

atp::Split split_arg(const std::string& s) {
  auto v = atp::parse_split(s);
  if (!v) throw atp::ValidationError("unknown split \"" + s + "\"");
  return *v;
}

atp::EvalMode mode_arg(const std::string& s) {
  auto v = atp::parse_eval_mode(s);
  if (!v) throw atp::ValidationError("unknown mode \"" + s + "\"");
  return *v;
}

atp::Source mode_source(atp::EvalMode m) {
  return m == atp::EvalMode::dbpedia ? atp::Source::dbpedia : atp::Source::wikidata;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    atp::write_text_file(path, text);
}

struct IngestArgs {
  std::string input, source = "dbpedia", split = "train", out, folds_out;
  int folds = 0;
  std::uint64_t seed = 1;
};

int run_ingest(const IngestArgs& a) {
  const auto qs = atp::load_dataset(a.input, source_arg(a.source), split_arg(a.split));
  if (!a.out.empty()) atp::write_json_file(a.out, atp::to_json(qs));
  if (a.folds > 0) {
    const auto folds = atp::split_folds(qs, a.folds, a.seed);
    if (a.folds_out.empty()) throw atp::ValidationError("--folds needs --folds-out");
    atp::write_json_file(a.folds_out, atp::to_json(folds));
  }
  std::cout << atp::to_tsv(atp::dataset_stats(qs));
  return 0;
}

struct StatsArgs {
  std::string input, source = "dbpedia", split = "train", hierarchy, out;
  bool as_json = false;
};

int run_stats(const StatsArgs& a) {
  if (a.input.empty() && a.hierarchy.empty()) throw atp::ValidationError("stats needs --input or --hierarchy");
  std::string text;
  if (!a.input.empty()) {
    const auto stats = atp::dataset_stats(atp::load_dataset(a.input, source_arg(a.source), split_arg(a.split)));
    text += a.as_json ? atp::to_json(stats).dump(2) + "\n" : atp::to_tsv(stats);
  }
  if (!a.hierarchy.empty()) {
    const auto hier = atp::TypeHierarchy::load(a.hierarchy);
    text += "# max_depth\t" + std::to_string(hier.max_depth()) + "\n" + hier.depths_tsv();
  }
  emit(text, a.out);
  return 0;
}

struct TrainArgs {
  std::string config, bundle, mode, stage1, stage2, dbpedia_train, wikidata_train, hierarchy, entities,
      stage1_predictions, stage2_scores;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> top_k;
  std::optional<unsigned> threads;
};

atp::PipelineConfig resolve_config(const TrainArgs& a) {
  atp::json doc = atp::json::object();
  fs::path base;
  if (!a.config.empty()) {
    doc = atp::read_json_file(a.config);
    base = fs::path(a.config).parent_path();
  }
  atp::PipelineConfig c = atp::PipelineConfig::from_json(doc, base);
  if (!a.mode.empty()) c.mode = mode_arg(a.mode);
  if (!a.stage1.empty()) {
    auto v = atp::parse_stage1_method(a.stage1);
    if (!v) throw atp::ValidationError("unknown stage-1 method \"" + a.stage1 + "\"");
    c.stage1 = *v;
  }
  if (!a.stage2.empty()) {
    auto v = atp::parse_stage2_method(a.stage2);
    if (!v) throw atp::ValidationError("unknown stage-2 method \"" + a.stage2 + "\"");
    c.stage2 = *v;
  }
  if (!a.dbpedia_train.empty()) c.dbpedia_train = a.dbpedia_train;
  if (!a.wikidata_train.empty()) c.wikidata_train = a.wikidata_train;
  if (!a.hierarchy.empty()) c.hierarchy = a.hierarchy;
  if (!a.entities.empty()) c.entities = a.entities;
  if (!a.stage1_predictions.empty()) c.stage1_predictions = a.stage1_predictions;
  if (!a.stage2_scores.empty()) c.stage2_scores = a.stage2_scores;
  if (a.seed) {
    c.category_hyper.seed = *a.seed;
    c.xmc.seed = *a.seed;
  }
  if (a.top_k) {
    if (*a.top_k < 1) throw atp::ValidationError("--top-k must be >= 1");
    c.top_k = *a.top_k;
  }
  if (a.threads) c.threads = std::max(1u, *a.threads);
  return c;
}

int run_train(const TrainArgs& a) {
  const auto config = resolve_config(a);
  fs::path bundle = a.bundle;
  if (bundle.empty()) {
    if (config.output_dir.empty()) throw atp::ValidationError("train needs --bundle or output_dir in the config");
    bundle = config.output_dir / "bundle";
  }
  const auto s = atp::train_pipeline(config, bundle);
  std::cout << "bundle\t" << bundle.string() << "\nconfig_hash\t" << atp::hex64(s.config_hash)
            << "\nstage1_questions\t" << s.stage1_questions << "\nstage1_excluded\t" << s.stage1_excluded
            << "\nstage2_questions\t" << s.stage2_questions << '\n';
  return 0;
}

struct PredictArgs {
  std::string bundle, questions, out, split = "test";
  std::optional<std::size_t> top_k;
};

int run_predict(const PredictArgs& a) {
  const auto bundle = atp::Bundle::load(a.bundle);
  const auto qs = atp::load_dataset(a.questions, mode_source(bundle.config().mode), split_arg(a.split));
  const std::size_t k = a.top_k.value_or(bundle.config().top_k);
  if (k < 1) throw atp::ValidationError("--top-k must be >= 1");
  auto run = bundle.predict(qs, k);
  run.metadata["questions"] = fs::path(a.questions).filename().string();
  atp::write_run(run, a.out);
  std::cout << "predictions\t" << run.predictions.size() << "\nout\t" << a.out << '\n';
  return 0;
}

struct EvalArgs {
  std::string run, gold, mode = "dbpedia", hierarchy, out, text_out;
  std::size_t n = 10;
};

int run_evaluate(const EvalArgs& a) {
  const auto mode = mode_arg(a.mode);
  if (mode == atp::EvalMode::dbpedia && a.hierarchy.empty())
    throw atp::ValidationError("dbpedia mode needs --hierarchy");
  std::optional<atp::TypeHierarchy> hier;
  if (!a.hierarchy.empty()) hier = atp::TypeHierarchy::load(a.hierarchy);
  const auto run = atp::load_run(a.run);
  const auto gold = atp::load_dataset(a.gold, mode_source(mode), atp::Split::train);
  const auto report = atp::evaluate_run(run, gold, hier ? &*hier : nullptr, mode);
  if (!a.out.empty()) atp::write_json_file(a.out, report.to_json());
  emit(report.to_text(), a.text_out);
  return 0;
}

int run_analyze(const EvalArgs& a) {
  const auto run = atp::load_run(a.run);
  const auto gold = atp::load_dataset(a.gold, mode_source(mode_arg(a.mode)), atp::Split::train);
  const auto rows = atp::error_analysis(run, gold, a.n);
  if (!a.out.empty()) {
    atp::json doc{{"format", "atp-error-analysis"}, {"version", 1}, {"rows", atp::to_json(rows)},
                  {"run", run.metadata}};
    atp::write_json_file(a.out, doc);
  }
  emit(atp::to_text(rows), a.text_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Answer type prediction: category classification, type ranking and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Log progress and debug detail");
  app.add_flag("-q,--quiet", quiet, "Log errors only");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a dataset, write it normalized and print statistics");
  c_ingest->add_option("--input", ingest.input, "Dataset JSON")->required();
  c_ingest->add_option("--source", ingest.source, "dbpedia | wikidata");
  c_ingest->add_option("--split", ingest.split, "train | test");
  c_ingest->add_option("--out", ingest.out, "Normalized dataset JSON");
  c_ingest->add_option("--folds", ingest.folds, "Write a stratified fold assignment with this many folds");
  c_ingest->add_option("--seed", ingest.seed, "Fold seed");
  c_ingest->add_option("--folds-out", ingest.folds_out, "Fold assignment JSON");

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Dataset counts and type hierarchy depths");
  c_stats->add_option("--input", stats.input, "Dataset JSON");
  c_stats->add_option("--source", stats.source, "dbpedia | wikidata");
  c_stats->add_option("--split", stats.split, "train | test");
  c_stats->add_option("--hierarchy", stats.hierarchy, "Type hierarchy TSV; exports type depths");
  c_stats->add_flag("--json", stats.as_json, "JSON instead of TSV dataset counts");
  c_stats->add_option("--out", stats.out, "Output file (default stdout)");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model bundle");
  c_train->add_option("--config", train.config, "Pipeline config JSON");
  c_train->add_option("--bundle", train.bundle, "Bundle directory (default <output_dir>/bundle)");
  c_train->add_option("--mode", train.mode, "dbpedia | wikidata");
  c_train->add_option("--stage1", train.stage1, "linear | imported");
  c_train->add_option("--stage2", train.stage2, "tc | ec | xmc | imported");
  c_train->add_option("--dbpedia-train", train.dbpedia_train);
  c_train->add_option("--wikidata-train", train.wikidata_train);
  c_train->add_option("--hierarchy", train.hierarchy);
  c_train->add_option("--entities", train.entities, "Entity TSV for tc / ec");
  c_train->add_option("--stage1-predictions", train.stage1_predictions, "JSON id -> category");
  c_train->add_option("--stage2-scores", train.stage2_scores, "JSON id -> label -> score");
  c_train->add_option("--seed", train.seed, "Seed for stage 1 and XMC");
  c_train->add_option("--top-k", train.top_k, "Types per resource prediction");
  c_train->add_option("--threads", train.threads);

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Predict categories and types for a question file");
  c_predict->add_option("--bundle", predict.bundle)->required();
  c_predict->add_option("--questions", predict.questions, "Dataset JSON")->required();
  c_predict->add_option("--out", predict.out, "Submission JSON")->required();
  c_predict->add_option("--split", predict.split, "train | test");
  c_predict->add_option("--top-k", predict.top_k, "Types per resource prediction");

  EvalArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Score a submission against gold labels");
  c_eval->add_option("--run", evaluate.run, "Submission JSON")->required();
  c_eval->add_option("--gold", evaluate.gold, "Gold dataset JSON")->required();
  c_eval->add_option("--mode", evaluate.mode, "dbpedia | wikidata");
  c_eval->add_option("--hierarchy", evaluate.hierarchy, "Type hierarchy TSV (dbpedia mode)");
  c_eval->add_option("--out", evaluate.out, "Report JSON");
  c_eval->add_option("--text-out", evaluate.text_out, "Report text (default stdout)");

  EvalArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Most frequently missed gold types");
  c_analyze->add_option("--run", analyze.run, "Submission JSON")->required();
  c_analyze->add_option("--gold", analyze.gold, "Gold dataset JSON")->required();
  c_analyze->add_option("--mode", analyze.mode, "dbpedia | wikidata");
  c_analyze->add_option("-n,--top", analyze.n, "Rows to report");
  c_analyze->add_option("--out", analyze.out, "Table JSON");
  c_analyze->add_option("--text-out", analyze.text_out, "Table text (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  atp::log::set_level(verbose ? atp::log::Level::debug
                              : quiet ? atp::log::Level::error : atp::log::Level::warning);

  try {
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_stats->parsed()) return run_stats(stats);
    if (c_train->parsed()) return run_train(train);
    if (c_predict->parsed()) return run_predict(predict);
    if (c_eval->parsed()) return run_evaluate(evaluate);
    if (c_analyze->parsed()) return run_analyze(analyze);
  } catch (const atp::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const atp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
