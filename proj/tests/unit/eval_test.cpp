#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "atp/error.hpp"
#include "atp/eval.hpp"
#include "synthetic.hpp"

namespace atp {
namespace {

using Types = std::vector<std::string>;

TypeHierarchy example_hierarchy() { return TypeHierarchy::from_edges(testing::example_edges()); }

TEST(Ndcg, AncestorBeforeGoldExceedsOneBeforeCap) {
  const auto h = example_hierarchy();
  const Types gold{"dbo:Gymnast"};
  const Types pred{"dbo:Athlete", "dbo:Gymnast"};
  const auto v = ndcg(pred, gold, h, 5);
  EXPECT_NEAR(v.raw, 6.0 / 7.0 + 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(v.raw, 1.4880, 1e-4);
  EXPECT_DOUBLE_EQ(v.capped, 1.0);
}

TEST(Ndcg, HandValues) {
  const auto h = example_hierarchy();
  const Types gold{"dbo:Gymnast", "dbo:Athlete"};
  EXPECT_DOUBLE_EQ(ndcg_at_k(Types{"dbo:Gymnast", "dbo:Athlete"}, gold, h, 5), 1.0);
  // Second slot misses entirely.
  const double idcg = 1.0 + 1.0 / std::log2(3.0);
  EXPECT_NEAR(ndcg_at_k(Types{"dbo:Gymnast", "dbo:Horse"}, gold, h, 5), 1.0 / idcg, 1e-12);
  // k = 1 truncates the ideal list to one gold type.
  EXPECT_DOUBLE_EQ(ndcg_at_k(Types{"dbo:Gymnast", "dbo:Horse"}, gold, h, 1), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(Types{}, gold, h, 5), 0.0);
  EXPECT_THROW(ndcg(Types{"dbo:Gymnast"}, gold, h, 0), ValidationError);
  EXPECT_THROW(ndcg(Types{"dbo:Gymnast"}, Types{}, h, 5), ValidationError);
}

// Independent lenient NDCG over a parent map.
double oracle_ndcg(const Types& pred, const Types& gold, const std::map<std::string, std::string>& parent, int h,
                   std::size_t k, bool cap) {
  auto chain = [&](const std::string& t) {
    Types out{t};
    for (auto it = parent.find(t); it != parent.end() && it->second != "ROOT"; it = parent.find(it->second))
      out.push_back(it->second);
    return out;
  };
  auto gain = [&](const std::string& t) {
    double best = 0.0;
    for (const auto& g : gold) {
      if (g == t) return 1.0;
      const auto up_t = chain(t), up_g = chain(g);
      for (std::size_t i = 0; i < up_t.size(); ++i)
        if (up_t[i] == g) best = std::max(best, 1.0 - static_cast<double>(i) / h);
      for (std::size_t i = 0; i < up_g.size(); ++i)
        if (up_g[i] == t) best = std::max(best, 1.0 - static_cast<double>(i) / h);
    }
    return best;
  };
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, pred.size()); ++i) dcg += gain(pred[i]) / std::log2(static_cast<double>(i) + 2.0);
  for (std::size_t i = 0; i < std::min(k, gold.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return cap ? std::min(1.0, dcg / idcg) : dcg / idcg;
}

TEST(Ndcg, MatchesBruteForceOracle) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto edges = testing::random_edges(rng, 2 + rng() % 20);
    const auto h = TypeHierarchy::from_edges(edges);
    std::map<std::string, std::string> parent(edges.begin(), edges.end());
    Types all;
    for (const auto& [t, p] : edges) all.push_back(t);
    std::shuffle(all.begin(), all.end(), rng);
    const Types pred(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(rng() % (all.size() + 1)));
    std::shuffle(all.begin(), all.end(), rng);
    const Types gold(all.begin(), all.begin() + 1 + static_cast<std::ptrdiff_t>(rng() % std::min<std::size_t>(4, all.size())));
    const std::size_t k = 1 + rng() % 10;
    const auto v = ndcg(pred, gold, h, k);
    EXPECT_NEAR(v.raw, oracle_ndcg(pred, gold, parent, h.max_depth(), k, false), 1e-12);
    EXPECT_NEAR(v.capped, oracle_ndcg(pred, gold, parent, h.max_depth(), k, true), 1e-12);
    EXPECT_GE(v.capped, 0.0);
    EXPECT_LE(v.capped, 1.0);
  }
}

TEST(Ndcg, OnlyPrefixMatters) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    const auto edges = testing::random_edges(rng, 4 + rng() % 20);
    const auto h = TypeHierarchy::from_edges(edges);
    Types all;
    for (const auto& [t, p] : edges) all.push_back(t);
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t k = 1 + rng() % 3;
    const Types gold{all[0]};
    Types a(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), k)));
    Types b = a;
    for (std::size_t i = k; i < all.size(); ++i) b.push_back(all[i]);
    EXPECT_DOUBLE_EQ(ndcg_at_k(a, gold, h, k), ndcg_at_k(b, gold, h, k));
  }
}

TEST(Mrr, Examples) {
  const Types gold{"wd:Q5"};
  EXPECT_DOUBLE_EQ(reciprocal_rank(Types{"wd:Q5", "wd:Q1"}, gold), 1.0);
  EXPECT_NEAR(reciprocal_rank(Types{"a", "b", "wd:Q5"}, gold), 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(reciprocal_rank(Types{"a"}, gold), 0.0);
  const std::vector<RankedJudgement> runs{{{"x", "y"}, {"x"}}, {{"a", "y"}, {"y"}}};
  EXPECT_DOUBLE_EQ(mrr(runs), 0.75);
  EXPECT_THROW(mrr(std::vector<RankedJudgement>{}), ValidationError);
}

TEST(ParseRun, Validation) {
  const auto ok = parse_run(json::parse(R"([{"id":"a","category":"boolean","type":["boolean"]},
      {"id":"b","category":"literal","type":["date"]},{"id":"c","category":"resource","type":["dbo:X"]}])"));
  EXPECT_EQ(ok.predictions.size(), 3u);
  EXPECT_NE(ok.find("b"), nullptr);
  EXPECT_EQ(ok.find("z"), nullptr);
  EXPECT_THROW(parse_run(json::parse(R"([{"id":"a","category":"boolean","type":["boolean"]},
      {"id":"a","category":"boolean","type":["boolean"]}])")), ValidationError);
  EXPECT_THROW(parse_run(json::parse(R"([{"id":"a","category":"resource","type":[]}])")), ValidationError);
  EXPECT_THROW(parse_run(json::parse(R"([{"id":"a","category":"literal","type":["person"]}])")), ValidationError);
  EXPECT_THROW(parse_run(json::parse(R"([{"id":"a","category":"boolean","type":["dbo:X"]}])")), ValidationError);
  EXPECT_THROW(parse_run(json::parse(R"([{"id":"a","category":"entity","type":["dbo:X"]}])")), Error);
  const auto again = parse_run(to_json(ok));
  EXPECT_EQ(again.predictions.size(), 3u);
  EXPECT_EQ(again.predictions[2].types, Types{"dbo:X"});
}

TEST(EvaluateRun, PerfectRunOnExamples) {
  const auto h = example_hierarchy();
  const auto gold = load_dataset(ATP_TEST_DATA "/example_questions.json", Source::dbpedia, Split::test);
  const auto run = load_run(ATP_TEST_DATA "/example_run.json");
  const auto r = evaluate_run(run, gold, &h, EvalMode::dbpedia);
  EXPECT_EQ(r.questions, 4u);
  EXPECT_DOUBLE_EQ(r.accuracy3, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy5, 1.0);
  EXPECT_EQ(r.typed, 3u);
  EXPECT_DOUBLE_EQ(r.ndcg5, 1.0);
  EXPECT_DOUBLE_EQ(r.ndcg10, 1.0);
  EXPECT_EQ(r.missing, 0u);
  EXPECT_EQ(r.per_category.at(FlatCategory::literal_date).correct, 1u);
}

TEST(EvaluateRun, WrongCategoryScoresZeroOnTypes) {
  const auto h = example_hierarchy();
  const auto gold = testing::example_questions();
  PredictionRun run;
  run.predictions = {{"dbpedia_1", RawCategory::resource, {"dbo:Gymnast"}},
                     {"dbpedia_2", RawCategory::boolean, {"boolean"}},
                     {"dbpedia_3", RawCategory::literal, {"number"}},
                     {"dbpedia_4", RawCategory::boolean, {"boolean"}}};
  const auto r = evaluate_run(run, gold, &h, EvalMode::dbpedia);
  EXPECT_DOUBLE_EQ(r.accuracy3, 0.75);
  EXPECT_DOUBLE_EQ(r.accuracy5, 0.5);
  // Gymnast alone against four gold types: 1 / IDCG@5 over four slots.
  const double idcg = 1.0 + 1.0 / std::log2(3.0) + 0.5 + 1.0 / std::log2(5.0);
  EXPECT_NEAR(r.ndcg5, (1.0 / idcg) / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.per_category.at(FlatCategory::literal_number).ndcg5, 0.0);
}

TEST(EvaluateRun, MissingUnmatchedAndWikidataMrr) {
  QuestionSet gold = parse_dataset(json::parse(R"([
      {"id":"w1","question":"Which human wrote it?","category":"resource","type":["wd:Q5","wd:Q215627"]},
      {"id":"w2","question":"What is it?","category":"resource","type":["wd:Q1"]},
      {"id":"w3","question":null,"category":"boolean","type":["boolean"]},
      {"id":"w4","question":"Unlabelled?","category":null,"type":[]}])"),
                                   Source::wikidata, Split::test);
  PredictionRun run;
  run.predictions = {{"w1", RawCategory::resource, {"wd:Q215627", "wd:Q5"}},
                     {"w3", RawCategory::boolean, {"boolean"}},
                     {"extra", RawCategory::boolean, {"boolean"}}};
  const auto r = evaluate_run(run, gold, nullptr, EvalMode::wikidata);
  EXPECT_EQ(r.unlabelled, 1u);
  EXPECT_EQ(r.missing, 1u);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.unmatched, 1u);
  EXPECT_NEAR(r.accuracy3, 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.mrr, 0.5);
  EXPECT_THROW(evaluate_run(run, gold, nullptr, EvalMode::dbpedia), ValidationError);
  const auto doc = r.to_json();
  EXPECT_EQ(doc.at("format"), "atp-eval-report");
  EXPECT_NE(r.to_text().find("mrr"), std::string::npos);
}

TEST(EvaluateRun, CapCountedAndNoted) {
  const auto h = example_hierarchy();
  QuestionSet gold;
  gold.questions.push_back(Question{"q", "Which gymnast?", RawCategory::resource, {"dbo:Gymnast"}});
  PredictionRun run;
  run.predictions = {{"q", RawCategory::resource, {"dbo:Athlete", "dbo:Gymnast"}}};
  run.metadata = json{{"stage2", "xmc"}};
  const auto r = evaluate_run(run, gold, &h, EvalMode::dbpedia);
  EXPECT_EQ(r.capped, 1u);
  EXPECT_DOUBLE_EQ(r.ndcg5, 1.0);
  EXPECT_EQ(r.notes.size(), 2u);
}

TEST(ErrorAnalysis, CountsMissesPerGoldType) {
  QuestionSet gold = parse_dataset(json::parse(R"([
      {"id":"a","question":"x?","category":"resource","type":["T1","T2"]},
      {"id":"b","question":"y?","category":"resource","type":["T1"]},
      {"id":"c","question":"z?","category":"resource","type":["T3"]},
      {"id":"d","question":"w?","category":"resource","type":["T2"]}])"),
                                   Source::dbpedia, Split::test);
  PredictionRun run;
  run.predictions = {{"a", RawCategory::resource, {"T2"}},
                     {"b", RawCategory::resource, {"T9"}},
                     {"c", RawCategory::resource, {"T3"}}};
  const auto rows = error_analysis(run, gold, 10);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].type, "T1");
  EXPECT_EQ(rows[0].total, 2u);
  EXPECT_EQ(rows[0].errors, 2u);
  EXPECT_EQ(rows[1].type, "T2");
  EXPECT_EQ(rows[1].errors, 1u);
  EXPECT_EQ(error_analysis(run, gold, 1).size(), 1u);
  EXPECT_NE(to_text(rows).find("#Errors"), std::string::npos);
  EXPECT_EQ(to_json(rows).size(), 2u);
}

}  // namespace
}  // namespace atp
