#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "atp/error.hpp"
#include "atp/text.hpp"
#include "atp/xmc.hpp"
#include "synthetic.hpp"

namespace atp {
namespace {

struct XmcData {
  Vocabulary vocab;
  LabelSet labels;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

std::vector<LabeledExample> vectorize(const QuestionSet& qs, const Vocabulary& vocab, LabelSet& labels, bool grow) {
  std::vector<LabeledExample> out;
  for (const auto& q : qs.questions) {
    if (q.category != RawCategory::resource || q.types.empty() || !q.has_text()) continue;
    LabeledExample ex{q.id, vocab.vectorize(q.text), {}};
    for (const auto& t : q.types) {
      if (grow) ex.labels.push_back(labels.add(t));
      else if (auto id = labels.id(t)) ex.labels.push_back(*id);
    }
    std::sort(ex.labels.begin(), ex.labels.end());
    ex.labels.erase(std::unique(ex.labels.begin(), ex.labels.end()), ex.labels.end());
    out.push_back(std::move(ex));
  }
  return out;
}

XmcData make_data(std::uint64_t seed = 42) {
  testing::CorpusOptions opt;
  opt.seed = seed;
  const auto corpus = testing::make_corpus(opt);
  std::vector<std::string> texts;
  for (const auto& q : corpus.train.questions) texts.push_back(q.text);
  XmcData d{Vocabulary::fit(texts), {}, {}, {}};
  d.train = vectorize(corpus.train, d.vocab, d.labels, true);
  d.test = vectorize(corpus.test, d.vocab, d.labels, false);
  return d;
}

SparseVector unit(std::uint32_t i, double v = 1.0) { return SparseVector::from_entries({{i, v}}); }

void expect_partition(const LabelIndex& idx, std::size_t n) {
  ASSERT_EQ(idx.label_count(), n);
  std::vector<int> seen(n, 0);
  for (std::size_t c = 0; c < idx.cluster_count(); ++c) {
    EXPECT_FALSE(idx.clusters[c].empty());
    EXPECT_TRUE(std::is_sorted(idx.clusters[c].begin(), idx.clusters[c].end()));
    for (auto l : idx.clusters[c]) {
      ++seen[l];
      EXPECT_EQ(idx.cluster_of[l], c);
    }
  }
  for (std::size_t l = 0; l < n; ++l) EXPECT_EQ(seen[l], 1) << "label " << l;
}

TEST(LabelSet, DenseIds) {
  LabelSet s;
  EXPECT_EQ(s.add("a"), 0u);
  EXPECT_EQ(s.add("b"), 1u);
  EXPECT_EQ(s.add("a"), 0u);
  EXPECT_EQ(s.id("b"), 1u);
  EXPECT_FALSE(s.id("c").has_value());
}

TEST(LabelEmbeddings, NormalizedSumOfPositives) {
  const std::vector<LabeledExample> train{
      {"q1", unit(0, 3.0), {0}}, {"q2", unit(1, 4.0), {0, 1}}, {"q3", unit(2), {1}}};
  const auto emb = build_label_embeddings(train, 3);
  ASSERT_EQ(emb.size(), 3u);
  ASSERT_EQ(emb[0].size(), 2u);
  EXPECT_NEAR(emb[0].entries()[0].value, 0.6, 1e-12);
  EXPECT_NEAR(emb[0].entries()[1].value, 0.8, 1e-12);
  EXPECT_NEAR(emb[1].norm(), 1.0, 1e-12);
  EXPECT_NEAR(emb[1].entries()[0].value, 4.0 / std::sqrt(17.0), 1e-12);
  EXPECT_TRUE(emb[2].empty());
}

TEST(ClusterLabels, SeparatedGroupsRecovered) {
  // Two orthogonal groups of four labels each.
  std::vector<SparseVector> emb;
  for (int i = 0; i < 4; ++i) emb.push_back(SparseVector::from_entries({{0, 1.0}, {static_cast<std::uint32_t>(2 + i), 0.1}}).normalized());
  for (int i = 0; i < 4; ++i) emb.push_back(SparseVector::from_entries({{1, 1.0}, {static_cast<std::uint32_t>(6 + i), 0.1}}).normalized());
  for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
    const auto idx = cluster_labels(emb, 2, 4, seed);
    ASSERT_EQ(idx.cluster_count(), 2u);
    expect_partition(idx, 8);
    for (int i = 1; i < 4; ++i) EXPECT_EQ(idx.cluster_of[i], idx.cluster_of[0]);
    for (int i = 5; i < 8; ++i) EXPECT_EQ(idx.cluster_of[i], idx.cluster_of[4]);
    EXPECT_NE(idx.cluster_of[0], idx.cluster_of[4]);
  }
}

TEST(ClusterLabels, TwoWaySplitMatchesBruteForceOptimum) {
  // With two tight antipodal groups the balanced optimum is unique; compare
  // the cosine objective against exhaustive search over balanced splits.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 6;
    std::vector<SparseVector> emb;
    for (std::size_t i = 0; i < n; ++i) {
      const double base = i < n / 2 ? 1.0 : -1.0;
      emb.push_back(SparseVector::from_entries({{0, base + noise(rng)}, {1, noise(rng)}, {2, 0.3 + noise(rng)}}).normalized());
    }
    auto objective = [&](const std::vector<int>& side) {
      double total = 0;
      for (int s = 0; s < 2; ++s) {
        std::vector<double> c(3, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (side[i] == s) emb[i].add_to(c);
        const double norm = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
        for (std::size_t i = 0; i < n; ++i)
          if (side[i] == s) total += emb[i].dot(c) / norm;
      }
      return total;
    };
    double best = -1e9;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (std::popcount(mask) != static_cast<int>(n / 2)) continue;
      std::vector<int> side(n);
      for (std::size_t i = 0; i < n; ++i) side[i] = (mask >> i) & 1u;
      best = std::max(best, objective(side));
    }
    const auto idx = cluster_labels(emb, 2, 3, static_cast<std::uint64_t>(trial));
    ASSERT_EQ(idx.cluster_count(), 2u);
    std::vector<int> side(n);
    for (std::size_t i = 0; i < n; ++i) side[i] = static_cast<int>(idx.cluster_of[i]);
    EXPECT_NEAR(objective(side), best, 1e-9);
  }
}

TEST(ClusterLabels, BalanceAndBoundProperty) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> val(0.1, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng() % 120;
    const int branching = 2 + static_cast<int>(rng() % 6);
    const int max_leaf = 1 + static_cast<int>(rng() % 20);
    std::vector<SparseVector> emb;
    std::size_t zero = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng() % 10 == 0) {
        emb.emplace_back();
        ++zero;
        continue;
      }
      std::vector<SparseEntry> e;
      for (int j = 0; j < 4; ++j) e.push_back({static_cast<std::uint32_t>(rng() % 30), val(rng)});
      emb.push_back(SparseVector::from_entries(e).normalized());
    }
    const auto idx = cluster_labels(emb, branching, max_leaf, rng());
    expect_partition(idx, n);
    EXPECT_LE(idx.cluster_count(), cluster_count_bound(n - zero, zero, branching, max_leaf));
    for (std::size_t c = 0; c < idx.cluster_count(); ++c) {
      EXPECT_LE(idx.clusters[c].size(), static_cast<std::size_t>(max_leaf));
      for (auto l : idx.clusters[c]) EXPECT_EQ(emb[l].empty(), static_cast<bool>(idx.overflow[c]));
    }
  }
}

TEST(ClusterLabels, DeterministicAndErrors) {
  const auto d = make_data();
  const auto emb = build_label_embeddings(d.train, d.labels.size());
  const auto a = cluster_labels(emb, 2, 4, 3);
  const auto b = cluster_labels(emb, 2, 4, 3);
  EXPECT_EQ(a.clusters, b.clusters);
  EXPECT_THROW(cluster_labels(emb, 1, 4, 3), ValidationError);
  EXPECT_THROW(cluster_labels(emb, 2, 0, 3), ValidationError);
  EXPECT_THROW(cluster_labels(std::vector<SparseVector>{}, 2, 4, 3), ValidationError);
}

TEST(LabelIndex, JsonRoundTrip) {
  const auto d = make_data();
  const auto emb = build_label_embeddings(d.train, d.labels.size());
  const auto idx = cluster_labels(emb, 3, 5, 1);
  const auto again = LabelIndex::from_json(idx.to_json());
  EXPECT_EQ(again.clusters, idx.clusters);
  EXPECT_EQ(again.cluster_of, idx.cluster_of);
  EXPECT_EQ(again.depth, idx.depth);
  auto broken = idx.to_json();
  broken["clusters"][0]["labels"].push_back(broken["clusters"][1]["labels"][0]);
  EXPECT_THROW(LabelIndex::from_json(broken), Error);
}

LabelIndex fixed_index(std::vector<std::vector<std::uint32_t>> clusters) {
  LabelIndex idx;
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  idx.cluster_of.assign(n, 0);
  idx.tree.push_back({});
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto l : clusters[c]) idx.cluster_of[l] = static_cast<std::uint32_t>(c);
    idx.tree[0].children.push_back(static_cast<std::uint32_t>(idx.tree.size()));
    idx.tree.push_back({{}, static_cast<int>(c)});
  }
  idx.clusters = std::move(clusters);
  idx.overflow.assign(idx.clusters.size(), false);
  idx.depth = 2;
  return idx;
}

TEST(PredictTypesXmc, FullBeamMatchesExhaustiveScoring) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  const LabelSet labels({"L0", "L1", "L2", "L3", "L4", "L5"});
  const auto idx = fixed_index({{0, 1}, {2, 3, 4}, {5}});
  const SparseVector x;
  for (int trial = 0; trial < 100; ++trial) {
    json scores = json::object();
    for (std::uint32_t l = 0; l < 6; ++l)
      if (rng() % 4 != 0) scores["q"][labels.label(l)] = val(rng);
    if (!scores.contains("q")) scores["q"] = json::object();
    const ImportedMatcher matcher(scores, labels, idx);
    std::vector<double> priors(6);
    for (auto& p : priors) p = val(rng) + 1.0;
    EnsembleRanker ranker;
    ranker.weights = {val(rng), val(rng), val(rng)};
    // Oracle: cluster score = max label score in cluster (0 when absent).
    std::vector<std::pair<double, std::string>> oracle;
    for (std::uint32_t l = 0; l < 6; ++l) {
      auto label_score = [&](std::uint32_t m) {
        return scores["q"].contains(labels.label(m)) ? scores["q"][labels.label(m)].get<double>() : 0.0;
      };
      double cs = -1e300;
      for (auto m : idx.clusters[idx.cluster_of[l]]) cs = std::max(cs, label_score(m));
      oracle.push_back({ranker.score(cs, label_score(l), priors[l]), labels.label(l)});
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const std::size_t k = 1 + rng() % 6;
    const auto got = predict_types_xmc(matcher, ranker, idx, labels, priors, MatchQuery{"q", x}, 3, k);
    ASSERT_EQ(got.size(), k);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(got[i].label, oracle[i].second);
      EXPECT_NEAR(got[i].score, oracle[i].first, 1e-12);
    }
  }
}

TEST(PredictTypesXmc, BeamRestrictsCandidatesAndErrors) {
  const LabelSet labels({"L0", "L1", "L2"});
  const auto idx = fixed_index({{0}, {1}, {2}});
  const ImportedMatcher matcher(json{{"q", {{"L0", 0.1}, {"L1", 0.9}, {"L2", 0.5}}}}, labels, idx);
  const std::vector<double> priors{0, 0, 0};
  const SparseVector x;
  const EnsembleRanker ranker;
  const auto got = predict_types_xmc(matcher, ranker, idx, labels, priors, MatchQuery{"q", x}, 1, 10);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].label, "L1");
  EXPECT_THROW(predict_types_xmc(matcher, ranker, idx, labels, priors, MatchQuery{"q", x}, 0, 10), ValidationError);
  EXPECT_THROW(predict_types_xmc(matcher, ranker, idx, labels, priors, MatchQuery{"q", x}, 1, 0), ValidationError);
  const auto unknown = predict_types_xmc(matcher, ranker, idx, labels, priors, MatchQuery{"other", x}, 3, 10);
  EXPECT_EQ(unknown.size(), 3u);
}

TEST(EnsembleRanker, LossMonotoneAndBeatsFallback) {
  const auto d = make_data();
  const auto emb = build_label_embeddings(d.train, d.labels.size());
  const auto idx = cluster_labels(emb, 4, 8, 1);
  const auto matcher = train_matchers(idx, d.train, MatcherParams{});
  std::vector<double> priors(d.labels.size(), 0.0);
  for (const auto& ex : d.train)
    for (auto l : ex.labels) priors[l] += 1.0 / static_cast<double>(d.train.size());
  RankerParams rp;
  rp.min_questions = 10;
  const auto ranker = train_ensemble_ranker(matcher, idx, priors, d.test, rp);
  EXPECT_FALSE(ranker.fallback);
  ASSERT_FALSE(ranker.epoch_loss.empty());
  for (std::size_t e = 1; e < ranker.epoch_loss.size(); ++e) EXPECT_LE(ranker.epoch_loss[e], ranker.epoch_loss[e - 1]);
  rp.min_questions = d.test.size() + 1;
  const auto fb = train_ensemble_ranker(matcher, idx, priors, d.test, rp);
  EXPECT_TRUE(fb.fallback);
  EXPECT_EQ(fb.weights, EnsembleRanker::kFallbackWeights);
  const auto again = EnsembleRanker::from_json(ranker.to_json());
  EXPECT_EQ(again.weights, ranker.weights);
  EXPECT_EQ(again.fallback, ranker.fallback);
}

TEST(LinearMatcher, SaveLoadRoundTrip) {
  const auto d = make_data();
  const auto emb = build_label_embeddings(d.train, d.labels.size());
  const auto idx = cluster_labels(emb, 4, 8, 1);
  const auto matcher = train_matchers(idx, d.train, MatcherParams{});
  EXPECT_FALSE(matcher.degenerate_cluster_model());
  const auto dir = testing::temp_dir("matcher");
  matcher.save(dir / "m.bin");
  const auto again = LinearMatcher::load(dir / "m.bin");
  for (const auto& ex : d.test) {
    const MatchQuery q{ex.id, ex.x};
    EXPECT_EQ(again.cluster_scores(q), matcher.cluster_scores(q));
    for (std::size_t c = 0; c < idx.cluster_count(); ++c) EXPECT_EQ(again.label_scores(q, c), matcher.label_scores(q, c));
  }
  write_text_file(dir / "bad.bin", "not a matcher");
  EXPECT_THROW(LinearMatcher::load(dir / "bad.bin"), ParseError);
}

TEST(LinearMatcher, SingleClusterIsDegenerate) {
  const auto d = make_data();
  const auto emb = build_label_embeddings(d.train, d.labels.size());
  const auto idx = cluster_labels(emb, 2, static_cast<int>(d.labels.size()), 1);
  ASSERT_EQ(idx.cluster_count(), 1u);
  const auto matcher = train_matchers(idx, d.train, MatcherParams{});
  EXPECT_TRUE(matcher.degenerate_cluster_model());
  const MatchQuery q{d.test[0].id, d.test[0].x};
  EXPECT_EQ(matcher.cluster_scores(q), std::vector<double>{0.0});
}

TEST(XmcModel, TrainPredictsGoldLeafAndRoundTrips) {
  const auto d = make_data();
  XmcConfig cfg;
  cfg.branching = 4;
  cfg.max_leaf = 8;
  cfg.ranker.min_questions = 20;
  const auto model = train_xmc(d.train, d.labels, cfg, d.vocab.hash());
  EXPECT_GT(model.heldout_size, 0u);
  std::size_t hits = 0;
  for (const auto& ex : d.test) {
    const auto r = model.predict(MatchQuery{ex.id, ex.x}, 10);
    ASSERT_LE(r.size(), 10u);
    if (!r.empty() && std::binary_search(ex.labels.begin(), ex.labels.end(), *d.labels.id(r[0].label))) ++hits;
  }
  EXPECT_GT(static_cast<double>(hits) / static_cast<double>(d.test.size()), 0.8);

  const auto dir = testing::temp_dir("xmc_model");
  model.save(dir);
  const auto again = XmcModel::load(dir);
  EXPECT_EQ(again.labels.labels(), model.labels.labels());
  EXPECT_EQ(again.priors, model.priors);
  EXPECT_EQ(again.index.clusters, model.index.clusters);
  EXPECT_EQ(again.ranker.weights, model.ranker.weights);
  EXPECT_EQ(again.vocab_hash, model.vocab_hash);
  for (const auto& ex : d.test) {
    const MatchQuery q{ex.id, ex.x};
    EXPECT_EQ(again.predict(q, 10), model.predict(q, 10));
  }
}

TEST(XmcModel, DeterministicForSeed) {
  const auto d = make_data();
  XmcConfig cfg;
  cfg.branching = 3;
  cfg.max_leaf = 6;
  cfg.threads = 1;
  const auto a = train_xmc(d.train, d.labels, cfg);
  cfg.threads = 4;
  const auto b = train_xmc(d.train, d.labels, cfg);
  EXPECT_EQ(a.index.clusters, b.index.clusters);
  EXPECT_EQ(a.ranker.weights, b.ranker.weights);
  for (const auto& ex : d.test) EXPECT_EQ(a.predict({ex.id, ex.x}, 5), b.predict({ex.id, ex.x}, 5));
}

TEST(XmcConfig, JsonValidation) {
  XmcConfig cfg;
  const auto again = XmcConfig::from_json(cfg.to_json());
  EXPECT_EQ(again.branching, cfg.branching);
  EXPECT_EQ(again.ranker.beam, cfg.beam);
  EXPECT_THROW(XmcConfig::from_json(json{{"branching", 1}}), ValidationError);
  EXPECT_THROW(XmcConfig::from_json(json{{"max_leaf", 0}}), ValidationError);
  EXPECT_THROW(XmcConfig::from_json(json{{"beam", 0}}), ValidationError);
  EXPECT_THROW(XmcConfig::from_json(json{{"heldout_folds", 1}}), ValidationError);
}

}  // namespace
}  // namespace atp
