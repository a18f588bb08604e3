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

#include "atp/hinge.hpp"
#include "atp/io.hpp"
#include "atp/ranked.hpp"
#include "atp/sparse.hpp"

namespace atp {

/// Dense ids for type labels.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels);

  /// Returns the id of `label`, inserting it when new.
  std::uint32_t add(const std::string& label);
  std::optional<std::uint32_t> id(std::string_view label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
};

/// A vectorized resource question with its gold label ids (sorted, unique).
struct LabeledExample {
  std::string id;
  SparseVector x;
  std::vector<std::uint32_t> labels;
};

/// Label embedding by positive-instance feature aggregation: the normalized
/// sum of the vectors of every example carrying the label. Labels without
/// positives get an empty (zero) embedding.
std::vector<SparseVector> build_label_embeddings(std::span<const LabeledExample> train, std::size_t n_labels);

/// Leaf clusters of the label tree plus the tree itself.
struct LabelIndex {
  struct Node {
    std::vector<std::uint32_t> children;  // node ids
    int cluster = -1;                     // leaf -> cluster id
  };

  std::vector<std::vector<std::uint32_t>> clusters;  // sorted label ids
  std::vector<bool> overflow;                        // cluster holds zero-embedding labels
  std::vector<Node> tree;                            // node 0 is the root
  std::vector<std::uint32_t> cluster_of;             // label id -> cluster id
  int branching = 8;
  int max_leaf = 64;
  std::uint64_t seed = 0;
  int depth = 0;

  std::size_t cluster_count() const { return clusters.size(); }
  std::size_t label_count() const { return cluster_of.size(); }

  json to_json() const;
  static LabelIndex from_json(const json& doc);
};

/// Upper bound on the leaf count produced by cluster_labels: embedded labels
/// form leaves of at least max(1, floor((max_leaf + 1) / branching)) labels,
/// overflow labels are chunked by max_leaf.
std::size_t cluster_count_bound(std::size_t embedded, std::size_t zero, int branching, int max_leaf);

/// Recursive balanced spherical k-means over the label embeddings. A node
/// with more than `max_leaf` labels is split into min(branching, n) children
/// whose sizes differ by at most one; centroids are seeded farthest-first
/// from a seeded starting label. Zero embeddings go to overflow clusters.
LabelIndex cluster_labels(std::span<const SparseVector> embeddings, int branching, int max_leaf,
                          std::uint64_t seed);

/// What a matcher sees of a question.
struct MatchQuery {
  std::string_view id;
  const SparseVector& x;
};

/// Scores label clusters, then labels within a cluster.
class Matcher {
 public:
  virtual ~Matcher() = default;
  /// One score per cluster of the index the matcher was built for.
  virtual std::vector<double> cluster_scores(const MatchQuery& q) const = 0;
  /// One score per label of `cluster`, aligned with LabelIndex::clusters.
  virtual std::vector<double> label_scores(const MatchQuery& q, std::size_t cluster) const = 0;
};

struct MatcherParams {
  HingeParams cluster;
  HingeParams label;
  unsigned threads = 1;
};

/// Sparse linear matcher: a multi-positive one-vs-rest cluster model and one
/// one-vs-rest label model per cluster.
class LinearMatcher final : public Matcher {
 public:
  LinearMatcher() = default;

  std::vector<double> cluster_scores(const MatchQuery& q) const override;
  std::vector<double> label_scores(const MatchQuery& q, std::size_t cluster) const override;

  /// Clusters whose label model is missing are scored by prior only (label
  /// score 0).
  bool has_label_model(std::size_t cluster) const { return label_models_.at(cluster).has_value(); }
  bool degenerate_cluster_model() const { return !cluster_model_.has_value(); }
  std::size_t cluster_count() const { return label_models_.size(); }

  void save(const std::filesystem::path& path) const;
  static LinearMatcher load(const std::filesystem::path& path);

  friend LinearMatcher train_matchers(const LabelIndex&, std::span<const LabeledExample>, const MatcherParams&);

 private:
  std::optional<OvrModel> cluster_model_;
  std::vector<std::size_t> cluster_sizes_;
  std::vector<std::optional<OvrModel>> label_models_;
};

/// Cluster targets are the clusters holding any gold label; each label model
/// sees only the examples routed to its cluster by their gold labels.
LinearMatcher train_matchers(const LabelIndex& index, std::span<const LabeledExample> train,
                             const MatcherParams& params);

/// Externally computed label scores keyed by question id. A label's score
/// defaults to 0 when absent; a cluster scores the max over its labels.
class ImportedMatcher final : public Matcher {
 public:
  ImportedMatcher(const json& scores, const LabelSet& labels, const LabelIndex& index);
  static ImportedMatcher load(const std::filesystem::path& path, const LabelSet& labels, const LabelIndex& index);

  std::vector<double> cluster_scores(const MatchQuery& q) const override;
  std::vector<double> label_scores(const MatchQuery& q, std::size_t cluster) const override;

 private:
  std::map<std::string, std::unordered_map<std::uint32_t, double>> scores_;
  const LabelIndex* index_;
};

/// Linear combination of (cluster score, label score, label prior).
struct EnsembleRanker {
  static constexpr std::array<double, 3> kFallbackWeights = {1.0, 1.0, 0.1};

  std::array<double, 3> weights = kFallbackWeights;
  bool fallback = true;
  /// Regularized mean pairwise hinge loss after each epoch.
  std::vector<double> epoch_loss;

  double score(double cluster_score, double label_score, double prior) const {
    return weights[0] * cluster_score + weights[1] * label_score + weights[2] * prior;
  }

  json to_json() const;
  static EnsembleRanker from_json(const json& doc);
};

struct RankerParams {
  int epochs = 50;
  double lambda = 1e-4;
  double eta0 = 1.0;
  std::size_t min_questions = 50;
  std::size_t beam = 4;
};

/// Fits the ranker weights by pairwise hinge loss over (gold, non-gold) label
/// pairs among the candidates of each held-out question. Each epoch takes a
/// full-batch subgradient step with backtracking, so the recorded loss never
/// increases. Falls back to kFallbackWeights when fewer than
/// `min_questions` held-out questions are available.
EnsembleRanker train_ensemble_ranker(const Matcher& matcher, const LabelIndex& index,
                                     std::span<const double> priors, std::span<const LabeledExample> heldout,
                                     const RankerParams& params);

/// Candidate features for one question: every label of the top-`beam`
/// clusters with its cluster score, label score and prior.
struct Candidate {
  std::uint32_t label;
  double cluster_score;
  double label_score;
  double prior;
};
std::vector<Candidate> candidate_labels(const Matcher& matcher, const LabelIndex& index,
                                        std::span<const double> priors, const MatchQuery& q, std::size_t beam);

RankedTypeList predict_types_xmc(const Matcher& matcher, const EnsembleRanker& ranker, const LabelIndex& index,
                                 const LabelSet& labels, std::span<const double> priors, const MatchQuery& q,
                                 std::size_t beam, std::size_t k);

struct XmcConfig {
  int branching = 8;
  int max_leaf = 64;
  std::size_t beam = 4;
  HingeParams cluster_hyper{1.0, 20, 11};
  HingeParams label_hyper{1.0, 20, 12};
  RankerParams ranker;
  /// 1 / heldout_folds of the examples train the ranker.
  int heldout_folds = 5;
  std::uint64_t seed = 7;
  unsigned threads = 1;

  json to_json() const;
  static XmcConfig from_json(const json& doc);
  static XmcConfig from_json(const json& doc, XmcConfig defaults);
};

/// Trained XMC bundle.
struct XmcModel {
  XmcConfig config;
  LabelSet labels;
  std::vector<double> priors;  // training frequency per label
  LabelIndex index;
  LinearMatcher matcher;
  EnsembleRanker ranker;
  std::uint64_t vocab_hash = 0;
  std::size_t heldout_size = 0;

  RankedTypeList predict(const MatchQuery& q, std::size_t k) const {
    return predict_types_xmc(matcher, ranker, index, labels, priors, q, config.beam, k);
  }

  /// Writes label_index.json, matcher.bin, ranker.json and xmc.json into `dir`.
  void save(const std::filesystem::path& dir) const;
  static XmcModel load(const std::filesystem::path& dir);
};

/// Label embeddings and matchers use all but one fold (seeded split); the
/// remaining fold trains the ensemble ranker.
XmcModel train_xmc(std::span<const LabeledExample> train, LabelSet labels, const XmcConfig& config,
                   std::uint64_t vocab_hash = 0);

}  // namespace atp
