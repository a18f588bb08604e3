#include "atp/xmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "atp/error.hpp"
#include "atp/log.hpp"
#include "atp/parallel.hpp"
#include "atp/random.hpp"

namespace atp {

// ---------------------------------------------------------------- labels

LabelSet::LabelSet(std::vector<std::string> labels) {
  for (auto& l : labels) add(l);
}

std::uint32_t LabelSet::add(const std::string& label) {
  auto [it, inserted] = lookup_.try_emplace(label, static_cast<std::uint32_t>(labels_.size()));
  if (inserted) labels_.push_back(label);
  return it->second;
}

std::optional<std::uint32_t> LabelSet::id(std::string_view label) const {
  auto it = lookup_.find(std::string(label));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<SparseVector> build_label_embeddings(std::span<const LabeledExample> train, std::size_t n_labels) {
  std::vector<std::vector<const SparseVector*>> members(n_labels);
  for (const auto& ex : train) {
    for (auto l : ex.labels) {
      if (l >= n_labels) throw ValidationError("build_label_embeddings: label id out of range");
      members[l].push_back(&ex.x);
    }
  }
  std::vector<SparseVector> out(n_labels);
  for (std::size_t l = 0; l < n_labels; ++l)
    if (!members[l].empty()) out[l] = SparseVector::weighted_sum(members[l]).normalized();
  return out;
}

// ---------------------------------------------------------------- clustering

namespace {

constexpr int kMaxKmeansIterations = 30;

/// Balanced spherical k-means over `members`; returns a cluster in [0, k)
/// per member. Cluster c holds n/k labels, plus one for c < n % k.
std::vector<std::uint32_t> balanced_kmeans(std::span<const std::uint32_t> members,
                                           std::span<const SparseVector> emb, std::size_t k,
                                           std::uint64_t seed) {
  const std::size_t n = members.size();
  std::vector<std::uint32_t> features;
  for (auto m : members)
    for (const auto& e : emb[m].entries()) features.push_back(e.index);
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  const std::size_t dim = features.size();

  std::vector<std::vector<std::pair<std::uint32_t, double>>> local(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : emb[members[i]].entries())
      local[i].emplace_back(
          static_cast<std::uint32_t>(std::lower_bound(features.begin(), features.end(), e.index) - features.begin()),
          e.value);

  auto sim = [&](std::size_t i, const std::vector<double>& centroid) {
    double s = 0.0;
    for (const auto& [f, v] : local[i]) s += v * centroid[f];
    return s;
  };

  // Farthest-first seeding from a seeded start.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids(k, std::vector<double>(dim, 0.0));
  std::vector<bool> chosen(n, false);
  std::vector<double> closest(n, -std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(uniform_index(rng, n));
  for (std::size_t c = 0; c < k; ++c) {
    chosen[pick] = true;
    for (const auto& [f, v] : local[pick]) centroids[c][f] = v;
    std::size_t next = n;
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::max(closest[i], sim(i, centroids[c]));
      if (!chosen[i] && (next == n || closest[i] < closest[next])) next = i;
    }
    pick = next;
  }

  std::vector<std::size_t> capacity(k, n / k);
  for (std::size_t c = 0; c < n % k; ++c) ++capacity[c];

  std::vector<std::uint32_t> assign(n, UINT32_MAX);
  struct Pref {
    double sim;
    std::uint32_t item;
    std::uint32_t cluster;
  };
  std::vector<Pref> prefs(n * k);
  for (int iter = 0; iter < kMaxKmeansIterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c)
        prefs[i * k + c] = {sim(i, centroids[c]), static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c)};
    std::sort(prefs.begin(), prefs.end(), [](const Pref& a, const Pref& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      if (a.item != b.item) return a.item < b.item;
      return a.cluster < b.cluster;
    });
    std::vector<std::uint32_t> next(n, UINT32_MAX);
    std::vector<std::size_t> fill(k, 0);
    for (const auto& p : prefs) {
      if (next[p.item] != UINT32_MAX || fill[p.cluster] == capacity[p.cluster]) continue;
      next[p.item] = p.cluster;
      ++fill[p.cluster];
    }
    if (next == assign) break;
    assign = std::move(next);
    for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& [f, v] : local[i]) centroids[assign[i]][f] += v;
    for (auto& c : centroids) {
      double norm = 0.0;
      for (double v : c) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (double& v : c) v /= norm;
    }
  }
  return assign;
}

struct TreeBuilder {
  LabelIndex& index;
  std::span<const SparseVector> emb;

  std::uint32_t new_node() {
    index.tree.emplace_back();
    return static_cast<std::uint32_t>(index.tree.size() - 1);
  }

  void leaf(std::uint32_t node, std::vector<std::uint32_t> labels, bool overflow, int depth) {
    std::sort(labels.begin(), labels.end());
    const auto cid = static_cast<std::uint32_t>(index.clusters.size());
    for (auto l : labels) index.cluster_of[l] = cid;
    index.clusters.push_back(std::move(labels));
    index.overflow.push_back(overflow);
    index.tree[node].cluster = static_cast<int>(cid);
    index.depth = std::max(index.depth, depth);
  }

  void build(std::uint32_t node, std::vector<std::uint32_t> members, std::uint64_t seed, int depth) {
    if (members.size() <= static_cast<std::size_t>(index.max_leaf)) {
      leaf(node, std::move(members), false, depth);
      return;
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(index.branching), members.size());
    const auto assign = balanced_kmeans(members, emb, k, seed);
    std::vector<std::vector<std::uint32_t>> parts(k);
    for (std::size_t i = 0; i < members.size(); ++i) parts[assign[i]].push_back(members[i]);
    for (std::size_t c = 0; c < k; ++c) {
      const auto child = new_node();
      index.tree[node].children.push_back(child);
      build(child, std::move(parts[c]), mix_seed(seed + c + 1), depth + 1);
    }
  }
};

}  // namespace

std::size_t cluster_count_bound(std::size_t embedded, std::size_t zero, int branching, int max_leaf) {
  const std::size_t min_leaf =
      std::max<std::size_t>(1, static_cast<std::size_t>(max_leaf + 1) / static_cast<std::size_t>(branching));
  const std::size_t ml = static_cast<std::size_t>(max_leaf);
  return (embedded + min_leaf - 1) / min_leaf + (zero + ml - 1) / ml;
}

LabelIndex cluster_labels(std::span<const SparseVector> embeddings, int branching, int max_leaf,
                          std::uint64_t seed) {
  if (branching < 2) throw ValidationError("cluster_labels: branching must be >= 2");
  if (max_leaf < 1) throw ValidationError("cluster_labels: max_leaf must be >= 1");
  if (embeddings.empty()) throw ValidationError("cluster_labels: no labels");
  LabelIndex index;
  index.branching = branching;
  index.max_leaf = max_leaf;
  index.seed = seed;
  index.cluster_of.assign(embeddings.size(), 0);

  std::vector<std::uint32_t> embedded, zero;
  for (std::size_t l = 0; l < embeddings.size(); ++l)
    (embeddings[l].empty() ? zero : embedded).push_back(static_cast<std::uint32_t>(l));

  TreeBuilder builder{index, embeddings};
  const auto root = builder.new_node();
  if (zero.empty()) {
    builder.build(root, std::move(embedded), seed, 1);
  } else {
    if (!embedded.empty()) {
      const auto child = builder.new_node();
      index.tree[root].children.push_back(child);
      builder.build(child, std::move(embedded), seed, 2);
    }
    log::info("cluster_labels: " + std::to_string(zero.size()) + " labels without positives routed to overflow");
    for (std::size_t start = 0; start < zero.size(); start += static_cast<std::size_t>(max_leaf)) {
      const auto end = std::min(zero.size(), start + static_cast<std::size_t>(max_leaf));
      const auto child = builder.new_node();
      index.tree[root].children.push_back(child);
      builder.leaf(child, std::vector<std::uint32_t>(zero.begin() + static_cast<std::ptrdiff_t>(start),
                                                     zero.begin() + static_cast<std::ptrdiff_t>(end)),
                   true, 2);
    }
  }
  return index;
}

json LabelIndex::to_json() const {
  json doc;
  doc["format"] = "atp-label-index";
  doc["version"] = 1;
  doc["branching"] = branching;
  doc["max_leaf"] = max_leaf;
  doc["seed"] = seed;
  doc["depth"] = depth;
  doc["label_count"] = label_count();
  json cl = json::array();
  for (std::size_t c = 0; c < clusters.size(); ++c)
    cl.push_back(json{{"labels", clusters[c]}, {"overflow", static_cast<bool>(overflow[c])}});
  doc["clusters"] = std::move(cl);
  json nodes = json::array();
  for (const auto& n : tree) nodes.push_back(json{{"children", n.children}, {"cluster", n.cluster}});
  doc["tree"] = std::move(nodes);
  return doc;
}

LabelIndex LabelIndex::from_json(const json& doc) {
  LabelIndex idx;
  try {
    if (doc.at("format").get<std::string>() != "atp-label-index" || doc.at("version").get<int>() != 1)
      throw ParseError("label index: unsupported format");
    idx.branching = doc.at("branching").get<int>();
    idx.max_leaf = doc.at("max_leaf").get<int>();
    idx.seed = doc.at("seed").get<std::uint64_t>();
    idx.depth = doc.at("depth").get<int>();
    const auto n_labels = doc.at("label_count").get<std::size_t>();
    idx.cluster_of.assign(n_labels, UINT32_MAX);
    for (const auto& c : doc.at("clusters")) {
      idx.clusters.push_back(c.at("labels").get<std::vector<std::uint32_t>>());
      idx.overflow.push_back(c.at("overflow").get<bool>());
    }
    for (const auto& n : doc.at("tree"))
      idx.tree.push_back({n.at("children").get<std::vector<std::uint32_t>>(), n.at("cluster").get<int>()});
  } catch (const json::exception& e) {
    throw ParseError(std::string("label index: ") + e.what());
  }
  for (std::size_t c = 0; c < idx.clusters.size(); ++c) {
    if (idx.clusters[c].empty()) throw ValidationError("label index: empty cluster");
    for (auto l : idx.clusters[c]) {
      if (l >= idx.cluster_of.size() || idx.cluster_of[l] != UINT32_MAX)
        throw ValidationError("label index: clusters do not partition the labels");
      idx.cluster_of[l] = static_cast<std::uint32_t>(c);
    }
  }
  if (std::find(idx.cluster_of.begin(), idx.cluster_of.end(), UINT32_MAX) != idx.cluster_of.end())
    throw ValidationError("label index: unassigned label");
  return idx;
}

// ---------------------------------------------------------------- matchers

std::vector<double> LinearMatcher::cluster_scores(const MatchQuery& q) const {
  std::vector<double> out(cluster_count(), 0.0);
  if (!cluster_model_) return out;
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = cluster_model_->decision(c, q.x);
  return out;
}

std::vector<double> LinearMatcher::label_scores(const MatchQuery& q, std::size_t cluster) const {
  const auto& model = label_models_.at(cluster);
  std::vector<double> out(cluster_sizes_.at(cluster), 0.0);
  if (!model) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = model->decision(i, q.x);
  return out;
}

LinearMatcher train_matchers(const LabelIndex& index, std::span<const LabeledExample> train,
                             const MatcherParams& params) {
  const std::size_t nc = index.cluster_count();
  if (nc == 0) throw ValidationError("train_matchers: empty label index");
  if (train.empty()) throw ValidationError("train_matchers: no training examples");
  LinearMatcher m;
  for (const auto& c : index.clusters) m.cluster_sizes_.push_back(c.size());

  std::vector<const SparseVector*> xs;
  std::vector<std::vector<std::uint32_t>> cluster_targets;
  for (const auto& ex : train) {
    std::vector<std::uint32_t> cs;
    for (auto l : ex.labels) {
      if (l >= index.label_count()) throw ValidationError("train_matchers: label outside the index");
      cs.push_back(index.cluster_of[l]);
    }
    std::sort(cs.begin(), cs.end());
    cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
    xs.push_back(&ex.x);
    cluster_targets.push_back(std::move(cs));
  }
  if (nc > 1) {
    HingeParams hp = params.cluster;
    hp.threads = params.threads;
    m.cluster_model_ = train_ovr_hinge(xs, cluster_targets, nc, hp);
  }

  m.label_models_.resize(nc);
  parallel_for(nc, params.threads, [&](std::size_t c) {
    const auto& members = index.clusters[c];
    std::vector<const SparseVector*> routed;
    std::vector<std::vector<std::uint32_t>> targets;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (!std::binary_search(cluster_targets[i].begin(), cluster_targets[i].end(), static_cast<std::uint32_t>(c)))
        continue;
      std::vector<std::uint32_t> local;
      for (auto l : train[i].labels) {
        auto it = std::lower_bound(members.begin(), members.end(), l);
        if (it != members.end() && *it == l) local.push_back(static_cast<std::uint32_t>(it - members.begin()));
      }
      routed.push_back(xs[i]);
      targets.push_back(std::move(local));
    }
    if (routed.empty()) return;
    HingeParams hp = params.label;
    hp.seed = mix_seed(params.label.seed + c);
    hp.threads = 1;
    m.label_models_[c] = train_ovr_hinge(routed, targets, members.size(), hp);
  });
  std::size_t prior_only = 0;
  for (std::size_t c = 0; c < nc; ++c) prior_only += !m.label_models_[c].has_value();
  if (prior_only > 0)
    log::warning("train_matchers: " + std::to_string(prior_only) +
                 " clusters have no positive questions; their labels are scored by prior only");
  return m;
}

namespace {

constexpr std::string_view kMatcherMagic = "ATP-XMC-MATCHER";

void write_ovr(BinaryWriter& w, const OvrModel& m) {
  w.u64(m.n_classes());
  for (std::size_t c = 0; c < m.n_classes(); ++c) {
    w.f64(m.bias[c]);
    w.u64(m.weights[c].size());
    for (const auto& e : m.weights[c].entries()) {
      w.u32(e.index);
      w.f64(e.value);
    }
  }
}

OvrModel read_ovr(BinaryReader& r) {
  OvrModel m;
  const auto n = r.u64();
  for (std::uint64_t c = 0; c < n; ++c) {
    m.bias.push_back(r.f64());
    std::vector<SparseEntry> entries(r.u64());
    for (auto& e : entries) {
      e.index = r.u32();
      e.value = r.f64();
    }
    m.weights.push_back(SparseVector::from_entries(std::move(entries)));
  }
  return m;
}

}  // namespace

void LinearMatcher::save(const std::filesystem::path& path) const {
  BinaryWriter w;
  w.header(kMatcherMagic, 1);
  w.u64(cluster_count());
  for (auto s : cluster_sizes_) w.u64(s);
  w.u8(cluster_model_ ? 1 : 0);
  if (cluster_model_) write_ovr(w, *cluster_model_);
  for (const auto& lm : label_models_) {
    w.u8(lm ? 1 : 0);
    if (lm) write_ovr(w, *lm);
  }
  w.save(path);
}

LinearMatcher LinearMatcher::load(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::open(path);
  r.header(kMatcherMagic, 1);
  LinearMatcher m;
  const auto nc = r.u64();
  for (std::uint64_t c = 0; c < nc; ++c) m.cluster_sizes_.push_back(r.u64());
  if (r.u8()) {
    m.cluster_model_ = read_ovr(r);
    if (m.cluster_model_->n_classes() != nc) throw ValidationError("matcher: cluster model class count mismatch");
  }
  for (std::uint64_t c = 0; c < nc; ++c) {
    if (r.u8()) {
      auto lm = read_ovr(r);
      if (lm.n_classes() != m.cluster_sizes_[c]) throw ValidationError("matcher: label model size mismatch");
      m.label_models_.emplace_back(std::move(lm));
    } else {
      m.label_models_.emplace_back(std::nullopt);
    }
  }
  r.expect_end();
  return m;
}

ImportedMatcher::ImportedMatcher(const json& scores, const LabelSet& labels, const LabelIndex& index)
    : index_(&index) {
  if (!scores.is_object()) throw ParseError("imported matcher scores: expected object id -> {label: score}");
  for (const auto& [qid, per_label] : scores.items()) {
    if (!per_label.is_object()) throw ParseError("imported matcher scores: entry for " + qid + " is not an object");
    auto& slot = scores_[qid];
    for (const auto& [label, value] : per_label.items()) {
      if (!value.is_number()) throw ValidationError("imported matcher scores: non-numeric score for " + qid);
      if (auto id = labels.id(label)) slot[*id] = value.get<double>();
    }
  }
}

ImportedMatcher ImportedMatcher::load(const std::filesystem::path& path, const LabelSet& labels,
                                      const LabelIndex& index) {
  return ImportedMatcher(read_json_file(path), labels, index);
}

std::vector<double> ImportedMatcher::cluster_scores(const MatchQuery& q) const {
  std::vector<double> out(index_->cluster_count(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto ls = label_scores(q, c);
    if (!ls.empty()) out[c] = *std::max_element(ls.begin(), ls.end());
  }
  return out;
}

std::vector<double> ImportedMatcher::label_scores(const MatchQuery& q, std::size_t cluster) const {
  const auto& members = index_->clusters.at(cluster);
  std::vector<double> out(members.size(), 0.0);
  auto it = scores_.find(std::string(q.id));
  if (it == scores_.end()) return out;
  for (std::size_t i = 0; i < members.size(); ++i)
    if (auto s = it->second.find(members[i]); s != it->second.end()) out[i] = s->second;
  return out;
}

// ---------------------------------------------------------------- ranking

std::vector<Candidate> candidate_labels(const Matcher& matcher, const LabelIndex& index,
                                        std::span<const double> priors, const MatchQuery& q, std::size_t beam) {
  const auto cs = matcher.cluster_scores(q);
  if (cs.size() != index.cluster_count()) throw ValidationError("matcher and label index disagree on clusters");
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cs[a] > cs[b]; });
  order.resize(std::min(beam, order.size()));
  std::vector<Candidate> out;
  for (auto c : order) {
    const auto ls = matcher.label_scores(q, c);
    const auto& members = index.clusters[c];
    for (std::size_t i = 0; i < members.size(); ++i)
      out.push_back({members[i], cs[c], ls[i], priors.empty() ? 0.0 : priors[members[i]]});
  }
  return out;
}

RankedTypeList predict_types_xmc(const Matcher& matcher, const EnsembleRanker& ranker, const LabelIndex& index,
                                 const LabelSet& labels, std::span<const double> priors, const MatchQuery& q,
                                 std::size_t beam, std::size_t k) {
  if (k < 1) throw ValidationError("predict_types_xmc: k must be >= 1");
  if (beam < 1) throw ValidationError("predict_types_xmc: beam must be >= 1");
  std::vector<ScoredType> items;
  for (const auto& c : candidate_labels(matcher, index, priors, q, beam))
    items.push_back({labels.label(c.label), ranker.score(c.cluster_score, c.label_score, c.prior)});
  RankedTypeList out(std::move(items));
  out.truncate(k);
  return out;
}

json EnsembleRanker::to_json() const {
  return json{{"format", "atp-ensemble-ranker"},
              {"version", 1},
              {"features", {"cluster_score", "label_score", "label_prior"}},
              {"weights", weights},
              {"fallback", fallback},
              {"epoch_loss", epoch_loss}};
}

EnsembleRanker EnsembleRanker::from_json(const json& doc) {
  EnsembleRanker r;
  try {
    if (doc.at("format").get<std::string>() != "atp-ensemble-ranker" || doc.at("version").get<int>() != 1)
      throw ParseError("ranker: unsupported format");
    r.weights = doc.at("weights").get<std::array<double, 3>>();
    r.fallback = doc.at("fallback").get<bool>();
    r.epoch_loss = doc.value("epoch_loss", std::vector<double>{});
  } catch (const json::exception& e) {
    throw ParseError(std::string("ranker: ") + e.what());
  }
  return r;
}

namespace {

using PairDiff = std::array<double, 3>;

double pairwise_loss(const std::array<double, 3>& w, const std::vector<PairDiff>& pairs, double lambda) {
  double loss = 0.0;
  for (const auto& d : pairs) loss += std::max(0.0, 1.0 - (w[0] * d[0] + w[1] * d[1] + w[2] * d[2]));
  const double reg = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
  return 0.5 * lambda * reg + loss / static_cast<double>(pairs.size());
}

}  // namespace

EnsembleRanker train_ensemble_ranker(const Matcher& matcher, const LabelIndex& index,
                                     std::span<const double> priors, std::span<const LabeledExample> heldout,
                                     const RankerParams& params) {
  EnsembleRanker r;
  if (heldout.empty()) {
    log::warning("train_ensemble_ranker: empty held-out fold, using fallback weights");
    return r;
  }
  if (heldout.size() < params.min_questions) {
    log::info("train_ensemble_ranker: " + std::to_string(heldout.size()) +
              " held-out questions, below the minimum; using fallback weights");
    return r;
  }
  std::vector<PairDiff> pairs;
  for (const auto& ex : heldout) {
    const auto cands = candidate_labels(matcher, index, priors, MatchQuery{ex.id, ex.x}, params.beam);
    std::vector<const Candidate*> rel, irr;
    for (const auto& c : cands)
      (std::binary_search(ex.labels.begin(), ex.labels.end(), c.label) ? rel : irr).push_back(&c);
    for (const auto* a : rel)
      for (const auto* b : irr)
        pairs.push_back({a->cluster_score - b->cluster_score, a->label_score - b->label_score, a->prior - b->prior});
  }
  if (pairs.empty()) {
    log::warning("train_ensemble_ranker: no (relevant, irrelevant) pairs, using fallback weights");
    return r;
  }

  std::array<double, 3> w = EnsembleRanker::kFallbackWeights;
  double loss = pairwise_loss(w, pairs, params.lambda);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::array<double, 3> g{params.lambda * w[0], params.lambda * w[1], params.lambda * w[2]};
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (const auto& d : pairs) {
      if (w[0] * d[0] + w[1] * d[1] + w[2] * d[2] < 1.0)
        for (int j = 0; j < 3; ++j) g[static_cast<std::size_t>(j)] -= d[static_cast<std::size_t>(j)] * inv_n;
    }
    double step = params.eta0 / std::sqrt(static_cast<double>(epoch + 1));
    for (int attempt = 0; attempt < 30; ++attempt, step *= 0.5) {
      const std::array<double, 3> cand{w[0] - step * g[0], w[1] - step * g[1], w[2] - step * g[2]};
      const double cand_loss = pairwise_loss(cand, pairs, params.lambda);
      if (cand_loss <= loss) {
        w = cand;
        loss = cand_loss;
        break;
      }
    }
    r.epoch_loss.push_back(loss);
  }
  r.weights = w;
  r.fallback = false;
  return r;
}

// ---------------------------------------------------------------- bundle

json XmcConfig::to_json() const {
  json doc;
  doc["branching"] = branching;
  doc["max_leaf"] = max_leaf;
  doc["beam"] = beam;
  doc["cluster_hyper"] = atp::to_json(cluster_hyper);
  doc["label_hyper"] = atp::to_json(label_hyper);
  doc["ranker"] = json{{"epochs", ranker.epochs},
                       {"lambda", ranker.lambda},
                       {"eta0", ranker.eta0},
                       {"min_questions", ranker.min_questions}};
  doc["heldout_folds"] = heldout_folds;
  doc["seed"] = seed;
  return doc;
}

XmcConfig XmcConfig::from_json(const json& doc) { return from_json(doc, XmcConfig{}); }

XmcConfig XmcConfig::from_json(const json& doc, XmcConfig c) {
  if (doc.is_null()) return c;
  try {
    c.branching = doc.value("branching", c.branching);
    c.max_leaf = doc.value("max_leaf", c.max_leaf);
    c.beam = doc.value("beam", c.beam);
    c.cluster_hyper = hinge_params_from_json(doc.value("cluster_hyper", json()), c.cluster_hyper);
    c.label_hyper = hinge_params_from_json(doc.value("label_hyper", json()), c.label_hyper);
    if (doc.contains("ranker")) {
      const auto& r = doc.at("ranker");
      c.ranker.epochs = r.value("epochs", c.ranker.epochs);
      c.ranker.lambda = r.value("lambda", c.ranker.lambda);
      c.ranker.eta0 = r.value("eta0", c.ranker.eta0);
      c.ranker.min_questions = r.value("min_questions", c.ranker.min_questions);
    }
    c.heldout_folds = doc.value("heldout_folds", c.heldout_folds);
    c.seed = doc.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("xmc config: ") + e.what());
  }
  if (c.branching < 2) throw ValidationError("xmc config: branching must be >= 2");
  if (c.max_leaf < 1) throw ValidationError("xmc config: max_leaf must be >= 1");
  if (c.beam < 1) throw ValidationError("xmc config: beam must be >= 1");
  if (c.heldout_folds < 2) throw ValidationError("xmc config: heldout_folds must be >= 2");
  c.ranker.beam = c.beam;
  return c;
}

void XmcModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json li = index.to_json();
  li["labels"] = labels.labels();
  li["priors"] = priors;
  write_json_file(dir / "label_index.json", li);
  matcher.save(dir / "matcher.bin");
  write_json_file(dir / "ranker.json", ranker.to_json());
  json meta;
  meta["format"] = "atp-xmc";
  meta["version"] = 1;
  meta["config"] = config.to_json();
  meta["vocab_hash"] = hex64(vocab_hash);
  meta["heldout_size"] = heldout_size;
  write_json_file(dir / "xmc.json", meta);
}

XmcModel XmcModel::load(const std::filesystem::path& dir) {
  XmcModel m;
  const json meta = read_json_file(dir / "xmc.json");
  try {
    if (meta.at("format").get<std::string>() != "atp-xmc" || meta.at("version").get<int>() != 1)
      throw ParseError("xmc bundle: unsupported format");
    m.config = XmcConfig::from_json(meta.at("config"));
    m.vocab_hash = std::stoull(meta.at("vocab_hash").get<std::string>(), nullptr, 16);
    m.heldout_size = meta.at("heldout_size").get<std::size_t>();
    const json li = read_json_file(dir / "label_index.json");
    m.index = LabelIndex::from_json(li);
    m.labels = LabelSet(li.at("labels").get<std::vector<std::string>>());
    m.priors = li.at("priors").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("xmc bundle: ") + e.what());
  }
  if (m.labels.size() != m.index.label_count() || m.priors.size() != m.labels.size())
    throw ValidationError("xmc bundle: label count mismatch");
  m.matcher = LinearMatcher::load(dir / "matcher.bin");
  if (m.matcher.cluster_count() != m.index.cluster_count())
    throw ValidationError("xmc bundle: matcher does not match the label index");
  m.ranker = EnsembleRanker::from_json(read_json_file(dir / "ranker.json"));
  return m;
}

XmcModel train_xmc(std::span<const LabeledExample> train, LabelSet labels, const XmcConfig& config,
                   std::uint64_t vocab_hash) {
  if (train.empty()) throw ValidationError("train_xmc: no resource questions to train on");
  for (const auto& ex : train)
    for (auto l : ex.labels)
      if (l >= labels.size()) throw ValidationError("train_xmc: label id outside the label set");

  XmcModel m;
  m.config = config;
  m.config.ranker.beam = config.beam;
  m.labels = std::move(labels);
  m.vocab_hash = vocab_hash;

  // Seeded held-out split for the ranker; skipped when it would be too small
  // to train on anyway.
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(config.seed));
  portable_shuffle(std::span<std::size_t>(order), rng);
  const std::size_t n_heldout = train.size() / static_cast<std::size_t>(config.heldout_folds);
  std::vector<bool> is_heldout(train.size(), false);
  if (n_heldout >= config.ranker.min_questions)
    for (std::size_t i = 0; i < n_heldout; ++i) is_heldout[order[i]] = true;

  std::vector<LabeledExample> fit, heldout;
  for (std::size_t i = 0; i < train.size(); ++i) (is_heldout[i] ? heldout : fit).push_back(train[i]);
  m.heldout_size = heldout.size();

  m.priors.assign(m.labels.size(), 0.0);
  for (const auto& ex : fit)
    for (auto l : ex.labels) m.priors[l] += 1.0;
  for (auto& p : m.priors) p /= static_cast<double>(fit.size());

  const auto emb = build_label_embeddings(fit, m.labels.size());
  m.index = cluster_labels(emb, config.branching, config.max_leaf, mix_seed(config.seed + 1));
  m.matcher = train_matchers(m.index, fit, MatcherParams{config.cluster_hyper, config.label_hyper, config.threads});
  m.ranker = train_ensemble_ranker(m.matcher, m.index, m.priors, heldout, m.config.ranker);
  return m;
}

}  // namespace atp
