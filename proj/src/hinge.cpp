#include "atp/hinge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "atp/error.hpp"
#include "atp/parallel.hpp"
#include "atp/random.hpp"

namespace atp {

json to_json(const HingeParams& p) {
  return json{{"C", p.C}, {"epochs", p.epochs}, {"seed", p.seed}, {"eta0", p.eta0}};
}

HingeParams hinge_params_from_json(const json& doc, HingeParams p) {
  if (doc.is_null()) return p;
  try {
    if (doc.contains("C")) p.C = doc.at("C").get<double>();
    if (doc.contains("epochs")) p.epochs = doc.at("epochs").get<int>();
    if (doc.contains("seed")) p.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("eta0")) p.eta0 = doc.at("eta0").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("hinge parameters: ") + e.what());
  }
  if (!(p.C > 0.0)) throw ValidationError("hinge parameters: C must be > 0");
  if (p.epochs < 1) throw ValidationError("hinge parameters: epochs must be >= 1");
  if (!(p.eta0 > 0.0)) throw ValidationError("hinge parameters: eta0 must be > 0");
  return p;
}

namespace {

struct LocalExample {
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
};

struct ClassResult {
  SparseVector weights;
  double bias = 0.0;
  std::vector<double> objective;
};

/// Averaged SGD state. Iterate w = w_raw / w_div; average
/// a = (a_raw + a_frac * w_raw) / a_div. Keeping the scalars separate makes
/// both the L2 shrink and the averaging step O(1); sparse updates touch only
/// the active features.
class AveragedSgd {
 public:
  explicit AveragedSgd(std::size_t dim) : w_raw_(dim, 0.0), a_raw_(dim, 0.0) {}

  double decision(const LocalExample& ex) const {
    double s = 0.0;
    for (std::size_t k = 0; k < ex.idx.size(); ++k) s += w_raw_[ex.idx[k]] * ex.val[k];
    return s / w_div_ + bias_;
  }

  void shrink(double factor) {
    w_div_ /= factor;
    if (w_div_ > 1e4) renormalize();
  }

  void add(const LocalExample& ex, double step, double y) {
    const double coef = step * y * w_div_;
    for (std::size_t k = 0; k < ex.idx.size(); ++k) {
      const double delta = coef * ex.val[k];
      w_raw_[ex.idx[k]] += delta;
      if (averaging_) a_raw_[ex.idx[k]] -= a_frac_ * delta;
    }
    bias_ += step * y;
  }

  void average_step() {
    if (!averaging_) {
      averaging_ = true;
      count_ = 1;
      a_div_ = 1.0;
      a_frac_ = 1.0 / w_div_;
      avg_bias_ = bias_;
      return;
    }
    ++count_;
    const double mu = 1.0 / static_cast<double>(count_);
    a_div_ /= (1.0 - mu);
    a_frac_ += mu * a_div_ / w_div_;
    avg_bias_ += mu * (bias_ - avg_bias_);
    if (a_div_ > 1e4) renormalize();
  }

  /// Averaged iterate once averaging has started, current iterate otherwise.
  std::vector<double> weights() const {
    std::vector<double> out(w_raw_.size());
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = averaging_ ? (a_raw_[j] + a_frac_ * w_raw_[j]) / a_div_ : w_raw_[j] / w_div_;
    return out;
  }
  double bias() const { return averaging_ ? avg_bias_ : bias_; }

 private:
  void renormalize() {
    for (std::size_t j = 0; j < w_raw_.size(); ++j) {
      if (averaging_) a_raw_[j] = (a_raw_[j] + a_frac_ * w_raw_[j]) / a_div_;
      w_raw_[j] /= w_div_;
    }
    w_div_ = 1.0;
    a_div_ = 1.0;
    a_frac_ = 0.0;
  }

  std::vector<double> w_raw_;
  double w_div_ = 1.0;
  double bias_ = 0.0;
  std::vector<double> a_raw_;
  double a_div_ = 1.0;
  double a_frac_ = 0.0;
  double avg_bias_ = 0.0;
  bool averaging_ = false;
  std::uint64_t count_ = 0;
};

double objective(const std::vector<double>& w, double b, const std::vector<LocalExample>& ex,
                 const std::vector<double>& y, double lambda) {
  double reg = 0.0;
  for (double v : w) reg += v * v;
  double loss = 0.0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    double s = b;
    for (std::size_t k = 0; k < ex[i].idx.size(); ++k) s += w[ex[i].idx[k]] * ex[i].val[k];
    loss += std::max(0.0, 1.0 - y[i] * s);
  }
  return 0.5 * lambda * reg + loss / static_cast<double>(ex.size());
}

}  // namespace

OvrModel train_ovr_hinge(std::span<const SparseVector* const> x,
                         std::span<const std::vector<std::uint32_t>> positives,
                         std::size_t n_classes, const HingeParams& params) {
  const std::size_t n = x.size();
  if (n == 0) throw ValidationError("train_ovr_hinge: no training examples");
  if (positives.size() != n) throw ValidationError("train_ovr_hinge: label count differs from example count");
  if (n_classes == 0) throw ValidationError("train_ovr_hinge: no classes");
  if (!(params.C > 0.0) || params.epochs < 1 || !(params.eta0 > 0.0))
    throw ValidationError("train_ovr_hinge: invalid hyperparameters");
  for (const auto& pos : positives)
    for (auto c : pos)
      if (c >= n_classes) throw ValidationError("train_ovr_hinge: class id out of range");

  // Compact feature space: only features present in the training data can
  // receive nonzero weight.
  std::vector<std::uint32_t> features;
  for (const auto* v : x)
    for (const auto& e : v->entries()) features.push_back(e.index);
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  std::vector<LocalExample> local(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : x[i]->entries()) {
      auto pos = std::lower_bound(features.begin(), features.end(), e.index) - features.begin();
      local[i].idx.push_back(static_cast<std::uint32_t>(pos));
      local[i].val.push_back(e.value);
    }
  }

  std::vector<std::vector<std::size_t>> orders(static_cast<std::size_t>(params.epochs));
  std::mt19937_64 rng(params.seed);
  for (auto& order : orders) {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    portable_shuffle(std::span<std::size_t>(order), rng);
  }

  const double lambda = 1.0 / (params.C * static_cast<double>(n));
  const double eta0 = std::min(params.eta0, 0.5 / lambda);
  const std::uint64_t avg_start = params.epochs > 1 ? n : 0;

  std::vector<ClassResult> results(n_classes);
  parallel_for(n_classes, params.threads, [&](std::size_t c) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& pos = positives[i];
      y[i] = std::find(pos.begin(), pos.end(), static_cast<std::uint32_t>(c)) != pos.end() ? 1.0 : -1.0;
    }
    AveragedSgd sgd(features.size());
    std::uint64_t t = 0;
    ClassResult& out = results[c];
    for (const auto& order : orders) {
      for (std::size_t i : order) {
        const double eta = eta0 / std::pow(1.0 + lambda * eta0 * static_cast<double>(t), 0.75);
        const double margin = y[i] * sgd.decision(local[i]);
        sgd.shrink(1.0 - eta * lambda);
        if (margin < 1.0) sgd.add(local[i], eta, y[i]);
        if (t >= avg_start) sgd.average_step();
        ++t;
      }
      out.objective.push_back(objective(sgd.weights(), sgd.bias(), local, y, lambda));
    }
    const auto w = sgd.weights();
    std::vector<SparseEntry> entries;
    for (std::size_t j = 0; j < w.size(); ++j)
      if (w[j] != 0.0) entries.push_back({features[j], w[j]});
    out.weights = SparseVector::from_entries(std::move(entries));
    out.bias = sgd.bias();
  });

  OvrModel model;
  model.epoch_objective.assign(static_cast<std::size_t>(params.epochs), 0.0);
  for (auto& r : results) {
    for (std::size_t e = 0; e < r.objective.size(); ++e) model.epoch_objective[e] += r.objective[e];
    model.weights.push_back(std::move(r.weights));
    model.bias.push_back(r.bias);
  }
  return model;
}

}  // namespace atp
