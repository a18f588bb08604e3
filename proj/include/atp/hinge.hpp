#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atp/io.hpp"
#include "atp/sparse.hpp"

namespace atp {

struct HingeParams {
  double C = 1.0;
  int epochs = 20;
  std::uint64_t seed = 1;
  /// Initial step size; inputs are expected to be L2-normalized.
  double eta0 = 1.0;
  unsigned threads = 1;
};

json to_json(const HingeParams& p);
HingeParams hinge_params_from_json(const json& doc, HingeParams defaults = {});

/// One binary linear scorer per class, stored sparsely over global feature ids.
struct OvrModel {
  std::vector<SparseVector> weights;
  std::vector<double> bias;
  /// Primal objective of the averaged iterate after each epoch, summed over
  /// classes.
  std::vector<double> epoch_objective;

  std::size_t n_classes() const { return weights.size(); }
  double decision(std::size_t c, const SparseVector& x) const { return weights[c].dot(x) + bias[c]; }
};

/// One-vs-rest L2-regularized hinge loss,
///   lambda/2 ||w||^2 + 1/n sum_i max(0, 1 - y_i (w.x_i + b)),  lambda = 1/(C n),
/// minimised by averaged stochastic subgradient descent. Example order is a
/// seeded shuffle per epoch shared by all classes; averaging starts with the
/// second epoch. Example i is positive for class c iff c is in positives[i].
/// The bias is not regularized.
OvrModel train_ovr_hinge(std::span<const SparseVector* const> x,
                         std::span<const std::vector<std::uint32_t>> positives,
                         std::size_t n_classes, const HingeParams& params);

}  // namespace atp
