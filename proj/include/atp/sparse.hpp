#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace atp {

struct SparseEntry {
  std::uint32_t index;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Sorted (index, value) pairs: indices strictly increasing, no zero values.
class SparseVector {
 public:
  SparseVector() = default;

  /// Sorts, merges duplicate indices by summation and drops zeros.
  static SparseVector from_entries(std::vector<SparseEntry> entries);
  /// Sum of `alpha_i * v_i`.
  static SparseVector weighted_sum(std::span<const SparseVector* const> vectors,
                                   std::span<const double> alphas = {});

  std::span<const SparseEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// One past the largest index, 0 when empty.
  std::uint32_t extent() const { return entries_.empty() ? 0 : entries_.back().index + 1; }

  double norm() const;
  /// Copy scaled to unit L2 norm; empty vectors stay empty.
  SparseVector normalized() const;
  void scale(double factor);

  double dot(const SparseVector& other) const;
  /// Entries with index >= dense.size() are ignored.
  double dot(std::span<const double> dense) const;
  void add_to(std::span<double> dense, double alpha = 1.0) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::vector<SparseEntry> entries_;
};

}  // namespace atp
