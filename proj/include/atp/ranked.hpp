#pragma once

#include <span>
#include <string>
#include <vector>

namespace atp {

struct ScoredType {
  std::string label;
  double score;

  friend bool operator==(const ScoredType&, const ScoredType&) = default;
};

/// Types ordered by score descending, ties by label ascending, no duplicates.
class RankedTypeList {
 public:
  RankedTypeList() = default;
  /// Sorts the input; throws ValidationError on duplicate labels or NaN scores.
  explicit RankedTypeList(std::vector<ScoredType> items);

  std::span<const ScoredType> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const ScoredType& operator[](std::size_t i) const { return items_[i]; }

  /// Keeps the first k entries.
  void truncate(std::size_t k);
  std::vector<std::string> labels() const;

  friend bool operator==(const RankedTypeList&, const RankedTypeList&) = default;

 private:
  std::vector<ScoredType> items_;
};

/// Strict ranking order used everywhere: score desc, then label asc.
inline bool ranks_before(const ScoredType& a, const ScoredType& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.label < b.label;
}

}  // namespace atp
