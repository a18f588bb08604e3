#include "atp/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace atp {

SparseVector SparseVector::from_entries(std::vector<SparseEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  SparseVector out;
  out.entries_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < entries.size() && entries[j].index == entries[i].index) sum += entries[j++].value;
    if (sum != 0.0) out.entries_.push_back({entries[i].index, sum});
    i = j;
  }
  return out;
}

SparseVector SparseVector::weighted_sum(std::span<const SparseVector* const> vectors,
                                        std::span<const double> alphas) {
  std::vector<SparseEntry> all;
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const double a = alphas.empty() ? 1.0 : alphas[k];
    for (const auto& e : vectors[k]->entries_) all.push_back({e.index, a * e.value});
  }
  return from_entries(std::move(all));
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.value * e.value;
  return std::sqrt(s);
}

SparseVector SparseVector::normalized() const {
  SparseVector out = *this;
  const double n = norm();
  if (n > 0.0) out.scale(1.0 / n);
  return out;
}

void SparseVector::scale(double factor) {
  if (factor == 0.0) {
    entries_.clear();
    return;
  }
  for (auto& e : entries_) e.value *= factor;
}

double SparseVector::dot(const SparseVector& other) const {
  double s = 0.0;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->index < b->index) {
      ++a;
    } else if (b->index < a->index) {
      ++b;
    } else {
      s += a->value * b->value;
      ++a;
      ++b;
    }
  }
  return s;
}

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& e : entries_)
    if (e.index < dense.size()) s += e.value * dense[e.index];
  return s;
}

void SparseVector::add_to(std::span<double> dense, double alpha) const {
  for (const auto& e : entries_)
    if (e.index < dense.size()) dense[e.index] += alpha * e.value;
}

}  // namespace atp
