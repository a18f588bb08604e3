#include "atp/ranked.hpp"

#include <algorithm>
#include <cmath>

#include "atp/error.hpp"

namespace atp {

RankedTypeList::RankedTypeList(std::vector<ScoredType> items) : items_(std::move(items)) {
  for (const auto& it : items_)
    if (std::isnan(it.score)) throw ValidationError("ranked list: NaN score for " + it.label);
  std::sort(items_.begin(), items_.end(), ranks_before);
  std::vector<std::string> labels = this->labels();
  std::sort(labels.begin(), labels.end());
  if (auto dup = std::adjacent_find(labels.begin(), labels.end()); dup != labels.end())
    throw ValidationError("ranked list: duplicate label " + *dup);
}

void RankedTypeList::truncate(std::size_t k) {
  if (items_.size() > k) items_.resize(k);
}

std::vector<std::string> RankedTypeList::labels() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& it : items_) out.push_back(it.label);
  return out;
}

}  // namespace atp
