#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "atp/io.hpp"
#include "atp/sparse.hpp"

namespace atp {

/// Lowercased maximal runs of at least two alphanumeric characters. Bytes of
/// multi-byte UTF-8 sequences count as alphanumeric (one character per code
/// point); only ASCII letters are case-folded.
std::vector<std::string> tokenize(std::string_view text);

/// Term dictionary with document frequencies, fitted on training text only.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Term ids follow first occurrence in the corpus. Throws ValidationError
  /// if the corpus is empty or yields no tokens.
  static Vocabulary fit(std::span<const std::string> train_texts);
  static Vocabulary fit(std::span<const std::string_view> train_texts);

  std::size_t size() const { return terms_.size(); }
  std::size_t n_docs() const { return n_docs_; }
  std::optional<std::uint32_t> id(std::string_view term) const;
  const std::string& term(std::uint32_t id) const { return terms_.at(id); }
  std::uint32_t df(std::uint32_t id) const { return df_.at(id); }
  /// Smoothed idf: ln((1 + n_docs) / (1 + df)) + 1.
  double idf(std::uint32_t id) const;

  /// tf * idf over in-vocabulary tokens, L2-normalized when `normalize`.
  SparseVector vectorize(std::string_view text, bool normalize = true) const;

  /// Stable digest of terms, ids, dfs and n_docs.
  std::uint64_t hash() const;

  json to_json() const;
  static Vocabulary from_json(const json& doc);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.n_docs_ == b.n_docs_ && a.terms_ == b.terms_ && a.df_ == b.df_;
  }

 private:
  template <typename Range>
  static Vocabulary fit_impl(const Range& texts);
  void rebuild_lookup();

  std::vector<std::string> terms_;
  std::vector<std::uint32_t> df_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
  std::size_t n_docs_ = 0;
};

}  // namespace atp
