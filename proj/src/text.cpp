#include "atp/text.hpp"

#include <cmath>
#include <unordered_set>

#include "atp/error.hpp"

namespace atp {
namespace {

constexpr std::string_view kVocabFormat = "atp-vocabulary";
constexpr int kVocabVersion = 1;

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_token_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::string tok;
    std::size_t chars = 0;
    while (i < text.size() && is_token_byte(static_cast<unsigned char>(text[i]))) {
      auto c = static_cast<unsigned char>(text[i]);
      if ((c & 0xC0) != 0x80) ++chars;  // not a UTF-8 continuation byte
      if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
      tok.push_back(static_cast<char>(c));
      ++i;
    }
    if (chars >= 2) tokens.push_back(std::move(tok));
  }
  return tokens;
}

template <typename Range>
Vocabulary Vocabulary::fit_impl(const Range& texts) {
  if (std::size(texts) == 0) throw ValidationError("fit_vocabulary: empty corpus");
  Vocabulary v;
  v.n_docs_ = std::size(texts);
  for (const auto& text : texts) {
    std::unordered_set<std::uint32_t> in_doc;
    for (auto& tok : tokenize(text)) {
      auto [it, inserted] = v.lookup_.try_emplace(tok, static_cast<std::uint32_t>(v.terms_.size()));
      if (inserted) {
        v.terms_.push_back(tok);
        v.df_.push_back(0);
      }
      if (in_doc.insert(it->second).second) ++v.df_[it->second];
    }
  }
  if (v.terms_.empty()) throw ValidationError("fit_vocabulary: corpus contains no tokens");
  return v;
}

Vocabulary Vocabulary::fit(std::span<const std::string> train_texts) { return fit_impl(train_texts); }
Vocabulary Vocabulary::fit(std::span<const std::string_view> train_texts) {
  return fit_impl(train_texts);
}

std::optional<std::uint32_t> Vocabulary::id(std::string_view term) const {
  auto it = lookup_.find(std::string(term));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::idf(std::uint32_t id) const {
  return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + static_cast<double>(df_.at(id)))) + 1.0;
}

SparseVector Vocabulary::vectorize(std::string_view text, bool normalize) const {
  std::vector<SparseEntry> entries;
  for (const auto& tok : tokenize(text)) {
    if (auto tid = id(tok)) entries.push_back({*tid, 1.0});
  }
  SparseVector tf = SparseVector::from_entries(std::move(entries));
  std::vector<SparseEntry> weighted;
  weighted.reserve(tf.size());
  for (const auto& e : tf.entries()) weighted.push_back({e.index, e.value * idf(e.index)});
  SparseVector out = SparseVector::from_entries(std::move(weighted));
  return normalize ? out.normalized() : out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64(std::to_string(n_docs_));
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    h = fnv1a64(terms_[i], h);
    h = fnv1a64(std::string_view("\t"), h);
    h = fnv1a64(std::to_string(df_[i]), h);
    h = fnv1a64(std::string_view("\n"), h);
  }
  return h;
}

json Vocabulary::to_json() const {
  json doc;
  doc["format"] = kVocabFormat;
  doc["version"] = kVocabVersion;
  doc["n_docs"] = n_docs_;
  json terms = json::array();
  for (std::size_t i = 0; i < terms_.size(); ++i) terms.push_back(json::array({terms_[i], i, df_[i]}));
  doc["terms"] = std::move(terms);
  return doc;
}

Vocabulary Vocabulary::from_json(const json& doc) {
  Vocabulary v;
  try {
    if (doc.at("format").get<std::string>() != kVocabFormat)
      throw ParseError("vocabulary: unexpected format tag");
    if (doc.at("version").get<int>() != kVocabVersion)
      throw ParseError("vocabulary: unsupported version");
    v.n_docs_ = doc.at("n_docs").get<std::size_t>();
    const auto& terms = doc.at("terms");
    v.terms_.resize(terms.size());
    v.df_.resize(terms.size());
    std::vector<bool> filled(terms.size(), false);
    for (const auto& triple : terms) {
      const auto tid = triple.at(1).get<std::size_t>();
      if (tid >= terms.size() || filled[tid]) throw ValidationError("vocabulary: term ids not dense");
      filled[tid] = true;
      v.terms_[tid] = triple.at(0).get<std::string>();
      v.df_[tid] = triple.at(2).get<std::uint32_t>();
      if (v.df_[tid] < 1 || v.df_[tid] > v.n_docs_)
        throw ValidationError("vocabulary: document frequency out of range for " + v.terms_[tid]);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("vocabulary: ") + e.what());
  }
  v.rebuild_lookup();
  if (v.lookup_.size() != v.terms_.size()) throw ValidationError("vocabulary: duplicate terms");
  return v;
}

void Vocabulary::rebuild_lookup() {
  lookup_.clear();
  for (std::size_t i = 0; i < terms_.size(); ++i)
    lookup_.emplace(terms_[i], static_cast<std::uint32_t>(i));
}

}  // namespace atp
