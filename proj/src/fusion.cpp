#include "atp/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "atp/error.hpp"
#include "atp/io.hpp"
#include "atp/log.hpp"
#include "atp/text.hpp"

namespace atp {
namespace {

constexpr std::string_view kIndexMagic = "ATP-INVERTED-INDEX";
constexpr std::uint32_t kIndexVersion = 1;

std::vector<std::string> split_types(std::string_view field) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= field.size()) {
    std::size_t end = field.find(',', pos);
    if (end == std::string_view::npos) end = field.size();
    auto t = field.substr(pos, end - pos);
    while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
    while (!t.empty() && t.back() == ' ') t.remove_suffix(1);
    if (!t.empty()) out.emplace_back(t);
    pos = end + 1;
  }
  return out;
}

/// Per-document term counts accumulated while building.
struct DocBuilder {
  std::unordered_map<std::uint32_t, std::uint32_t> tf;
  std::uint64_t length = 0;
};

struct TermTable {
  std::vector<std::string> terms;
  std::unordered_map<std::string, std::uint32_t> lookup;

  std::uint32_t intern(const std::string& t) {
    auto [it, inserted] = lookup.try_emplace(t, static_cast<std::uint32_t>(terms.size()));
    if (inserted) terms.push_back(t);
    return it->second;
  }
};

void add_tokens(DocBuilder& doc, const std::vector<std::uint32_t>& ids) {
  for (auto id : ids) ++doc.tf[id];
  doc.length += ids.size();
}

}  // namespace

std::vector<EntityRecord> parse_entities(std::string_view tsv, std::string_view origin) {
  std::vector<EntityRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < tsv.size()) {
    std::size_t end = tsv.find('\n', pos);
    if (end == std::string_view::npos) end = tsv.size();
    std::string_view line = tsv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos)
      throw ParseError(std::string(origin) + ":" + std::to_string(line_no) +
                       ": expected entity<TAB>abstract<TAB>types");
    EntityRecord rec;
    rec.id = std::string(line.substr(0, t1));
    rec.abstract = std::string(line.substr(t1 + 1, t2 - t1 - 1));
    rec.types = split_types(line.substr(t2 + 1));
    if (rec.id.empty()) throw ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": empty entity id");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<EntityRecord> load_entities(const std::filesystem::path& path) {
  return parse_entities(read_text_file(path), path.string());
}

std::span<const std::string> InvertedIndex::doc_types(std::uint32_t doc) const {
  if (doc_types_.empty()) return {};
  return doc_types_.at(doc);
}

std::optional<std::uint32_t> InvertedIndex::term_id(std::string_view term) const {
  auto it = term_lookup_.find(std::string(term));
  if (it == term_lookup_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::vector<std::vector<Posting>> invert(const std::vector<DocBuilder>& docs, std::size_t n_terms) {
  std::vector<std::vector<Posting>> postings(n_terms);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries(docs[d].tf.begin(), docs[d].tf.end());
    std::sort(entries.begin(), entries.end());
    for (const auto& [term, tf] : entries) postings[term].push_back({static_cast<std::uint32_t>(d), tf});
  }
  return postings;
}

}  // namespace

InvertedIndex build_type_index(std::span<const EntityRecord> entities, Bm25Params params) {
  if (entities.empty()) throw ValidationError("build_type_index: empty entity stream");
  std::set<std::string> type_set;
  for (const auto& e : entities) type_set.insert(e.types.begin(), e.types.end());
  std::vector<std::string> labels(type_set.begin(), type_set.end());
  std::unordered_map<std::string, std::uint32_t> doc_of;
  for (std::size_t i = 0; i < labels.size(); ++i) doc_of.emplace(labels[i], static_cast<std::uint32_t>(i));

  TermTable table;
  std::vector<DocBuilder> docs(labels.size());
  std::size_t skipped = 0;
  for (const auto& e : entities) {
    if (e.types.empty()) {
      ++skipped;
      continue;
    }
    std::vector<std::uint32_t> ids;
    for (const auto& tok : tokenize(e.abstract)) ids.push_back(table.intern(tok));
    std::unordered_set<std::string> seen;
    for (const auto& t : e.types)
      if (seen.insert(t).second) add_tokens(docs[doc_of.at(t)], ids);
  }
  if (skipped > 0) log::info("build_type_index: skipped " + std::to_string(skipped) + " untyped entities");
  if (labels.empty()) throw ValidationError("build_type_index: no typed entities");

  InvertedIndex idx;
  idx.kind_ = IndexKind::type;
  idx.params_ = params;
  idx.labels_ = std::move(labels);
  for (const auto& d : docs) idx.lengths_.push_back(d.length);
  idx.postings_ = invert(docs, table.terms.size());
  idx.terms_ = std::move(table.terms);
  idx.skipped_ = skipped;
  idx.finalize();
  return idx;
}

InvertedIndex build_entity_index(std::span<const EntityRecord> entities, Bm25Params params) {
  if (entities.empty()) throw ValidationError("build_entity_index: empty entity stream");
  TermTable table;
  InvertedIndex idx;
  idx.kind_ = IndexKind::entity;
  idx.params_ = params;
  std::vector<DocBuilder> docs;
  std::unordered_set<std::string> ids_seen;
  for (const auto& e : entities) {
    if (!ids_seen.insert(e.id).second) throw ValidationError("build_entity_index: duplicate entity id " + e.id);
    if (e.types.empty()) {
      ++idx.skipped_;
      continue;
    }
    DocBuilder doc;
    std::vector<std::uint32_t> ids;
    for (const auto& tok : tokenize(e.abstract)) ids.push_back(table.intern(tok));
    add_tokens(doc, ids);
    std::vector<std::string> types;
    for (const auto& t : e.types)
      if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
    idx.labels_.push_back(e.id);
    idx.lengths_.push_back(doc.length);
    idx.doc_types_.push_back(std::move(types));
    docs.push_back(std::move(doc));
  }
  if (idx.skipped_ > 0)
    log::info("build_entity_index: skipped " + std::to_string(idx.skipped_) + " untyped entities");
  if (idx.labels_.empty()) throw ValidationError("build_entity_index: no typed entities");
  idx.postings_ = invert(docs, table.terms.size());
  idx.terms_ = std::move(table.terms);
  idx.finalize();
  return idx;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  BinaryWriter w;
  w.header(kIndexMagic, kIndexVersion);
  w.u8(static_cast<std::uint8_t>(kind_));
  // parameter block
  w.f64(params_.k1);
  w.f64(params_.b);
  w.u64(skipped_);
  w.u64(labels_.size());
  for (std::size_t d = 0; d < labels_.size(); ++d) {
    w.str(labels_[d]);
    w.u64(lengths_[d]);
    const auto types = doc_types(static_cast<std::uint32_t>(d));
    w.u64(types.size());
    for (const auto& t : types) w.str(t);
  }
  w.u64(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    w.str(terms_[t]);
    w.u64(postings_[t].size());
    for (const auto& p : postings_[t]) {
      w.u32(p.doc);
      w.u32(p.tf);
    }
  }
  w.save(path);
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::open(path);
  r.header(kIndexMagic, kIndexVersion);
  InvertedIndex idx;
  const auto kind = r.u8();
  if (kind != static_cast<std::uint8_t>(IndexKind::type) && kind != static_cast<std::uint8_t>(IndexKind::entity))
    throw ParseError(path.string() + ": unknown index kind");
  idx.kind_ = static_cast<IndexKind>(kind);
  idx.params_.k1 = r.f64();
  idx.params_.b = r.f64();
  idx.skipped_ = r.u64();
  const auto n_docs = r.u64();
  for (std::uint64_t d = 0; d < n_docs; ++d) {
    idx.labels_.push_back(r.str());
    idx.lengths_.push_back(r.u64());
    std::vector<std::string> types(r.u64());
    for (auto& t : types) t = r.str();
    if (idx.kind_ == IndexKind::entity) idx.doc_types_.push_back(std::move(types));
  }
  const auto n_terms = r.u64();
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    idx.terms_.push_back(r.str());
    std::vector<Posting> plist(r.u64());
    for (auto& p : plist) {
      p.doc = r.u32();
      p.tf = r.u32();
    }
    idx.postings_.push_back(std::move(plist));
  }
  r.expect_end();
  idx.finalize();
  return idx;
}

void InvertedIndex::finalize() {
  if (labels_.empty()) throw ValidationError("inverted index: no documents");
  term_lookup_.clear();
  for (std::size_t i = 0; i < terms_.size(); ++i)
    if (!term_lookup_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second)
      throw ValidationError("inverted index: duplicate term " + terms_[i]);
  for (const auto& plist : postings_) {
    for (std::size_t i = 0; i < plist.size(); ++i) {
      if (plist[i].doc >= labels_.size() || (i > 0 && plist[i].doc <= plist[i - 1].doc))
        throw ValidationError("inverted index: postings not sorted by document");
    }
  }
  double total = 0.0;
  for (auto l : lengths_) total += static_cast<double>(l);
  avg_length_ = total / static_cast<double>(lengths_.size());
}

double bm25_idf(std::size_t n_docs, std::size_t df) {
  const double n = static_cast<double>(n_docs);
  const double f = static_cast<double>(df);
  return std::max(0.0, std::log(1.0 + (n - f + 0.5) / (f + 0.5)));
}

std::vector<ScoredDoc> bm25_rank(const InvertedIndex& index, std::span<const std::string> query_tokens,
                                 std::size_t cutoff) {
  if (cutoff == 0) throw ValidationError("bm25_rank: cutoff must be >= 1");
  const auto& p = index.params();
  const double avg = index.avg_length() > 0.0 ? index.avg_length() : 1.0;
  std::unordered_map<std::uint32_t, double> acc;
  for (const auto& tok : query_tokens) {
    auto tid = index.term_id(tok);
    if (!tid) continue;
    const auto plist = index.postings(*tid);
    const double idf = bm25_idf(index.doc_count(), plist.size());
    for (const auto& post : plist) {
      const double tf = post.tf;
      const double norm = p.k1 * (1.0 - p.b + p.b * static_cast<double>(index.doc_length(post.doc)) / avg);
      acc[post.doc] += idf * tf * (p.k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<ScoredDoc> out;
  out.reserve(acc.size());
  for (const auto& [doc, score] : acc) out.push_back({doc, score});
  auto before = [&](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return index.label(a.doc) < index.label(b.doc);
  };
  if (out.size() > cutoff) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(cutoff), out.end(), before);
    out.resize(cutoff);
  } else {
    std::sort(out.begin(), out.end(), before);
  }
  return out;
}

RankedTypeList rank_types_tc(const InvertedIndex& type_index, std::string_view question, std::size_t cutoff) {
  if (type_index.kind() != IndexKind::type) throw ValidationError("rank_types_tc: expected a type index");
  const auto tokens = tokenize(question);
  std::vector<ScoredType> items;
  for (const auto& d : bm25_rank(type_index, tokens, cutoff)) items.push_back({type_index.label(d.doc), d.score});
  return RankedTypeList(std::move(items));
}

RankedTypeList rank_types_ec(const InvertedIndex& entity_index, std::string_view question, std::size_t k,
                             Aggregation aggregation) {
  if (entity_index.kind() != IndexKind::entity) throw ValidationError("rank_types_ec: expected an entity index");
  if (k < 1) throw ValidationError("rank_types_ec: k must be >= 1");
  const auto tokens = tokenize(question);
  std::map<std::string, double> scores;
  for (const auto& d : bm25_rank(entity_index, tokens, k)) {
    for (const auto& t : entity_index.doc_types(d.doc)) {
      auto [it, inserted] = scores.try_emplace(t, d.score);
      if (inserted) continue;
      it->second = aggregation == Aggregation::sum ? it->second + d.score : std::max(it->second, d.score);
    }
  }
  std::vector<ScoredType> items;
  for (auto& [t, s] : scores) items.push_back({t, s});
  return RankedTypeList(std::move(items));
}

}  // namespace atp
