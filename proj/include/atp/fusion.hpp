#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "atp/ranked.hpp"

namespace atp {

/// A knowledge-base entity with its short abstract and type labels.
struct EntityRecord {
  std::string id;
  std::string abstract;
  std::vector<std::string> types;
};

/// `entity-id<TAB>abstract<TAB>type1,type2,...` per line.
std::vector<EntityRecord> parse_entities(std::string_view tsv, std::string_view origin = "<tsv>");
std::vector<EntityRecord> load_entities(const std::filesystem::path& path);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::uint32_t doc;
  std::uint32_t tf;
};

enum class IndexKind : std::uint8_t { type = 1, entity = 2 };

/// Term-at-a-time inverted index over either type pseudo-documents
/// (early fusion) or entity documents (late fusion).
class InvertedIndex {
 public:
  IndexKind kind() const { return kind_; }
  const Bm25Params& params() const { return params_; }
  std::size_t doc_count() const { return labels_.size(); }
  double avg_length() const { return avg_length_; }
  std::uint64_t doc_length(std::uint32_t doc) const { return lengths_.at(doc); }
  const std::string& label(std::uint32_t doc) const { return labels_.at(doc); }
  /// Types of an entity document; empty for type indexes.
  std::span<const std::string> doc_types(std::uint32_t doc) const;
  std::optional<std::uint32_t> term_id(std::string_view term) const;
  std::size_t term_count() const { return terms_.size(); }
  std::span<const Posting> postings(std::uint32_t term) const { return postings_.at(term); }
  /// Entities dropped at build time because they carried no type.
  std::size_t skipped_entities() const { return skipped_; }

  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  friend InvertedIndex build_type_index(std::span<const EntityRecord>, Bm25Params);
  friend InvertedIndex build_entity_index(std::span<const EntityRecord>, Bm25Params);

 private:
  /// Derives the term lookup and average length; validates the invariants.
  void finalize();

  IndexKind kind_ = IndexKind::type;
  Bm25Params params_;
  std::vector<std::string> labels_;
  std::vector<std::uint64_t> lengths_;
  std::vector<std::vector<std::string>> doc_types_;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> term_lookup_;
  std::vector<std::vector<Posting>> postings_;
  double avg_length_ = 0.0;
  std::size_t skipped_ = 0;
};

/// One document per type: the concatenated abstracts of all entities bearing
/// it. Documents are ordered by type label.
InvertedIndex build_type_index(std::span<const EntityRecord> entities, Bm25Params params = {});
/// One document per entity, in input order; duplicate ids are rejected.
InvertedIndex build_entity_index(std::span<const EntityRecord> entities, Bm25Params params = {});

/// max(0, ln(1 + (N - df + 0.5) / (df + 0.5)))
double bm25_idf(std::size_t n_docs, std::size_t df);

struct ScoredDoc {
  std::uint32_t doc;
  double score;
};

/// Okapi BM25 over documents that contain at least one query token; repeated
/// query tokens contribute repeatedly. Sorted by score desc, label asc;
/// at most `cutoff` results.
std::vector<ScoredDoc> bm25_rank(const InvertedIndex& index, std::span<const std::string> query_tokens,
                                 std::size_t cutoff);

/// Early fusion: rank type documents directly.
RankedTypeList rank_types_tc(const InvertedIndex& type_index, std::string_view question,
                             std::size_t cutoff = std::numeric_limits<std::size_t>::max());

enum class Aggregation { sum, max };

/// Late fusion: retrieve the top-k entities and aggregate their scores onto
/// their types.
RankedTypeList rank_types_ec(const InvertedIndex& entity_index, std::string_view question, std::size_t k = 20,
                             Aggregation aggregation = Aggregation::sum);

}  // namespace atp
