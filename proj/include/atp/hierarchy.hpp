#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace atp {

/// Single-parent type taxonomy (e.g. the DBpedia ontology). Roots have
/// depth 1; `max_depth()` is the h used by the lenient gain.
class TypeHierarchy {
 public:
  TypeHierarchy() = default;
  TypeHierarchy(const TypeHierarchy& other);
  TypeHierarchy& operator=(const TypeHierarchy& other);

  /// Builds from (child, parent) pairs; parent "ROOT" (or empty) marks a root.
  /// Throws ValidationError on cycles, on parents that are never declared as
  /// children, and on a child declared with two different parents.
  static TypeHierarchy from_edges(std::span<const std::pair<std::string, std::string>> edges);
  /// Tab-separated `child<TAB>parent` lines; blank lines and `#` comments skipped.
  static TypeHierarchy load(const std::filesystem::path& path);
  static TypeHierarchy parse(std::string_view tsv, std::string_view origin = "<tsv>");

  bool contains(std::string_view type) const;
  std::size_t size() const { return depth_.size(); }
  int max_depth() const { return max_depth_; }
  std::optional<int> depth(std::string_view type) const;
  std::optional<std::string> parent(std::string_view type) const;

  /// True iff `ancestor` lies on the parent chain of `type` (exclusive).
  bool is_ancestor(std::string_view ancestor, std::string_view type) const;
  /// t == g, or one is an ancestor of the other. Unknown types yield false
  /// and are logged once.
  bool on_same_path(std::string_view t, std::string_view g) const;
  /// Parent-edge count between two types on the same path.
  std::optional<int> path_distance(std::string_view t, std::string_view g) const;

  /// 1 for an exact match (known to the hierarchy or not); otherwise 0 if `t`
  /// shares no path with any gold type, else 1 - d/h for the closest one.
  double lenient_gain(std::string_view t, std::span<const std::string> gold) const;

  /// `type<TAB>depth<TAB>parent` lines sorted by type.
  std::string depths_tsv() const;

 private:
  void note_unknown(std::string_view type) const;

  std::unordered_map<std::string, std::string> parent_;  // roots absent
  std::map<std::string, int> depth_;
  int max_depth_ = 0;
  mutable std::mutex unknown_mutex_;
  mutable std::set<std::string> unknown_seen_;
};

}  // namespace atp
