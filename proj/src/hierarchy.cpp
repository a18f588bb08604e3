#include "atp/hierarchy.hpp"

#include <algorithm>
#include <sstream>

#include "atp/error.hpp"
#include "atp/io.hpp"
#include "atp/log.hpp"

namespace atp {

TypeHierarchy::TypeHierarchy(const TypeHierarchy& other)
    : parent_(other.parent_), depth_(other.depth_), max_depth_(other.max_depth_) {}

TypeHierarchy& TypeHierarchy::operator=(const TypeHierarchy& other) {
  if (this != &other) {
    parent_ = other.parent_;
    depth_ = other.depth_;
    max_depth_ = other.max_depth_;
  }
  return *this;
}

TypeHierarchy TypeHierarchy::from_edges(std::span<const std::pair<std::string, std::string>> edges) {
  TypeHierarchy h;
  std::map<std::string, std::string> declared;  // child -> parent ("" for roots)
  for (const auto& [child, parent] : edges) {
    if (child.empty() || child == "ROOT") throw ValidationError("hierarchy: invalid child label");
    const std::string p = parent == "ROOT" ? std::string() : parent;
    auto [it, inserted] = declared.emplace(child, p);
    if (!inserted && it->second != p)
      throw ValidationError("hierarchy: type " + child + " declared with two parents");
  }
  for (const auto& [child, parent] : declared) {
    if (parent.empty()) continue;
    if (!declared.contains(parent))
      throw ValidationError("hierarchy: parent " + parent + " of " + child + " is never declared");
    h.parent_.emplace(child, parent);
  }
  // Walk up until a type of known depth or a root; revisiting a type on the
  // current walk means a cycle.
  for (const auto& entry : declared) {
    if (h.depth_.contains(entry.first)) continue;
    std::vector<std::string> chain;
    std::set<std::string> on_chain;
    std::string cur = entry.first;
    int base = 0;
    while (true) {
      if (auto known = h.depth_.find(cur); known != h.depth_.end()) {
        base = known->second;
        break;
      }
      if (!on_chain.insert(cur).second) throw ValidationError("hierarchy: cycle through type " + cur);
      chain.push_back(cur);
      auto up = h.parent_.find(cur);
      if (up == h.parent_.end()) break;
      cur = up->second;
    }
    for (std::size_t i = chain.size(); i-- > 0;)
      h.depth_.emplace(chain[i], base + static_cast<int>(chain.size() - i));
  }
  for (const auto& [t, d] : h.depth_) h.max_depth_ = std::max(h.max_depth_, d);
  return h;
}

TypeHierarchy TypeHierarchy::parse(std::string_view tsv, std::string_view origin) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= tsv.size()) {
    std::size_t end = tsv.find('\n', pos);
    if (end == std::string_view::npos) end = tsv.size();
    std::string_view line = tsv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == tsv.size()) break;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos)
      throw ParseError(std::string(origin) + ":" + std::to_string(line_no) + ": expected child<TAB>parent");
    edges.emplace_back(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
    if (end == tsv.size()) break;
  }
  return from_edges(edges);
}

TypeHierarchy TypeHierarchy::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

bool TypeHierarchy::contains(std::string_view type) const { return depth_.contains(std::string(type)); }

std::optional<int> TypeHierarchy::depth(std::string_view type) const {
  auto it = depth_.find(std::string(type));
  if (it == depth_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> TypeHierarchy::parent(std::string_view type) const {
  auto it = parent_.find(std::string(type));
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

bool TypeHierarchy::is_ancestor(std::string_view ancestor, std::string_view type) const {
  auto it = parent_.find(std::string(type));
  while (it != parent_.end()) {
    if (it->second == ancestor) return true;
    it = parent_.find(it->second);
  }
  return false;
}

void TypeHierarchy::note_unknown(std::string_view type) const {
  std::lock_guard lock(unknown_mutex_);
  if (unknown_seen_.insert(std::string(type)).second)
    log::debug("type not in hierarchy, treated as off-path: " + std::string(type));
}

bool TypeHierarchy::on_same_path(std::string_view t, std::string_view g) const {
  bool ok = true;
  if (!contains(t)) {
    note_unknown(t);
    ok = false;
  }
  if (!contains(g)) {
    note_unknown(g);
    ok = false;
  }
  if (!ok) return false;
  return t == g || is_ancestor(t, g) || is_ancestor(g, t);
}

std::optional<int> TypeHierarchy::path_distance(std::string_view t, std::string_view g) const {
  if (!on_same_path(t, g)) return std::nullopt;
  return std::abs(*depth(t) - *depth(g));
}

double TypeHierarchy::lenient_gain(std::string_view t, std::span<const std::string> gold) const {
  if (std::find(gold.begin(), gold.end(), t) != gold.end()) return 1.0;
  std::optional<int> best;
  for (const auto& g : gold) {
    if (auto d = path_distance(t, g); d && (!best || *d < *best)) best = d;
  }
  if (!best || max_depth_ == 0) return 0.0;
  return 1.0 - static_cast<double>(*best) / static_cast<double>(max_depth_);
}

std::string TypeHierarchy::depths_tsv() const {
  std::ostringstream os;
  for (const auto& [t, d] : depth_) {
    auto p = parent(t);
    os << t << '\t' << d << '\t' << (p ? *p : std::string("ROOT")) << '\n';
  }
  return os.str();
}

}  // namespace atp
