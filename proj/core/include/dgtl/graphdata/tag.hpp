#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dgtl::graphdata {

// Text-attributed graph: one UTF-8 text per node, an undirected duplicate-
// free edge set with no self-edges, a category label per node (-1 when
// unknown) and the ordered category list. Immutable after construction.
class TAGraph {
 public:
  // Edges may arrive in any orientation and with duplicates; they are
  // canonicalized and deduplicated. Self-edges and dangling endpoints are
  // rejected, as are empty texts and labels outside the category list.
  static TAGraph build(std::vector<std::string> texts,
                       std::vector<std::pair<int, int>> edges,
                       std::vector<int> labels,
                       std::vector<std::string> categories);

  int node_count() const noexcept { return static_cast<int>(texts_.size()); }
  const std::vector<std::string>& texts() const noexcept { return texts_; }
  const std::string& text(int u) const;
  const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  int label(int u) const;
  const std::vector<std::string>& categories() const noexcept { return categories_; }

  const std::vector<int>& neighbors(int u) const;
  int degree(int u) const { return static_cast<int>(neighbors(u).size()); }

 private:
  std::vector<std::string> texts_;
  std::vector<std::pair<int, int>> edges_;  // canonical (u < v), sorted
  std::vector<std::vector<int>> adjacency_;  // sorted neighbor lists
  std::vector<int> labels_;
  std::vector<std::string> categories_;
};

// Both directions of every undirected edge, sorted by (dst, src). This is
// the deterministic edge enumeration used by aggregation: entry i carries
// the weight applied to node src[i] when aggregating into dst[i].
struct DirectedEdges {
  std::vector<int> dst;
  std::vector<int> src;

  static DirectedEdges from(const TAGraph& graph);
  std::size_t count() const noexcept { return dst.size(); }
};

}  // namespace dgtl::graphdata
