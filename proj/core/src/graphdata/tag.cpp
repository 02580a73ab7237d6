#include "dgtl/graphdata/tag.hpp"

#include <algorithm>
#include <set>

#include "dgtl/errors.hpp"

namespace dgtl::graphdata {

TAGraph TAGraph::build(std::vector<std::string> texts,
                       std::vector<std::pair<int, int>> edges,
                       std::vector<int> labels,
                       std::vector<std::string> categories) {
  const int n = static_cast<int>(texts.size());
  if (labels.size() != texts.size()) {
    throw ValueError("label count " + std::to_string(labels.size()) +
                     " does not match node count " + std::to_string(n));
  }
  for (int u = 0; u < n; ++u) {
    if (texts[u].empty()) {
      throw ValueError("node " + std::to_string(u) + " has empty text");
    }
    if (labels[u] < -1 || labels[u] >= static_cast<int>(categories.size())) {
      throw ValueError("node " + std::to_string(u) + " label " +
                       std::to_string(labels[u]) + " outside category list");
    }
  }
  std::set<std::pair<int, int>> canonical;
  for (auto [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n) {
      throw ValueError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") has an endpoint outside [0," + std::to_string(n) + ")");
    }
    if (u == v) {
      throw ValueError("self-edge at node " + std::to_string(u));
    }
    canonical.insert({std::min(u, v), std::max(u, v)});
  }
  TAGraph g;
  g.texts_ = std::move(texts);
  g.labels_ = std::move(labels);
  g.categories_ = std::move(categories);
  g.edges_.assign(canonical.begin(), canonical.end());
  g.adjacency_.resize(static_cast<std::size_t>(n));
  for (auto [u, v] : g.edges_) {
    g.adjacency_[u].push_back(v);
    g.adjacency_[v].push_back(u);
  }
  for (auto& nbrs : g.adjacency_) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

const std::string& TAGraph::text(int u) const {
  if (u < 0 || u >= node_count()) {
    throw ValueError("node index " + std::to_string(u) + " out of range");
  }
  return texts_[u];
}

int TAGraph::label(int u) const {
  if (u < 0 || u >= node_count()) {
    throw ValueError("node index " + std::to_string(u) + " out of range");
  }
  return labels_[u];
}

const std::vector<int>& TAGraph::neighbors(int u) const {
  if (u < 0 || u >= node_count()) {
    throw ValueError("node index " + std::to_string(u) + " out of range");
  }
  return adjacency_[u];
}

DirectedEdges DirectedEdges::from(const TAGraph& graph) {
  DirectedEdges de;
  de.dst.reserve(graph.edges().size() * 2);
  de.src.reserve(graph.edges().size() * 2);
  for (int u = 0; u < graph.node_count(); ++u) {
    for (int v : graph.neighbors(u)) {
      de.dst.push_back(u);
      de.src.push_back(v);
    }
  }
  return de;
}

}  // namespace dgtl::graphdata
