#include "dgtl/graphdata/split.hpp"

#include <algorithm>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/rng.hpp"

namespace dgtl::graphdata {

Split make_split(const TAGraph& graph, int per_class, int test_size,
                 std::uint64_t seed) {
  if (per_class <= 0) throw ValueError("per_class must be positive");
  const int n_classes = static_cast<int>(graph.categories().size());
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (int u = 0; u < graph.node_count(); ++u) {
    const int y = graph.label(u);
    if (y >= 0) by_class[y].push_back(u);
  }
  for (int c = 0; c < n_classes; ++c) {
    if (static_cast<int>(by_class[c].size()) < per_class) {
      throw ValueError("category '" + graph.categories()[c] + "' has only " +
                       std::to_string(by_class[c].size()) + " labeled nodes, need " +
                       std::to_string(per_class));
    }
  }

  numerics::Rng rng(numerics::derive_seed(seed, "split"));
  Split split;
  split.seed = seed;
  std::vector<char> in_train(static_cast<std::size_t>(graph.node_count()), 0);
  for (int c = 0; c < n_classes; ++c) {
    auto pool = by_class[c];  // ascending node order; shuffle is seed-driven
    rng.shuffle(pool);
    for (int i = 0; i < per_class; ++i) {
      split.train_nodes.push_back(pool[i]);
      in_train[pool[i]] = 1;
    }
  }
  std::sort(split.train_nodes.begin(), split.train_nodes.end());

  std::vector<int> rest;
  for (int u = 0; u < graph.node_count(); ++u) {
    if (graph.label(u) >= 0 && !in_train[u]) rest.push_back(u);
  }
  int want = test_size;
  if (want == 0) {
    want = std::min<int>(1000, static_cast<int>(rest.size()) / 2);
  }
  if (want <= 0 || static_cast<int>(rest.size()) < want) {
    throw ValueError("labeled pool of " + std::to_string(rest.size()) +
                     " nodes cannot provide a test set of " + std::to_string(want));
  }
  rng.shuffle(rest);
  split.test_nodes.assign(rest.begin(), rest.begin() + want);
  std::sort(split.test_nodes.begin(), split.test_nodes.end());
  return split;
}

}  // namespace dgtl::graphdata
