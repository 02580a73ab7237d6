#pragma once

#include <cstdint>
#include <vector>

#include "dgtl/graphdata/tag.hpp"

namespace dgtl::graphdata {

// Semi-supervised split: disjoint labeled train/test node sets. Train holds
// exactly per_class nodes of every category; test is sampled from the
// remaining labeled nodes.
struct Split {
  std::vector<int> train_nodes;
  std::vector<int> test_nodes;
  std::uint64_t seed = 0;
};

// test_size == 0 selects the default min(1000, remaining_labeled / 2).
Split make_split(const TAGraph& graph, int per_class, int test_size,
                 std::uint64_t seed);

}  // namespace dgtl::graphdata
