#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgtl/graphdata/tag.hpp"

namespace dgtl::graphdata {

enum class SyntheticMode { TextInformative, StructureOnly };

// Synthetic text-attributed graphs for desk-scale experiments.
//
// TextInformative: balanced labels, community-planted edges along the
// labels (within-class probability far above cross-class), and each node's
// text embeds a keyword from its own class's keyword set with probability
// keyword_purity (uniform over all keywords otherwise). The label is
// readable from the text alone.
//
// StructureOnly: every node's keyword is drawn uniformly over all classes'
// keyword sets, independently of everything else. Each node is then wired
// toward a hidden balanced target class: most edges go to nodes that carry
// a keyword of the target class and share the same target (so the signal
// is reinforced two hops out), and extra targeted edges are added until
// the neighbor keyword-class majority equals the target with margin two.
// The label is DEFINED as that neighbor majority. A node's own keyword
// never enters its own label and the targets are independent of the
// keywords, so text alone carries no label signal and the label is
// recoverable only through the graph.
struct SyntheticSpec {
  int n_nodes = 300;
  int n_classes = 3;
  SyntheticMode mode = SyntheticMode::StructureOnly;
  double keyword_purity = 1.0;
  double avg_degree = 10.0;
  std::uint64_t seed = 0;
};

TAGraph gen_synthetic_tag(const SyntheticSpec& spec);

// Two-relation ablation dataset. Every node carries a random group token
// and a random keyword. Same-group edges behave like StructureOnly inside
// each group: the label is the majority keyword class among same-group
// neighbors, forced with margin two. Cross-group edges are confounders
// wired toward other-group nodes whose keyword class (and target) is
// (label + 1) mod n_classes, so aggregating over the full edge set mixes
// two opposite signals while the group tokens at the endpoints make the
// two relations separable by a learned edge score.
struct TwoRelationSpec {
  int n_nodes = 300;
  int n_classes = 3;
  double avg_degree_same = 6.0;
  double avg_degree_cross = 6.0;
  std::uint64_t seed = 0;
};

TAGraph gen_two_relation_tag(const TwoRelationSpec& spec);

// Deterministic vocabulary shared by generators, prompts and pretraining:
// category names, 8 keywords per class (disjoint across classes), filler
// words and the two group tokens.
std::vector<std::string> category_names(int n_classes);
std::vector<std::vector<std::string>> class_keywords(int n_classes);
std::vector<std::string> filler_words();
std::vector<std::string> group_tokens();

// Majority keyword class among the neighbors of u (ties toward the lower
// class); -1 when u has no neighbors. The structure-only label oracle.
int neighbor_keyword_majority(const TAGraph& graph, int u, int n_classes);

// Index of the keyword embedded in a node's text, or -1.
int keyword_class_of_text(const std::string& text, int n_classes);

}  // namespace dgtl::graphdata
