#include "dgtl/pipeline/corpus.hpp"

#include "dgtl/graphdata/synthetic.hpp"
#include "dgtl/numerics/rng.hpp"

namespace dgtl::pipeline {

using graphdata::TAGraph;
using numerics::Rng;

std::vector<std::string> build_pretrain_corpus(const TAGraph& graph,
                                               const PromptTemplate& tmpl,
                                               std::uint64_t seed) {
  const int n_classes = static_cast<int>(graph.categories().size());
  const auto& cats = graph.categories();
  std::vector<std::string> lines;

  for (const auto& text : graph.texts()) lines.push_back(text);

  // Synthetic graphs embed generator keywords; detect them once.
  int keyword_nodes = 0;
  for (const auto& text : graph.texts()) {
    if (graphdata::keyword_class_of_text(text, n_classes) >= 0) ++keyword_nodes;
  }
  const bool keyword_style = keyword_nodes * 2 > graph.node_count();

  PromptTemplate zero_hop = tmpl;
  zero_hop.include_neighbor_segment = false;

  if (!keyword_style) {
    // Generic corpus: template coverage plus response lines for every
    // category so the category tokens are trained in answer position.
    for (int u = 0; u < std::min(graph.node_count(), 64); ++u) {
      const int c = u % n_classes;
      lines.push_back(tmpl.render_text(graph.text(u), tmpl.placeholder_fill(), cats) +
                      ' ' + cats[c] + " .");
      lines.push_back(zero_hop.render_text(graph.text(u), "", cats) + ' ' + cats[c] +
                      " .");
    }
    return lines;
  }

  const auto keywords = graphdata::class_keywords(n_classes);
  Rng rng(numerics::derive_seed(seed, "corpus"));

  // Lexical keyword-to-category pairings.
  for (int c = 0; c < n_classes; ++c) {
    for (const auto& kw : keywords[c]) {
      lines.push_back("the category for a node about " + kw + " would be " +
                      cats[c] + " .");
    }
  }

  for (int u = 0; u < graph.node_count(); ++u) {
    const std::string& text = graph.text(u);
    const int own = graphdata::keyword_class_of_text(text, n_classes);
    if (own < 0) continue;

    // Without neighbor information the best answer is the own-text class.
    lines.push_back(zero_hop.render_text(text, "", cats) + ' ' + cats[own] + " .");
    lines.push_back(tmpl.render_text(text, tmpl.placeholder_fill(), cats) + ' ' +
                    cats[own] + " .");

    // Neighbor slots filled with keyword tokens; the answer is their
    // majority class, overriding the node's own text.
    const int focus = rng.uniform_int(n_classes);
    std::string fill;
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    for (int k = 0; k < tmpl.reserved_slots; ++k) {
      const int cls = rng.uniform() < 0.75 ? focus : rng.uniform_int(n_classes);
      ++counts[cls];
      const auto& pool = keywords[cls];
      if (k) fill += ' ';
      fill += pool[rng.index(pool.size())];
    }
    int majority = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (counts[c] > counts[majority]) majority = c;
    }
    lines.push_back(tmpl.render_text(text, fill, cats) + ' ' + cats[majority] + " .");
  }
  return lines;
}

}  // namespace dgtl::pipeline
