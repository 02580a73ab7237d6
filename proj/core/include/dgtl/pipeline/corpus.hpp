#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgtl/graphdata/tag.hpp"
#include "dgtl/pipeline/prompt.hpp"

namespace dgtl::pipeline {

// Pretraining text for a dataset. Always contains the raw node texts plus
// rendered prompt/response examples so every template word is in
// vocabulary. For synthetic graphs (generator keywords recognizable in the
// texts) it also teaches the lexical keyword-to-category mapping and the
// skill of answering with the majority keyword class of the neighbor
// segment:
//   - 0-hop prompts answered with the class of the node's own keyword,
//   - placeholder-slot prompts answered the same way,
//   - prompts whose neighbor slots carry sampled keyword tokens, answered
//     with the majority class of exactly those keywords.
// Labels never enter the corpus; every supervision signal is a function of
// text alone.
std::vector<std::string> build_pretrain_corpus(const graphdata::TAGraph& graph,
                                               const PromptTemplate& tmpl,
                                               std::uint64_t seed);

}  // namespace dgtl::pipeline
