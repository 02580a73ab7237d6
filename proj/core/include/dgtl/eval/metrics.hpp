#pragma once

#include <span>
#include <string>

#include "dgtl/gnn/disentangled.hpp"
#include "dgtl/lm/model.hpp"
#include "dgtl/pipeline/prompt.hpp"
#include "dgtl/pipeline/train.hpp"

namespace dgtl::eval {

// Category argmax at the label position, ties toward the lower category
// index. params == nullptr evaluates the injection-free prompt.
int predict_node(const graphdata::TAGraph& graph, int u, const lm::FrozenLM& lm,
                 const gnn::DisentangledParams* params,
                 const pipeline::PromptTemplate& tmpl,
                 const numerics::Tensor& h0);

// Percentage of generations whose first sentence contains the gold
// category string, case-insensitively.
double exact_match(std::span<const std::string> generations,
                   std::span<const std::string> gold_labels);

// Greedy continuation after the response template, with the node's
// injection active; returns detokenized text (starts with the predicted
// category token for a trained model).
std::string explain(const graphdata::TAGraph& graph, int u,
                    const lm::FrozenLM& lm,
                    const gnn::DisentangledParams* params,
                    const pipeline::PromptTemplate& tmpl,
                    const numerics::Tensor& h0, int max_tokens);

}  // namespace dgtl::eval
