#pragma once

#include <cstdint>
#include <string>

#include "dgtl/eval/report.hpp"
#include "dgtl/gnn/disentangled.hpp"
#include "dgtl/graphdata/split.hpp"
#include "dgtl/lm/model.hpp"
#include "dgtl/pipeline/prompt.hpp"
#include "dgtl/pipeline/train.hpp"

namespace dgtl::eval {

// Accuracy of a (possibly injection-free) prompt evaluation over the test
// nodes, with per-class counts.
EvalReport evaluate_method(const graphdata::TAGraph& graph,
                           const graphdata::Split& split, const lm::FrozenLM& lm,
                           const gnn::DisentangledParams* params,
                           const pipeline::PromptTemplate& tmpl,
                           const std::string& dataset_id,
                           const std::string& method_id,
                           const numerics::Tensor& h0);

// Prompts without any neighborhood information: the neighbor segment is
// omitted entirely, no injection, no training.
EvalReport run_0hop(const graphdata::TAGraph& graph, const graphdata::Split& split,
                    const lm::FrozenLM& lm, pipeline::DatasetKind kind,
                    const std::string& dataset_id, const numerics::Tensor& h0);

// Full pipeline with the learned edge weighting disabled: every channel
// aggregates over the binary adjacency (delta forced to 1); the channels
// keep their separate weights.
EvalReport run_wo_disen(const graphdata::TAGraph& graph,
                        const graphdata::Split& split, const lm::FrozenLM& lm,
                        const pipeline::PromptTemplate& tmpl,
                        pipeline::TrainConfig cfg, const std::string& dataset_id,
                        const numerics::Tensor& h0);

// Transductive bag-of-words GCN classifier head; a sanity reference, not a
// language-model method.
struct GcnConfig {
  int hidden_dim = 32;
  int epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

EvalReport run_gcn_reference(const graphdata::TAGraph& graph,
                             const graphdata::Split& split, const GcnConfig& cfg,
                             const std::string& dataset_id);

}  // namespace dgtl::eval
