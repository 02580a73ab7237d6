#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dgtl/gnn/disentangled.hpp"
#include "dgtl/graphdata/split.hpp"
#include "dgtl/graphdata/tag.hpp"
#include "dgtl/lm/model.hpp"
#include "dgtl/pipeline/prompt.hpp"

namespace dgtl::pipeline {

using numerics::Tensor;

struct TrainConfig {
  int channels = 8;  // K, must match the template's reserved slots
  int d_ch = 32;
  double delta = 0.8;
  double lr = 1e-3;
  int batch_size = 8;
  int max_steps = 1000;
  int eval_every = 0;  // 0 disables periodic accuracy evaluation
  std::uint64_t seed = 0;
  bool early_stop = true;
  // Stop when the mean loss of the last window improves on the window
  // before it by less than this relative amount.
  double plateau_rel_improvement = 1e-4;
  int plateau_window = 200;
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  gnn::DisentangledParams params;
  std::vector<TrainLogRow> log;
  int steps_run = 0;
  double final_loss = 0.0;
  bool early_stopped = false;
};

// Mean-pooled text embeddings for every node; constant during training.
Tensor build_h0_cache(const lm::FrozenLM& lm, const graphdata::TAGraph& graph);

// Next-token logits [1, V] at the label position for one node: runs the
// disentangled channels, injects the node's K vectors at the reserved
// slots and evaluates the frozen decoder. params == nullptr (or a prompt
// without a neighbor segment) gives the plain non-injected forward.
Tensor node_forward(const graphdata::TAGraph& graph, int u,
                    const lm::FrozenLM& lm,
                    const gnn::DisentangledParams* params,
                    const PromptTemplate& tmpl, const Tensor& h0);

// Cross-entropy at the single supervised position over the full vocabulary.
Tensor first_token_loss(const Tensor& logits, int label_token_id);

// Argmax restricted to category tokens (ties toward the lower category
// index). Shared channel outputs are recomputed per call.
int predict_category(const graphdata::TAGraph& graph, int u,
                     const lm::FrozenLM& lm,
                     const gnn::DisentangledParams* params,
                     const PromptTemplate& tmpl, const Tensor& h0);

// Fraction of `nodes` whose predicted category equals the label.
double evaluate_accuracy(const graphdata::TAGraph& graph,
                         const std::vector<int>& nodes, const lm::FrozenLM& lm,
                         const gnn::DisentangledParams* params,
                         const PromptTemplate& tmpl, const Tensor& h0);

// Algorithm: per step, sample a mini-batch from the train set (shuffled
// without replacement per epoch), run the channels once, inject per node
// in ascending node order, average the first-token losses, update only the
// disentangled parameters with Adam. Stops at max_steps or on a loss
// plateau. The language model must be frozen.
TrainResult train_dgtl(const graphdata::TAGraph& graph,
                       const graphdata::Split& split, const lm::FrozenLM& lm,
                       const PromptTemplate& tmpl, const TrainConfig& cfg,
                       const Tensor* h0_cache = nullptr);

}  // namespace dgtl::pipeline
