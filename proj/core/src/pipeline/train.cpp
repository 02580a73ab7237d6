#include "dgtl/pipeline/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/adam.hpp"
#include "dgtl/numerics/ops.hpp"
#include "dgtl/numerics/rng.hpp"
#include "dgtl/numerics/tape.hpp"

namespace dgtl::pipeline {

using namespace dgtl::numerics;

Tensor build_h0_cache(const lm::FrozenLM& lm, const graphdata::TAGraph& graph) {
  TapePause pause;
  const int n = graph.node_count();
  const int d = lm.config().model_dim;
  Tensor h0 = Tensor::zeros({n, d});
  auto& values = h0.mutable_values();
  for (int u = 0; u < n; ++u) {
    const Tensor e = lm::embed_text(lm, graph.text(u));
    for (int j = 0; j < d; ++j) values[static_cast<std::size_t>(u) * d + j] = e.at(static_cast<std::size_t>(j));
  }
  h0.apply_mode_rounding();
  return h0;
}

namespace {

lm::InjectionMap injection_for(const gnn::DisentangledParams& params,
                               std::span<const Tensor> outputs, int u,
                               const PromptPlan& plan) {
  if (static_cast<int>(plan.reserved_positions.size()) != params.channel_count()) {
    throw ShapeError("prompt has " + std::to_string(plan.reserved_positions.size()) +
                     " reserved slots but " + std::to_string(params.channel_count()) +
                     " channels are configured");
  }
  lm::InjectionMap inj;
  inj.positions = plan.reserved_positions;
  inj.vectors = gnn::injection_rows_for_node(params, outputs, u);
  return inj;
}

int argmax_category(const Tensor& logits, const lm::Vocabulary& vocab,
                    const std::vector<std::string>& categories) {
  int best = -1;
  double best_score = 0.0;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double s = logits.at(0, vocab.category_token(categories[c]));
    if (best < 0 || s > best_score) {
      best = static_cast<int>(c);
      best_score = s;
    }
  }
  return best;
}

}  // namespace

Tensor node_forward(const graphdata::TAGraph& graph, int u,
                    const lm::FrozenLM& lm,
                    const gnn::DisentangledParams* params,
                    const PromptTemplate& tmpl, const Tensor& h0) {
  const auto plan = build_prompt(graph, u, tmpl, lm.vocab(),
                                 lm.config().max_positions);
  if (!params || plan.reserved_positions.empty()) {
    return lm::forward_logits_at(lm, plan.ids, nullptr, plan.label_position - 1);
  }
  const auto edges = graphdata::DirectedEdges::from(graph);
  const auto outputs = gnn::channel_forward_all(*params, h0, edges);
  const auto inj = injection_for(*params, outputs, u, plan);
  return lm::forward_logits_at(lm, plan.ids, &inj, plan.label_position - 1);
}

Tensor first_token_loss(const Tensor& logits, int label_token_id) {
  if (logits.rank() != 2 || logits.rows() != 1) {
    throw ShapeError("first_token_loss expects [1, vocab] logits, got " +
                     shape_str(logits.shape()));
  }
  return cross_entropy(logits, {label_token_id});
}

int predict_category(const graphdata::TAGraph& graph, int u,
                     const lm::FrozenLM& lm,
                     const gnn::DisentangledParams* params,
                     const PromptTemplate& tmpl, const Tensor& h0) {
  TapePause pause;
  const Tensor logits = node_forward(graph, u, lm, params, tmpl, h0);
  return argmax_category(logits, lm.vocab(), graph.categories());
}

double evaluate_accuracy(const graphdata::TAGraph& graph,
                         const std::vector<int>& nodes, const lm::FrozenLM& lm,
                         const gnn::DisentangledParams* params,
                         const PromptTemplate& tmpl, const Tensor& h0) {
  if (nodes.empty()) throw ValueError("accuracy over an empty node set");
  TapePause pause;
  std::vector<Tensor> outputs;
  graphdata::DirectedEdges edges;
  if (params && tmpl.include_neighbor_segment) {
    edges = graphdata::DirectedEdges::from(graph);
    outputs = gnn::channel_forward_all(*params, h0, edges);
  }
  int correct = 0;
  for (int u : nodes) {
    const auto plan = build_prompt(graph, u, tmpl, lm.vocab(),
                                   lm.config().max_positions);
    Tensor logits;
    if (params && !plan.reserved_positions.empty()) {
      const auto inj = injection_for(*params, outputs, u, plan);
      logits = lm::forward_logits_at(lm, plan.ids, &inj, plan.label_position - 1);
    } else {
      logits = lm::forward_logits_at(lm, plan.ids, nullptr, plan.label_position - 1);
    }
    if (argmax_category(logits, lm.vocab(), graph.categories()) == graph.label(u)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

TrainResult train_dgtl(const graphdata::TAGraph& graph,
                       const graphdata::Split& split, const lm::FrozenLM& lm,
                       const PromptTemplate& tmpl, const TrainConfig& cfg,
                       const Tensor* h0_cache) {
  if (!lm.frozen()) throw ValueError("train_dgtl requires a frozen language model");
  if (split.train_nodes.empty()) throw ValueError("empty train split");
  if (cfg.channels != tmpl.reserved_slots) {
    throw ConfigError("channel count " + std::to_string(cfg.channels) +
                      " does not match reserved slots " +
                      std::to_string(tmpl.reserved_slots));
  }
  for (int u : split.train_nodes) {
    if (graph.label(u) < 0) {
      throw ValueError("train node " + std::to_string(u) + " is unlabeled");
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  Tensor h0 = h0_cache ? *h0_cache : build_h0_cache(lm, graph);
  const auto edges = graphdata::DirectedEdges::from(graph);

  TrainResult result;
  result.params = gnn::DisentangledParams::init(
      cfg.channels, lm.config().model_dim, cfg.d_ch, lm.config().model_dim,
      cfg.delta, derive_seed(cfg.seed, "theta_init"));
  auto theta = result.params.parameters();

  // Prompt plans are static; build them once.
  std::vector<PromptPlan> plans(static_cast<std::size_t>(graph.node_count()));
  std::vector<char> has_plan(static_cast<std::size_t>(graph.node_count()), 0);
  auto plan_for = [&](int u) -> const PromptPlan& {
    if (!has_plan[u]) {
      plans[u] = build_prompt(graph, u, tmpl, lm.vocab(), lm.config().max_positions);
      has_plan[u] = 1;
    }
    return plans[u];
  };

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  AdamState adam(adam_cfg);
  Rng rng(derive_seed(cfg.seed, "batch_order"));

  std::vector<int> order = split.train_nodes;
  std::size_t cursor = order.size();  // forces a shuffle on first use
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(cfg.max_steps));

  const int batch = std::min<int>(cfg.batch_size, static_cast<int>(order.size()));
  for (int step = 1; step <= cfg.max_steps; ++step) {
    std::vector<int> batch_nodes;
    batch_nodes.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch_nodes.push_back(order[cursor++]);
    }
    std::sort(batch_nodes.begin(), batch_nodes.end());

    Tape tape;
    Tensor mean_loss;
    {
      TapeScope scope(tape);
      const auto outputs = gnn::channel_forward_all(result.params, h0, edges);
      Tensor total;
      for (int u : batch_nodes) {
        const auto& plan = plan_for(u);
        const auto inj = injection_for(result.params, outputs, u, plan);
        Tensor logits =
            lm::forward_logits_at(lm, plan.ids, &inj, plan.label_position - 1);
        Tensor loss = cross_entropy(logits, {plan.label_token_id});
        total = total.defined() ? add(total, loss) : loss;
      }
      mean_loss = scale(total, 1.0 / batch);
      tape.backward(mean_loss);
    }
    const double loss_value = mean_loss.values()[0];
    if (!std::isfinite(loss_value)) {
      throw NonFiniteError("training loss became non-finite at step " +
                           std::to_string(step) + " (seed " +
                           std::to_string(cfg.seed) + ")");
    }
    losses.push_back(loss_value);
    result.final_loss = loss_value;
    result.steps_run = step;

    if (!adam.step(theta)) {
      throw NonFiniteError("non-finite gradient at step " + std::to_string(step));
    }
    for (auto& p : theta) p.zero_grad();

    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.max_steps)) {
      TrainLogRow row;
      row.step = step;
      row.loss = loss_value;
      row.train_accuracy =
          evaluate_accuracy(graph, split.train_nodes, lm, &result.params, tmpl, h0);
      if (!split.test_nodes.empty()) {
        row.test_accuracy =
            evaluate_accuracy(graph, split.test_nodes, lm, &result.params, tmpl, h0);
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
      result.log.push_back(row);
    }

    if (cfg.early_stop && static_cast<int>(losses.size()) >= 2 * cfg.plateau_window) {
      const auto recent = losses.end() - cfg.plateau_window;
      const auto before = recent - cfg.plateau_window;
      const double old_mean =
          std::accumulate(before, recent, 0.0) / cfg.plateau_window;
      const double new_mean =
          std::accumulate(recent, losses.end(), 0.0) / cfg.plateau_window;
      if ((old_mean - new_mean) / std::max(old_mean, 1e-12) <
          cfg.plateau_rel_improvement) {
        result.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace dgtl::pipeline
