#include "dgtl/eval/baselines.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/adam.hpp"
#include "dgtl/numerics/ops.hpp"
#include "dgtl/numerics/rng.hpp"
#include "dgtl/numerics/tape.hpp"

namespace dgtl::eval {

using namespace dgtl::numerics;
using graphdata::TAGraph;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EvalReport count_predictions(const TAGraph& graph, const std::vector<int>& nodes,
                             const std::string& dataset_id,
                             const std::string& method_id,
                             const std::function<int(int)>& predict) {
  EvalReport report;
  report.dataset_id = dataset_id;
  report.method_id = method_id;
  report.class_names = graph.categories();
  report.per_class_total.assign(graph.categories().size(), 0);
  report.per_class_correct.assign(graph.categories().size(), 0);
  int correct = 0;
  for (int u : nodes) {
    const int gold = graph.label(u);
    if (gold < 0) throw ValueError("evaluation node " + std::to_string(u) + " is unlabeled");
    ++report.per_class_total[gold];
    if (predict(u) == gold) {
      ++report.per_class_correct[gold];
      ++correct;
    }
  }
  report.score_percent = 100.0 * correct / static_cast<double>(nodes.size());
  return report;
}

}  // namespace

EvalReport evaluate_method(const TAGraph& graph, const graphdata::Split& split,
                           const lm::FrozenLM& lm,
                           const gnn::DisentangledParams* params,
                           const pipeline::PromptTemplate& tmpl,
                           const std::string& dataset_id,
                           const std::string& method_id, const Tensor& h0) {
  const auto t0 = std::chrono::steady_clock::now();
  TapePause pause;
  // Channel outputs are shared across the evaluated nodes.
  std::vector<Tensor> outputs;
  graphdata::DirectedEdges edges;
  if (params && tmpl.include_neighbor_segment) {
    edges = graphdata::DirectedEdges::from(graph);
    outputs = gnn::channel_forward_all(*params, h0, edges);
  }
  auto predict = [&](int u) {
    const auto plan = pipeline::build_prompt(graph, u, tmpl, lm.vocab(),
                                             lm.config().max_positions);
    Tensor logits;
    if (params && !plan.reserved_positions.empty()) {
      lm::InjectionMap inj;
      inj.positions = plan.reserved_positions;
      inj.vectors = gnn::injection_rows_for_node(*params, outputs, u);
      logits = lm::forward_logits_at(lm, plan.ids, &inj, plan.label_position - 1);
    } else {
      logits = lm::forward_logits_at(lm, plan.ids, nullptr, plan.label_position - 1);
    }
    int best = -1;
    double best_score = 0.0;
    for (std::size_t c = 0; c < graph.categories().size(); ++c) {
      const double s = logits.at(0, lm.vocab().category_token(graph.categories()[c]));
      if (best < 0 || s > best_score) {
        best = static_cast<int>(c);
        best_score = s;
      }
    }
    return best;
  };
  EvalReport report =
      count_predictions(graph, split.test_nodes, dataset_id, method_id, predict);
  report.seeds = {split.seed};
  report.runtime_seconds = seconds_since(t0);
  return report;
}

EvalReport run_0hop(const TAGraph& graph, const graphdata::Split& split,
                    const lm::FrozenLM& lm, pipeline::DatasetKind kind,
                    const std::string& dataset_id, const Tensor& h0) {
  pipeline::PromptTemplate tmpl;
  tmpl.kind = kind;
  tmpl.include_neighbor_segment = false;
  return evaluate_method(graph, split, lm, nullptr, tmpl, dataset_id, "0hop", h0);
}

EvalReport run_wo_disen(const TAGraph& graph, const graphdata::Split& split,
                        const lm::FrozenLM& lm,
                        const pipeline::PromptTemplate& tmpl,
                        pipeline::TrainConfig cfg, const std::string& dataset_id,
                        const Tensor& h0) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.delta = 1.0;  // every channel sees the binary adjacency
  const auto trained = pipeline::train_dgtl(graph, split, lm, tmpl, cfg, &h0);
  EvalReport report = evaluate_method(graph, split, lm, &trained.params, tmpl,
                                      dataset_id, "wo_disen", h0);
  report.seeds = {cfg.seed};
  report.runtime_seconds = seconds_since(t0);
  return report;
}

EvalReport run_gcn_reference(const TAGraph& graph, const graphdata::Split& split,
                             const GcnConfig& cfg, const std::string& dataset_id) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = graph.node_count();
  const int n_classes = static_cast<int>(graph.categories().size());

  // Bag-of-words features over the node texts (sorted vocabulary).
  std::map<std::string, int> word_index;
  for (const auto& text : graph.texts()) {
    std::istringstream is(text);
    std::string w;
    while (is >> w) word_index.emplace(w, 0);
  }
  int dim = 0;
  for (auto& [word, idx] : word_index) idx = dim++;
  Tensor x = Tensor::zeros({n, dim});
  {
    auto& xv = x.mutable_values();
    for (int u = 0; u < n; ++u) {
      std::istringstream is(graph.text(u));
      std::string w;
      while (is >> w) xv[static_cast<std::size_t>(u) * dim + word_index[w]] += 1.0;
    }
  }

  const auto edges = graphdata::DirectedEdges::from(graph);
  const Tensor ones = gnn::binary_edge_weights(edges);
  Rng rng(derive_seed(cfg.seed, "gcn_init"));
  auto gaussian = [&rng](Shape shape, double stddev) {
    std::vector<double> v(shape_numel(shape));
    for (auto& val : v) val = rng.gaussian(0.0, stddev);
    return Tensor::from(std::move(shape), std::move(v), true);
  };
  Tensor w1 = gaussian({dim, cfg.hidden_dim}, 1.0 / std::sqrt(dim));
  Tensor b1 = Tensor::zeros({cfg.hidden_dim}, true);
  Tensor w2 = gaussian({cfg.hidden_dim, n_classes}, 1.0 / std::sqrt(cfg.hidden_dim));
  Tensor b2 = Tensor::zeros({n_classes}, true);
  std::vector<Tensor> params = {w1, b1, w2, b2};

  std::vector<int> train_labels;
  for (int u : split.train_nodes) {
    if (graph.label(u) < 0) throw ValueError("train node is unlabeled");
    train_labels.push_back(graph.label(u));
  }

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  AdamState adam(adam_cfg);
  auto logits_all = [&]() {
    Tensor h1 = gnn::gnn_layer(x, edges, ones, w1, b1);
    Tensor m2 = edges.count() == 0
                    ? h1
                    : weighted_mean_aggregate(h1, ones, edges.dst, edges.src);
    return add_bias(matmul(m2, w2), b2);
  };
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    {
      TapeScope scope(tape);
      Tensor logits = gather_rows(logits_all(), split.train_nodes);
      tape.backward(cross_entropy(logits, train_labels));
    }
    adam.step(params);
    for (auto& p : params) p.zero_grad();
  }

  TapePause pause;
  const Tensor logits = logits_all();
  auto predict = [&](int u) {
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (logits.at(u, c) > logits.at(u, best)) best = c;
    }
    return best;
  };
  EvalReport report =
      count_predictions(graph, split.test_nodes, dataset_id, "gcn", predict);
  report.seeds = {cfg.seed};
  report.runtime_seconds = seconds_since(t0);
  return report;
}

}  // namespace dgtl::eval
