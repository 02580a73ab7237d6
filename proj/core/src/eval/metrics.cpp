#include "dgtl/eval/metrics.hpp"

#include <algorithm>
#include <cctype>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/tape.hpp"

namespace dgtl::eval {

namespace {

std::string lowercased(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string first_sentence(const std::string& s) {
  const auto dot = s.find('.');
  return dot == std::string::npos ? s : s.substr(0, dot + 1);
}

}  // namespace

int predict_node(const graphdata::TAGraph& graph, int u, const lm::FrozenLM& lm,
                 const gnn::DisentangledParams* params,
                 const pipeline::PromptTemplate& tmpl,
                 const numerics::Tensor& h0) {
  return pipeline::predict_category(graph, u, lm, params, tmpl, h0);
}

double exact_match(std::span<const std::string> generations,
                   std::span<const std::string> gold_labels) {
  if (generations.size() != gold_labels.size()) {
    throw ValueError("exact_match: " + std::to_string(generations.size()) +
                     " generations vs " + std::to_string(gold_labels.size()) +
                     " gold labels");
  }
  if (generations.empty()) return 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < generations.size(); ++i) {
    const std::string hay = lowercased(first_sentence(generations[i]));
    const std::string needle = lowercased(gold_labels[i]);
    if (!needle.empty() && hay.find(needle) != std::string::npos) ++hits;
  }
  return 100.0 * hits / static_cast<double>(generations.size());
}

std::string explain(const graphdata::TAGraph& graph, int u,
                    const lm::FrozenLM& lm,
                    const gnn::DisentangledParams* params,
                    const pipeline::PromptTemplate& tmpl,
                    const numerics::Tensor& h0, int max_tokens) {
  numerics::TapePause pause;
  const auto plan = pipeline::build_prompt(graph, u, tmpl, lm.vocab(),
                                           lm.config().max_positions - max_tokens);
  std::vector<int> out_ids;
  if (params && !plan.reserved_positions.empty()) {
    const auto edges = graphdata::DirectedEdges::from(graph);
    const auto outputs = gnn::channel_forward_all(*params, h0, edges);
    lm::InjectionMap inj;
    inj.positions = plan.reserved_positions;
    inj.vectors = gnn::injection_rows_for_node(*params, outputs, u);
    out_ids = lm::generate(lm, plan.ids, &inj, max_tokens);
  } else {
    out_ids = lm::generate(lm, plan.ids, nullptr, max_tokens);
  }
  return lm.vocab().detokenize(out_ids);
}

}  // namespace dgtl::eval
