#include "dgtl/pipeline/prompt.hpp"

#include "dgtl/errors.hpp"

namespace dgtl::pipeline {

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Citation: return "citation";
    case DatasetKind::Ecommerce: return "ecommerce";
    case DatasetKind::Synthetic: return "synthetic";
  }
  return "synthetic";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
  if (name == "citation") return DatasetKind::Citation;
  if (name == "ecommerce") return DatasetKind::Ecommerce;
  if (name == "synthetic") return DatasetKind::Synthetic;
  throw ConfigError("unknown dataset kind '" + name + "'");
}

std::string PromptTemplate::prefix() const {
  switch (kind) {
    case DatasetKind::Citation: return "here is a paper title and abstract :";
    case DatasetKind::Ecommerce: return "here is a book description and title :";
    case DatasetKind::Synthetic: return "here is a node description :";
  }
  return {};
}

std::string PromptTemplate::infix() const {
  switch (kind) {
    case DatasetKind::Citation:
      return ". some information about the references cited in this paper :";
    case DatasetKind::Ecommerce:
      return ". some information about the books frequently purchased together :";
    case DatasetKind::Synthetic:
      return ". some information about the neighbors of this node :";
  }
  return {};
}

std::string PromptTemplate::category_intro() const {
  return ". task : there are following categories :";
}

std::string PromptTemplate::question() const {
  switch (kind) {
    case DatasetKind::Citation:
      return ". which category does this paper belong to ? output the most 1 "
             "possible category of this paper .";
    case DatasetKind::Ecommerce:
      return ". which category does this book belong to ? output the most 1 "
             "possible category of this book .";
    case DatasetKind::Synthetic:
      return ". which category does this node belong to ? output the most 1 "
             "possible category of this node .";
  }
  return {};
}

std::string PromptTemplate::response_template() const {
  switch (kind) {
    case DatasetKind::Citation:
      return "based on the content of the paper , the most appropriate category "
             "for this paper would be";
    case DatasetKind::Ecommerce:
      return "based on the information of the book , the most appropriate "
             "category for this book would be";
    case DatasetKind::Synthetic:
      return "based on the content of the node , the most appropriate category "
             "for this node would be";
  }
  return {};
}

std::string PromptTemplate::placeholder_fill() const {
  std::string fill;
  for (int i = 0; i < reserved_slots; ++i) {
    if (i) fill += ' ';
    fill += "<nb>";
  }
  return fill;
}

std::string PromptTemplate::render_text(
    const std::string& node_text, const std::string& neighbor_fill,
    const std::vector<std::string>& categories) const {
  std::string cats;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (i) cats += " ,";
    cats += ' ' + categories[i];
  }
  std::string out = prefix() + ' ' + node_text;
  if (include_neighbor_segment) out += ' ' + infix() + ' ' + neighbor_fill;
  out += ' ' + category_intro() + cats + ' ' + question() + ' ' + response_template();
  return out;
}

PromptPlan build_prompt(const graphdata::TAGraph& graph, int u,
                        const PromptTemplate& tmpl, const lm::Vocabulary& vocab,
                        int max_positions) {
  if (tmpl.reserved_slots < 1 && tmpl.include_neighbor_segment) {
    throw ConfigError("prompt template needs at least one reserved slot");
  }
  PromptPlan plan;
  std::vector<int> ids = vocab.tokenize(tmpl.prefix());
  std::vector<int> text_ids = vocab.tokenize(graph.text(u));

  // Everything after the node text has a fixed token count; compute it to
  // find the text budget (one position stays free for the label token).
  std::vector<int> tail;
  std::vector<int> infix_ids;
  if (tmpl.include_neighbor_segment) infix_ids = vocab.tokenize(tmpl.infix());
  std::string cats;
  for (std::size_t i = 0; i < graph.categories().size(); ++i) {
    if (i) cats += " , ";
    cats += graph.categories()[i];
  }
  const std::vector<int> cat_ids = vocab.tokenize(tmpl.category_intro() + ' ' + cats);
  const std::vector<int> question_ids = vocab.tokenize(tmpl.question());
  const std::vector<int> response_ids = vocab.tokenize(tmpl.response_template());

  const int fixed =
      static_cast<int>(ids.size() + infix_ids.size() + cat_ids.size() +
                       question_ids.size() + response_ids.size()) +
      (tmpl.include_neighbor_segment ? tmpl.reserved_slots : 0);
  const int budget = max_positions - 1 - fixed;
  if (budget < 1) {
    throw ConfigError("prompt template alone overflows the context window (" +
                      std::to_string(fixed) + " tokens, max " +
                      std::to_string(max_positions) + ")");
  }
  if (static_cast<int>(text_ids.size()) > budget) text_ids.resize(budget);

  ids.insert(ids.end(), text_ids.begin(), text_ids.end());
  if (tmpl.include_neighbor_segment) {
    ids.insert(ids.end(), infix_ids.begin(), infix_ids.end());
    for (int k = 0; k < tmpl.reserved_slots; ++k) {
      plan.reserved_positions.push_back(static_cast<int>(ids.size()));
      ids.push_back(lm::Vocabulary::kNb);
    }
  }
  ids.insert(ids.end(), cat_ids.begin(), cat_ids.end());
  ids.insert(ids.end(), question_ids.begin(), question_ids.end());
  ids.insert(ids.end(), response_ids.begin(), response_ids.end());

  plan.ids = std::move(ids);
  plan.label_position = static_cast<int>(plan.ids.size());
  const int label = graph.label(u);
  plan.label_token_id =
      label < 0 ? -1 : vocab.category_token(graph.categories()[label]);
  return plan;
}

}  // namespace dgtl::pipeline
