#pragma once

#include <string>
#include <vector>

#include "dgtl/graphdata/tag.hpp"
#include "dgtl/lm/vocabulary.hpp"

namespace dgtl::pipeline {

enum class DatasetKind { Citation, Ecommerce, Synthetic };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& name);

// Prompt skeleton for one dataset family. The rendered prompt is
//   prefix | node text | infix | K reserved slots | category intro |
//   category list | question | response template
// and the supervised label token sits immediately after the response
// template. include_neighbor_segment=false removes the infix and the
// reserved slots entirely (the 0-hop prompt).
struct PromptTemplate {
  DatasetKind kind = DatasetKind::Synthetic;
  int reserved_slots = 8;
  bool include_neighbor_segment = true;

  std::string prefix() const;
  std::string infix() const;
  std::string category_intro() const;
  std::string question() const;
  std::string response_template() const;

  // Full prompt as plain text, with the neighbor segment filled by
  // `neighbor_fill` (usually a run of "<nb>" placeholders or keywords).
  // Used verbatim by the pretraining corpus so prompts tokenize the same
  // way at pretraining and fine-tuning time.
  std::string render_text(const std::string& node_text,
                          const std::string& neighbor_fill,
                          const std::vector<std::string>& categories) const;
  std::string placeholder_fill() const;  // reserved_slots times "<nb>"
};

struct PromptPlan {
  std::vector<int> ids;
  std::vector<int> reserved_positions;  // K consecutive indices
  int label_position = 0;               // == ids.size()
  int label_token_id = -1;              // -1 when the node is unlabeled
};

// Tokenizes the template around the node text, truncating only the text
// to honor max_positions (one slot is kept free for the label token).
PromptPlan build_prompt(const graphdata::TAGraph& graph, int u,
                        const PromptTemplate& tmpl, const lm::Vocabulary& vocab,
                        int max_positions);

}  // namespace dgtl::pipeline
