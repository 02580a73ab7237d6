#include "dgtl/graphdata/synthetic.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/rng.hpp"

namespace dgtl::graphdata {

namespace {

using numerics::Rng;
using numerics::derive_seed;

constexpr int kKeywordsPerClass = 8;

// Deterministic pronounceable cvcv word for index i; distinct for i < 980.
std::string synth_word(int i) {
  static const char* cons[] = {"b", "d", "f", "g", "k", "l", "m",
                               "n", "p", "r", "s", "t", "v", "z"};
  static const char* vow[] = {"a", "e", "i", "o", "u"};
  std::string w;
  w += cons[i % 14];
  w += vow[(i / 14) % 5];
  w += cons[(i / 70) % 14];
  w += vow[(i / 980) % 5];
  return w;
}

int majority_class(const std::vector<int>& counts) {
  int best = -1, best_count = 0;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
    if (counts[c] > best_count) {
      best_count = counts[c];
      best = c;
    }
  }
  return best;
}

std::string render_text(Rng& rng, const std::string& keyword,
                        const std::string* group) {
  const auto fillers = filler_words();
  const std::string f1 = fillers[rng.index(fillers.size())];
  const std::string f2 = fillers[rng.index(fillers.size())];
  std::ostringstream os;
  os << "this node concerns " << keyword;
  if (group) os << " in circle " << *group;
  os << " with " << f1 << " and " << f2 << " aspects";
  return os.str();
}

void plant_partition_edges(Rng& rng, const std::vector<int>& part, int n_parts,
                           double avg_degree, double within_share,
                           std::set<std::pair<int, int>>& edges) {
  const int n = static_cast<int>(part.size());
  const double part_size = static_cast<double>(n) / n_parts;
  const double p_in = std::min(1.0, within_share * avg_degree / std::max(1.0, part_size - 1.0));
  const double p_out =
      std::min(1.0, (1.0 - within_share) * avg_degree / std::max(1.0, n - part_size));
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const double p = part[u] == part[v] ? p_in : p_out;
      if (rng.uniform() < p) edges.insert({u, v});
    }
  }
}

void connect_isolated(Rng& rng, int n, std::set<std::pair<int, int>>& edges) {
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (auto [u, v] : edges) {
    ++degree[u];
    ++degree[v];
  }
  for (int u = 0; u < n; ++u) {
    if (degree[u] > 0) continue;
    int v = u;
    while (v == u) v = rng.uniform_int(n);
    edges.insert({std::min(u, v), std::max(u, v)});
    ++degree[u];
    ++degree[v];
  }
}

}  // namespace

std::vector<std::string> category_names(int n_classes) {
  static const char* greek[] = {"alpha", "beta",  "gamma", "delta",
                                "epsilon", "zeta", "eta",   "theta",
                                "iota",  "kappa", "lambda", "mu"};
  std::vector<std::string> out;
  for (int c = 0; c < n_classes; ++c) {
    if (c < 12) {
      out.emplace_back(greek[c]);
    } else {
      out.push_back("category" + std::to_string(c));
    }
  }
  return out;
}

std::vector<std::vector<std::string>> class_keywords(int n_classes) {
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    for (int j = 0; j < kKeywordsPerClass; ++j) {
      out[c].push_back(synth_word(c * kKeywordsPerClass + j));
    }
  }
  return out;
}

std::vector<std::string> filler_words() {
  return {"gentle", "rapid",  "steady", "subtle", "broad",  "narrow",
          "formal", "playful", "somber", "vivid",  "plain",  "ornate"};
}

std::vector<std::string> group_tokens() {
  // Outside the keyword index range for any supported class count.
  return {synth_word(900), synth_word(901)};
}

int keyword_class_of_text(const std::string& text, int n_classes) {
  static std::unordered_map<int, std::unordered_map<std::string, int>> cache;
  auto& table = cache[n_classes];
  if (table.empty()) {
    const auto kws = class_keywords(n_classes);
    for (int c = 0; c < n_classes; ++c) {
      for (const auto& w : kws[c]) table[w] = c;
    }
  }
  std::istringstream is(text);
  std::string word;
  while (is >> word) {
    const auto it = table.find(word);
    if (it != table.end()) return it->second;
  }
  return -1;
}

int neighbor_keyword_majority(const TAGraph& graph, int u, int n_classes) {
  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (int v : graph.neighbors(u)) {
    const int c = keyword_class_of_text(graph.text(v), n_classes);
    if (c >= 0) ++counts[c];
  }
  return majority_class(counts);
}

namespace {

// Wires each node toward a target keyword class so that its neighbor
// majority lands on the target with margin >= 2. Nodes whose own keyword
// and target coincide double as hubs; patching keeps every node's majority
// exact despite hub pollution. Edges are collected symmetrically.
class TargetedWiring {
 public:
  TargetedWiring(int n, int n_classes, const std::vector<int>& kclass,
                 const std::vector<int>& targets)
      : n_(n), c_(n_classes), kclass_(kclass), targets_(targets),
        adjacency_(static_cast<std::size_t>(n)) {}

  void restrict_to_group(const std::vector<int>* group) { group_ = group; }

  const std::set<std::pair<int, int>>& edges() const { return edge_set_; }

  void connect(int u, int v) {
    if (u == v) return;
    if (edge_set_.insert({std::min(u, v), std::max(u, v)}).second) {
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
  }

  // Pool of wiring candidates for a node aiming at `cls`: nodes whose own
  // keyword is of that class and whose target matches it, so their own
  // neighborhoods reinforce the signal two hops out.
  std::vector<int> pool_for(int u, int cls) const {
    std::vector<int> pool;
    for (int v = 0; v < n_; ++v) {
      if (v == u || kclass_[v] != cls || targets_[v] != cls) continue;
      if (group_ && (*group_)[v] != (*group_)[u]) continue;
      pool.push_back(v);
    }
    return pool;
  }

  void wire(Rng& rng, int draws, double purity) {
    for (int u = 0; u < n_; ++u) {
      const auto pool = pool_for(u, targets_[u]);
      for (int d = 0; d < draws; ++d) {
        if (!pool.empty() && rng.uniform() < purity) {
          connect(u, pool[rng.index(pool.size())]);
        } else if (!group_) {
          connect(u, rng.uniform_int(n_));
        } else {
          int v = rng.uniform_int(n_);
          if ((*group_)[v] == (*group_)[u]) connect(u, v);
        }
      }
    }
  }

  // Adds targeted edges until majority(kclass of neighbors) == target with
  // the given margin. Throws when the candidate pool runs dry first.
  void patch_majorities(Rng& rng, int margin) {
    for (int u = 0; u < n_; ++u) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        if (margin_ok(u, margin)) break;
        auto pool = pool_for(u, targets_[u]);
        std::vector<int> fresh;
        for (int v : pool) {
          if (!edge_set_.count({std::min(u, v), std::max(u, v)})) fresh.push_back(v);
        }
        if (fresh.empty()) {
          throw ValueError(
              "majority construction infeasible: no wiring candidates left for node " +
              std::to_string(u));
        }
        connect(u, fresh[rng.index(fresh.size())]);
      }
      if (!margin_ok(u, margin)) {
        throw ValueError("majority construction infeasible at node " + std::to_string(u));
      }
    }
  }

  std::vector<int> neighbor_majorities(const std::vector<int>* group_filter) const {
    std::vector<int> labels(static_cast<std::size_t>(n_));
    for (int u = 0; u < n_; ++u) {
      std::vector<int> counts(static_cast<std::size_t>(c_), 0);
      for (int v : adjacency_[u]) {
        if (group_filter && (*group_filter)[v] != (*group_filter)[u]) continue;
        ++counts[kclass_[v]];
      }
      labels[u] = majority_class(counts);
    }
    return labels;
  }

 private:
  bool margin_ok(int u, int margin) const {
    std::vector<int> counts(static_cast<std::size_t>(c_), 0);
    for (int v : adjacency_[u]) {
      if (group_ && (*group_)[v] != (*group_)[u]) continue;
      ++counts[kclass_[v]];
    }
    const int target_count = counts[targets_[u]];
    int best_other = 0;
    for (int cls = 0; cls < c_; ++cls) {
      if (cls != targets_[u]) best_other = std::max(best_other, counts[cls]);
    }
    return target_count >= best_other + margin;
  }

  int n_, c_;
  const std::vector<int>& kclass_;
  const std::vector<int>& targets_;
  const std::vector<int>* group_ = nullptr;
  std::set<std::pair<int, int>> edge_set_;
  std::vector<std::vector<int>> adjacency_;
};

std::vector<int> balanced_targets(Rng& rng, int n, int c) {
  std::vector<int> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[i] = i % c;
  rng.shuffle(t);
  return t;
}

}  // namespace

TAGraph gen_synthetic_tag(const SyntheticSpec& spec) {
  if (spec.n_classes < 2) throw ValueError("synthetic graph needs at least 2 classes");
  if (spec.avg_degree < 2.0) throw ValueError("synthetic graph needs avg_degree >= 2");
  if (spec.n_nodes < 4 * spec.n_classes) {
    throw ValueError("too few nodes for " + std::to_string(spec.n_classes) + " classes");
  }
  if (spec.keyword_purity < 0.0 || spec.keyword_purity > 1.0) {
    throw ValueError("keyword_purity must lie in [0,1]");
  }
  const int n = spec.n_nodes, c = spec.n_classes;
  Rng rng(derive_seed(spec.seed, "synthetic"));
  const auto keywords = class_keywords(c);

  if (spec.mode == SyntheticMode::TextInformative) {
    // Balanced labels, community-planted edges along the labels, keyword
    // from the node's own class with probability keyword_purity.
    std::vector<int> part(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) part[i] = i % c;
    rng.shuffle(part);

    std::set<std::pair<int, int>> edge_set;
    plant_partition_edges(rng, part, c, spec.avg_degree, 0.8, edge_set);
    connect_isolated(rng, n, edge_set);

    std::vector<std::string> texts(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
      const int kc = rng.uniform() < spec.keyword_purity ? part[u] : rng.uniform_int(c);
      const auto& pool = keywords[kc];
      texts[u] = render_text(rng, pool[rng.index(pool.size())], nullptr);
    }
    std::vector<std::pair<int, int>> edges(edge_set.begin(), edge_set.end());
    return TAGraph::build(std::move(texts), std::move(edges), std::move(part),
                          category_names(c));
  }

  // StructureOnly: uniform own keywords, targeted wiring, label = exact
  // neighbor keyword-class majority (forced to the target with margin 2).
  std::vector<int> kclass(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) kclass[u] = rng.uniform_int(c);
  const auto targets = balanced_targets(rng, n, c);

  TargetedWiring wiring(n, c, kclass, targets);
  const int draws = std::max(2, static_cast<int>(std::lround(spec.avg_degree / 2.0)));
  wiring.wire(rng, draws, 0.85);
  wiring.patch_majorities(rng, 2);

  std::vector<std::string> texts(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    const auto& pool = keywords[kclass[u]];
    texts[u] = render_text(rng, pool[rng.index(pool.size())], nullptr);
  }
  std::vector<int> labels = wiring.neighbor_majorities(nullptr);
  std::vector<std::pair<int, int>> edges(wiring.edges().begin(), wiring.edges().end());
  return TAGraph::build(std::move(texts), std::move(edges), std::move(labels),
                        category_names(c));
}

TAGraph gen_two_relation_tag(const TwoRelationSpec& spec) {
  if (spec.n_classes < 2) throw ValueError("two-relation graph needs at least 2 classes");
  if (spec.avg_degree_same < 2.0) {
    throw ValueError("two-relation graph needs avg_degree_same >= 2");
  }
  if (spec.n_nodes < 16 * spec.n_classes) {
    throw ValueError("too few nodes for the two-relation construction");
  }
  const int n = spec.n_nodes, c = spec.n_classes;
  Rng rng(derive_seed(spec.seed, "two_relation"));
  const auto keywords = class_keywords(c);
  const auto groups = group_tokens();

  std::vector<int> group(static_cast<std::size_t>(n));
  std::vector<int> kclass(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    group[u] = rng.uniform_int(2);
    kclass[u] = rng.uniform_int(c);
  }
  const auto targets = balanced_targets(rng, n, c);

  // Same-group relation, wired and patched exactly like StructureOnly but
  // inside each group; the label is the same-group neighbor majority.
  TargetedWiring wiring(n, c, kclass, targets);
  wiring.restrict_to_group(&group);
  const int draws_same =
      std::max(2, static_cast<int>(std::lround(spec.avg_degree_same / 2.0)));
  wiring.wire(rng, draws_same, 0.85);
  wiring.patch_majorities(rng, 2);

  // Cross-group confounders: aimed at keyword class (target + 1) mod c in
  // the other group, at nodes whose own targets reinforce that class.
  const int draws_cross =
      std::max(1, static_cast<int>(std::lround(spec.avg_degree_cross / 2.0)));
  for (int u = 0; u < n; ++u) {
    const int conf = (targets[u] + 1) % c;
    std::vector<int> pool;
    for (int v = 0; v < n; ++v) {
      if (group[v] != group[u] && kclass[v] == conf && targets[v] == conf) {
        pool.push_back(v);
      }
    }
    if (pool.empty()) {
      throw ValueError("two-relation construction infeasible: empty confounder pool");
    }
    for (int d = 0; d < draws_cross; ++d) {
      wiring.connect(u, pool[rng.index(pool.size())]);
    }
  }

  std::vector<std::string> texts(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    const auto& pool = keywords[kclass[u]];
    texts[u] = render_text(rng, pool[rng.index(pool.size())], &groups[group[u]]);
  }
  std::vector<int> labels = wiring.neighbor_majorities(&group);
  std::vector<std::pair<int, int>> edges(wiring.edges().begin(), wiring.edges().end());
  return TAGraph::build(std::move(texts), std::move(edges), std::move(labels),
                        category_names(c));
}

}  // namespace dgtl::graphdata
