#include <gtest/gtest.h>

#include <cmath>

#include "dgtl/errors.hpp"
#include "dgtl/graphdata/synthetic.hpp"
#include "dgtl/numerics/adam.hpp"
#include "dgtl/numerics/ops.hpp"
#include "dgtl/numerics/precision.hpp"
#include "dgtl/numerics/rng.hpp"
#include "dgtl/numerics/tape.hpp"
#include "dgtl/pipeline/corpus.hpp"
#include "dgtl/pipeline/pretrain.hpp"
#include "dgtl/pipeline/prompt.hpp"
#include "dgtl/pipeline/train.hpp"
#include "support/fixtures.hpp"

using namespace dgtl;
using namespace dgtl::pipeline;
using namespace dgtl::numerics;
using dgtl::graphdata::TAGraph;
using dgtl::testing::make_test_lm;

namespace {

TAGraph tiny_labeled_graph(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> texts;
  std::vector<std::pair<int, int>> edges;
  const char* words[] = {"quick", "brown", "fox", "lazy", "dog", "paper", "graph"};
  for (int u = 0; u < n; ++u) {
    texts.push_back(std::string("a paper about ") + words[rng.uniform_int(7)] +
                    " " + words[rng.uniform_int(7)]);
  }
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.uniform() < 0.3) edges.emplace_back(u, v);
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) labels[u] = rng.uniform_int(2);
  return TAGraph::build(std::move(texts), std::move(edges), std::move(labels),
                        {"rule learning", "theory"});
}

PromptTemplate tmpl_with_slots(int k) {
  PromptTemplate t;
  t.kind = DatasetKind::Citation;
  t.reserved_slots = k;
  return t;
}

}  // namespace

TEST(PromptTest, ReservedSlotsAreConsecutiveNbTokens) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(4, 1);
  const auto plan = build_prompt(g, 0, tmpl_with_slots(8), model.vocab(), 256);
  ASSERT_EQ(plan.reserved_positions.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    if (i) EXPECT_EQ(plan.reserved_positions[i], plan.reserved_positions[i - 1] + 1);
    EXPECT_EQ(plan.ids[plan.reserved_positions[i]], lm::Vocabulary::kNb);
  }
  int nb_count = 0;
  for (int id : plan.ids) nb_count += id == lm::Vocabulary::kNb;
  EXPECT_EQ(nb_count, 8);
  EXPECT_EQ(plan.label_position, static_cast<int>(plan.ids.size()));
}

TEST(PromptTest, CategoriesRenderedInOrder) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(4, 2);
  const auto plan = build_prompt(g, 0, tmpl_with_slots(2), model.vocab(), 256);
  const int cat0 = model.vocab().category_token("rule learning");
  const int cat1 = model.vocab().category_token("theory");
  const auto pos0 = std::find(plan.ids.begin(), plan.ids.end(), cat0);
  const auto pos1 = std::find(plan.ids.begin(), plan.ids.end(), cat1);
  ASSERT_NE(pos0, plan.ids.end());
  ASSERT_NE(pos1, plan.ids.end());
  EXPECT_LT(pos0 - plan.ids.begin(), pos1 - plan.ids.begin());
}

TEST(PromptTest, IdenticalTextsGiveIdenticalPlans) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  TAGraph g = TAGraph::build({"same words here", "same words here"}, {{0, 1}},
                             {0, 0}, {"rule learning", "theory"});
  const auto a = build_prompt(g, 0, tmpl_with_slots(3), model.vocab(), 256);
  const auto b = build_prompt(g, 1, tmpl_with_slots(3), model.vocab(), 256);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(a.reserved_positions, b.reserved_positions);
  EXPECT_EQ(a.label_position, b.label_position);
  EXPECT_EQ(a.label_token_id, b.label_token_id);
}

TEST(PromptTest, LongTextTruncatedTemplatePreserved) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  std::string long_text = "fox";
  for (int i = 0; i < 500; ++i) long_text += " fox";
  TAGraph g = TAGraph::build({long_text}, {}, {0}, {"rule learning", "theory"});
  const auto tmpl = tmpl_with_slots(2);
  const auto plan = build_prompt(g, 0, tmpl, model.vocab(), 128);
  EXPECT_LE(plan.ids.size(), 127u);
  const auto response_ids = model.vocab().tokenize(tmpl.response_template());
  ASSERT_GE(plan.ids.size(), response_ids.size());
  const std::vector<int> tail(plan.ids.end() - response_ids.size(), plan.ids.end());
  EXPECT_EQ(tail, response_ids);
}

TEST(PromptTest, TemplateOverflowRejected) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(2, 3);
  EXPECT_THROW(build_prompt(g, 0, tmpl_with_slots(2), model.vocab(), 16), ConfigError);
}

TEST(PromptTest, ZeroHopPromptHasNoReservedSlots) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(3, 4);
  PromptTemplate t = tmpl_with_slots(4);
  t.include_neighbor_segment = false;
  const auto plan = build_prompt(g, 0, t, model.vocab(), 256);
  EXPECT_TRUE(plan.reserved_positions.empty());
  for (int id : plan.ids) EXPECT_NE(id, lm::Vocabulary::kNb);
}

TEST(FirstTokenLossTest, UniformLogitsGiveLogVocab) {
  PrecisionGuard guard(Precision::Float64);
  const Tensor logits = Tensor::zeros({1, 512});
  const Tensor loss = first_token_loss(logits, 17);
  EXPECT_NEAR(loss.values()[0], std::log(512.0), 1e-9);
  EXPECT_NEAR(loss.values()[0], 6.238, 1e-3);
}

TEST(FirstTokenLossTest, CertainPredictionGivesZero) {
  PrecisionGuard guard(Precision::Float64);
  Tensor logits = Tensor::zeros({1, 8});
  logits.mutable_values()[3] = 100.0;
  const Tensor loss = first_token_loss(logits, 3);
  EXPECT_NEAR(loss.values()[0], 0.0, 1e-9);
}

TEST(FirstTokenLossTest, EquivalentToMaskedSequenceCrossEntropy) {
  PrecisionGuard guard(Precision::Float64);
  Rng rng(5);
  std::vector<double> v(3 * 16);
  for (auto& x : v) x = rng.gaussian();
  const Tensor logits = Tensor::from({3, 16}, std::move(v));
  // Sequence-style loss with exactly one active position equals the
  // single-position loss on that row.
  const std::vector<int> targets = {0, 9, 0};
  const std::vector<std::uint8_t> active = {0, 1, 0};
  const Tensor seq = cross_entropy(logits, targets, &active);
  const Tensor one = first_token_loss(slice_rows(logits, 1, 2), 9);
  EXPECT_NEAR(seq.values()[0], one.values()[0], 1e-12);
}

TEST(NodeForwardTest, ZeroProjectionEqualsPlainForward) {
  PrecisionGuard guard(Precision::Float64);
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(6, 7);
  const Tensor h0 = build_h0_cache(model, g);
  auto params = gnn::DisentangledParams::init(2, model.config().model_dim, 4,
                                              model.config().model_dim, 0.8, 3);
  for (auto& c : params.channels) {
    std::fill(c.p.mutable_values().begin(), c.p.mutable_values().end(), 0.0);
  }
  const auto tmpl = tmpl_with_slots(2);
  const Tensor with = node_forward(g, 1, model, &params, tmpl, h0);
  const Tensor without = node_forward(g, 1, model, nullptr, tmpl, h0);
  for (std::size_t i = 0; i < with.size(); ++i) {
    EXPECT_NEAR(with.values()[i], without.values()[i], 1e-9);
  }
}

TEST(NodeForwardTest, DeterministicUnderFixedInputs) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(6, 9);
  const Tensor h0 = build_h0_cache(model, g);
  auto params = gnn::DisentangledParams::init(2, model.config().model_dim, 4,
                                              model.config().model_dim, 0.8, 3);
  const auto tmpl = tmpl_with_slots(2);
  const Tensor a = node_forward(g, 2, model, &params, tmpl, h0);
  const Tensor b = node_forward(g, 2, model, &params, tmpl, h0);
  EXPECT_EQ(a.values(), b.values());
}

TEST(NodeForwardTest, LossGradientReachesAllParameterKinds) {
  PrecisionGuard guard(Precision::Float64);
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(6, 11);
  const Tensor h0 = build_h0_cache(model, g);
  auto params = gnn::DisentangledParams::init(2, model.config().model_dim, 4,
                                              model.config().model_dim, 0.8, 5);
  const auto tmpl = tmpl_with_slots(2);
  Tape tape;
  {
    TapeScope scope(tape);
    const Tensor logits = node_forward(g, 1, model, &params, tmpl, h0);
    const auto plan = build_prompt(g, 1, tmpl, model.vocab(), 256);
    tape.backward(first_token_loss(logits, plan.label_token_id));
  }
  auto all = params.parameters();
  for (auto& p : all) {
    ASSERT_TRUE(p.has_grad());
    double norm = 0.0;
    for (double x : p.grad_view()) norm += x * x;
    EXPECT_GT(norm, 0.0);
  }
}

TEST(H0CacheTest, RowsEqualEmbedText) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary);
  const TAGraph g = tiny_labeled_graph(5, 13);
  const Tensor h0 = build_h0_cache(model, g);
  ASSERT_EQ(h0.shape(), (Shape{5, model.config().model_dim}));
  for (int u = 0; u < 5; ++u) {
    const Tensor e = lm::embed_text(model, g.text(u));
    for (int j = 0; j < model.config().model_dim; ++j) {
      EXPECT_DOUBLE_EQ(h0.at(u, j), e.at(static_cast<std::size_t>(j)));
    }
  }
}

TEST(CorpusTest, SyntheticCorpusCoversPromptAndTeachesKeywords) {
  graphdata::SyntheticSpec spec;
  spec.n_nodes = 40;
  spec.n_classes = 2;
  spec.mode = graphdata::SyntheticMode::StructureOnly;
  spec.avg_degree = 4;
  spec.seed = 3;
  const TAGraph g = graphdata::gen_synthetic_tag(spec);
  PromptTemplate tmpl;
  tmpl.kind = DatasetKind::Synthetic;
  tmpl.reserved_slots = 4;
  const auto corpus = build_pretrain_corpus(g, tmpl, 1);

  const auto vocab = lm::Vocabulary::build(corpus, g.categories(), {}, 2048);
  const auto plan_ids =
      vocab.tokenize(tmpl.render_text(g.text(0), tmpl.placeholder_fill(), g.categories()));
  for (int id : plan_ids) EXPECT_NE(id, lm::Vocabulary::kUnk);

  bool has_nb_line = false, has_teach_line = false;
  for (const auto& line : corpus) {
    if (line.find("<nb>") != std::string::npos) has_nb_line = true;
    if (line.find("the category for a node about") != std::string::npos) {
      has_teach_line = true;
    }
  }
  EXPECT_TRUE(has_nb_line);
  EXPECT_TRUE(has_teach_line);
}

TEST(PretrainTest, LossDropsAndModelFreezes) {
  graphdata::SyntheticSpec spec;
  spec.n_nodes = 30;
  spec.n_classes = 2;
  spec.mode = graphdata::SyntheticMode::TextInformative;
  spec.avg_degree = 4;
  spec.seed = 5;
  const TAGraph g = graphdata::gen_synthetic_tag(spec);
  PromptTemplate tmpl;
  tmpl.kind = DatasetKind::Synthetic;
  tmpl.reserved_slots = 2;
  const auto corpus = build_pretrain_corpus(g, tmpl, 2);

  PretrainConfig cfg;
  cfg.lm.n_layers = 1;
  cfg.lm.n_heads = 2;
  cfg.lm.model_dim = 16;
  cfg.lm.mlp_dim = 32;
  cfg.lm.max_positions = 96;
  cfg.steps = 300;
  cfg.batch_size = 4;
  cfg.block_size = 48;
  cfg.seed = 7;
  const auto result = pretrain_lm(corpus, g.categories(), {}, cfg);
  EXPECT_LT(result.final_loss, 0.8 * result.initial_loss);
  EXPECT_TRUE(result.model.frozen());
  // Category names tokenize to single dedicated tokens.
  for (const auto& cat : g.categories()) {
    EXPECT_EQ(result.model.vocab().tokenize(cat).size(), 1u);
  }
}

TEST(TrainDgtlTest, RequiresFrozenModelAndMatchingChannels) {
  auto model = make_test_lm(lm::PositionalScheme::Rotary, 1, 16, 2, 32, 3, false);
  const TAGraph g = tiny_labeled_graph(10, 15);
  graphdata::Split split;
  split.train_nodes = {0, 1, 2, 3};
  TrainConfig cfg;
  cfg.channels = 2;
  cfg.max_steps = 2;
  PromptTemplate tmpl = tmpl_with_slots(2);
  EXPECT_THROW(train_dgtl(g, split, model, tmpl, cfg), ValueError);
  model.freeze();
  cfg.channels = 3;  // template has 2 slots
  EXPECT_THROW(train_dgtl(g, split, model, tmpl, cfg), ConfigError);
}

TEST(TrainDgtlTest, DeterministicAndLeavesModelUntouched) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary, 1, 16, 2, 32, 3);
  const TAGraph g = tiny_labeled_graph(10, 17);
  graphdata::Split split;
  split.train_nodes = {0, 2, 4, 6};
  split.test_nodes = {1, 3};
  TrainConfig cfg;
  cfg.channels = 2;
  cfg.d_ch = 4;
  cfg.batch_size = 2;
  cfg.max_steps = 6;
  cfg.seed = 21;
  cfg.early_stop = false;
  const PromptTemplate tmpl = tmpl_with_slots(2);

  const std::uint64_t checksum_before = model.checksum();
  const auto a = train_dgtl(g, split, model, tmpl, cfg);
  const auto b = train_dgtl(g, split, model, tmpl, cfg);
  EXPECT_EQ(model.checksum(), checksum_before);
  EXPECT_EQ(a.final_loss, b.final_loss);
  EXPECT_EQ(a.steps_run, 6);
  const auto pa = a.params.named_parameters();
  const auto pb = b.params.named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].tensor.values(), pb[i].tensor.values()) << pa[i].name;
  }
}

TEST(TrainDgtlTest, PlateauEarlyStopTriggers) {
  const auto model = make_test_lm(lm::PositionalScheme::Rotary, 1, 16, 2, 32, 3);
  const TAGraph g = tiny_labeled_graph(8, 19);
  graphdata::Split split;
  split.train_nodes = {0, 1, 2, 3};
  TrainConfig cfg;
  cfg.channels = 2;
  cfg.d_ch = 4;
  cfg.lr = 0.0;  // loss cannot improve
  cfg.batch_size = 4;
  cfg.max_steps = 100;
  cfg.plateau_window = 5;
  cfg.seed = 23;
  const auto result = train_dgtl(g, split, model, tmpl_with_slots(2), cfg);
  EXPECT_TRUE(result.early_stopped);
  EXPECT_LE(result.steps_run, 12);
}

// One training step on a single node should reduce that node's own loss at
// a small learning rate; curvature edge cases are tolerated.
TEST(TrainDgtlTest, SingleStepDecreasesOwnLoss) {
  PrecisionGuard guard(Precision::Float64);
  int failures = 0;
  for (int fixture = 0; fixture < 20; ++fixture) {
    const auto model =
        make_test_lm(lm::PositionalScheme::Rotary, 1, 16, 2, 32, 100 + fixture);
    const TAGraph g = tiny_labeled_graph(8, 200 + fixture);
    const Tensor h0 = build_h0_cache(model, g);
    auto params = gnn::DisentangledParams::init(2, 16, 4, 16, 0.8, 300 + fixture);
    const PromptTemplate tmpl = tmpl_with_slots(2);
    const auto plan = build_prompt(g, 0, tmpl, model.vocab(), 128);

    auto loss_of = [&]() {
      TapePause pause;
      const Tensor logits = node_forward(g, 0, model, &params, tmpl, h0);
      return first_token_loss(logits, plan.label_token_id).values()[0];
    };
    const double before = loss_of();

    Tape tape;
    {
      TapeScope scope(tape);
      const Tensor logits = node_forward(g, 0, model, &params, tmpl, h0);
      tape.backward(first_token_loss(logits, plan.label_token_id));
    }
    AdamConfig acfg;
    acfg.lr = 1e-4;
    AdamState adam(acfg);
    auto theta = params.parameters();
    adam.step(theta);

    if (loss_of() >= before) ++failures;
  }
  EXPECT_LE(failures, 2);
}
