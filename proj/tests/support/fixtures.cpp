#include "support/fixtures.hpp"

namespace dgtl::testing {

lm::Vocabulary make_test_vocab() {
  const std::vector<std::string> corpus = {
      "the quick brown fox jumps over the lazy dog",
      "a paper about graph learning methods",
      "based on the content the most appropriate category would be",
  };
  const std::vector<std::string> categories = {"rule learning", "theory"};
  return lm::Vocabulary::build(corpus, categories, {}, 256);
}

lm::FrozenLM make_test_lm(lm::PositionalScheme scheme, int n_layers,
                          int model_dim, int n_heads, int mlp_dim,
                          std::uint64_t seed, bool freeze) {
  lm::LMConfig cfg;
  cfg.n_layers = n_layers;
  cfg.n_heads = n_heads;
  cfg.model_dim = model_dim;
  cfg.mlp_dim = mlp_dim;
  cfg.max_positions = 128;
  cfg.positional_scheme = scheme;
  auto model = lm::FrozenLM::init_random(cfg, make_test_vocab(), seed);
  if (freeze) model.freeze();
  return model;
}

}  // namespace dgtl::testing
