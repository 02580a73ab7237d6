#pragma once

#include <cstdint>

#include "dgtl/lm/model.hpp"

namespace dgtl::testing {

// Small randomly initialized (untrained) decoder for unit tests.
lm::Vocabulary make_test_vocab();
lm::FrozenLM make_test_lm(lm::PositionalScheme scheme, int n_layers = 2,
                          int model_dim = 16, int n_heads = 2, int mlp_dim = 32,
                          std::uint64_t seed = 1, bool freeze = true);

}  // namespace dgtl::testing
