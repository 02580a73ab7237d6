#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dgtl/lm/model.hpp"

namespace dgtl::pipeline {

struct PretrainConfig {
  lm::LMConfig lm;  // vocab_size is overwritten from the built vocabulary
  int steps = 2000;
  int batch_size = 8;
  int block_size = 96;
  double lr = 1e-3;
  int eval_every = 100;
  std::uint64_t seed = 0;
  std::size_t vocab_cap = 2048;
};

struct PretrainResult {
  lm::FrozenLM model;  // frozen, checksum recorded by the caller as needed
  std::vector<std::pair<int, double>> loss_curve;  // (step, batch loss)
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Language-model pretraining on a packed token stream (corpus lines joined
// by <eos>): sample windows, mean next-token cross-entropy, Adam. The
// returned model is frozen. Aborts with the seed in the message if the
// loss turns non-finite.
PretrainResult pretrain_lm(const std::vector<std::string>& corpus,
                           const std::vector<std::string>& categories,
                           const std::vector<std::string>& extra_tokens,
                           const PretrainConfig& cfg);

}  // namespace dgtl::pipeline
