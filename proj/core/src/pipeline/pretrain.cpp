#include "dgtl/pipeline/pretrain.hpp"

#include <cmath>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/adam.hpp"
#include "dgtl/numerics/ops.hpp"
#include "dgtl/numerics/rng.hpp"
#include "dgtl/numerics/tape.hpp"

namespace dgtl::pipeline {

using namespace dgtl::numerics;

PretrainResult pretrain_lm(const std::vector<std::string>& corpus,
                           const std::vector<std::string>& categories,
                           const std::vector<std::string>& extra_tokens,
                           const PretrainConfig& cfg) {
  if (corpus.empty()) throw ValueError("pretraining corpus is empty");
  if (cfg.steps < 1 || cfg.batch_size < 1 || cfg.block_size < 2) {
    throw ConfigError("pretraining needs steps >= 1, batch >= 1, block >= 2");
  }

  auto vocab = lm::Vocabulary::build(corpus, categories, extra_tokens, cfg.vocab_cap);

  std::vector<int> stream;
  for (const auto& line : corpus) {
    const auto ids = vocab.tokenize(line);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(lm::Vocabulary::kEos);
  }
  if (static_cast<int>(stream.size()) < cfg.block_size + 1) {
    throw ValueError("corpus too small for block_size " + std::to_string(cfg.block_size));
  }

  lm::LMConfig lmcfg = cfg.lm;
  if (lmcfg.max_positions < cfg.block_size + 1) {
    throw ConfigError("block_size exceeds max_positions");
  }
  PretrainResult result;
  result.model = lm::FrozenLM::init_random(lmcfg, std::move(vocab),
                                           derive_seed(cfg.seed, "lm_init"));
  auto params = result.model.parameters();

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  AdamState adam(adam_cfg);
  Rng rng(derive_seed(cfg.seed, "pretrain_batches"));

  const std::size_t max_start = stream.size() - cfg.block_size - 1;
  for (int step = 1; step <= cfg.steps; ++step) {
    Tape tape;
    Tensor mean_loss;
    {
      TapeScope scope(tape);
      Tensor total;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t start = rng.index(max_start + 1);
        std::vector<int> window(stream.begin() + start,
                                stream.begin() + start + cfg.block_size + 1);
        Tensor loss = lm::lm_loss(result.model, window);
        total = total.defined() ? add(total, loss) : loss;
      }
      mean_loss = scale(total, 1.0 / cfg.batch_size);
      tape.backward(mean_loss);
    }
    const double loss_value = mean_loss.values()[0];
    if (!std::isfinite(loss_value)) {
      throw NonFiniteError("pretraining diverged at step " + std::to_string(step) +
                           " (seed " + std::to_string(cfg.seed) + ")");
    }
    if (step == 1) result.initial_loss = loss_value;
    result.final_loss = loss_value;
    if (step == 1 || step == cfg.steps ||
        (cfg.eval_every > 0 && step % cfg.eval_every == 0)) {
      result.loss_curve.emplace_back(step, loss_value);
    }
    if (!adam.step(params)) {
      throw NonFiniteError("pretraining hit a non-finite gradient at step " +
                           std::to_string(step) + " (seed " +
                           std::to_string(cfg.seed) + ")");
    }
    for (auto& p : params) p.zero_grad();
  }

  result.model.freeze();
  return result;
}

}  // namespace dgtl::pipeline
