#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dgtl/lm/config.hpp"
#include "dgtl/lm/vocabulary.hpp"
#include "dgtl/numerics/checkpoint.hpp"
#include "dgtl/numerics/tensor.hpp"

namespace dgtl::lm {

using numerics::Tensor;

struct LayerWeights {
  Tensor norm1_gain, norm1_bias;
  Tensor wq, wk, wv, wo;
  Tensor norm2_gain, norm2_bias;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

// Per-node injection: the k-th vector is added to the attention inputs at
// token position positions[k], inside the q/k/v projections, at every
// layer. positions are strictly increasing; vectors is [K, model_dim].
struct InjectionMap {
  std::vector<int> positions;
  Tensor vectors;
};

// Decoder-only pre-norm transformer. Mutable while pretraining; freeze()
// drops every weight out of the trainable set, after which the content
// checksum is invariant under any amount of downstream training.
class FrozenLM {
 public:
  FrozenLM() = default;

  static FrozenLM init_random(const LMConfig& cfg, Vocabulary vocab,
                              std::uint64_t seed);

  const LMConfig& config() const noexcept { return cfg_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }

  std::vector<Tensor> parameters();
  std::vector<numerics::NamedTensor> named_parameters() const;

  void freeze();
  bool frozen() const noexcept { return frozen_; }
  std::uint64_t checksum() const;  // FNV-1a over the serialized weights

  // Writes lm.ckpt (DGTL0001), lm.config and vocab.txt into dir.
  void save(const std::filesystem::path& dir) const;
  static FrozenLM load(const std::filesystem::path& dir);

  Tensor embedding;  // [V, d]
  Tensor pos_table;  // [max_positions, d], absolute_learned only
  std::vector<LayerWeights> layers;
  Tensor final_norm_gain, final_norm_bias;
  Tensor unembed;  // [d, V]

 private:
  LMConfig cfg_;
  Vocabulary vocab_;
  bool frozen_ = false;
};

struct ForwardResult {
  Tensor hidden;  // [T, d] final hidden states (post final norm)
  Tensor logits;  // [T, V] next-token logits
};

// Causal transformer pass. At every layer, injected vectors are added to
// the normalized layer input at their reserved positions inside the q, k
// and v projections; the absolute scheme also adds the position row inside
// q and k, while the rotary scheme rotates q and k after projection.
ForwardResult forward(const FrozenLM& lm, const std::vector<int>& ids,
                      const InjectionMap* injection = nullptr);
Tensor forward_hidden(const FrozenLM& lm, const std::vector<int>& ids,
                      const InjectionMap* injection = nullptr);
// Next-token logits [1, V] for a single position (row = position index).
Tensor forward_logits_at(const FrozenLM& lm, const std::vector<int>& ids,
                         const InjectionMap* injection, int row);

// Mean of the final-layer hidden states over all token positions of the
// raw text; no injection, no prompt template, detached from any tape.
Tensor embed_text(const FrozenLM& lm, const std::string& text);

// Mean next-token cross-entropy over the sequence; <pad> targets excluded.
Tensor lm_loss(const FrozenLM& lm, const std::vector<int>& ids);

// Greedy decoding (first-index tie-break); stops at <eos> or after
// max_new_tokens. Returns only the generated continuation.
std::vector<int> generate(const FrozenLM& lm, const std::vector<int>& prompt,
                          const InjectionMap* injection, int max_new_tokens);

}  // namespace dgtl::lm
