#include "dgtl/lm/model.hpp"

#include <cmath>
#include <unordered_map>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/ops.hpp"
#include "dgtl/numerics/rng.hpp"
#include "dgtl/numerics/tape.hpp"

namespace dgtl::lm {

using namespace dgtl::numerics;

namespace {

constexpr double kMaskValue = -1e30;

Tensor gaussian_tensor(Shape shape, double stddev, std::uint64_t seed,
                       const std::string& tag) {
  Rng rng(derive_seed(seed, tag));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.gaussian(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(v), true);
}

std::vector<std::uint8_t> causal_mask(int t) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(t) * t, 0);
  for (int i = 0; i < t; ++i) {
    for (int j = i + 1; j < t; ++j) mask[static_cast<std::size_t>(i) * t + j] = 1;
  }
  return mask;
}

void validate_injection(const InjectionMap& inj, int t, int d) {
  if (!inj.vectors.defined() || inj.vectors.rank() != 2 ||
      inj.vectors.rows() != static_cast<int>(inj.positions.size())) {
    throw ShapeError("injection vectors do not match the position list");
  }
  if (inj.vectors.cols() != d) {
    throw ShapeError("injection vector dimension " + std::to_string(inj.vectors.cols()) +
                     " does not match model dimension " + std::to_string(d));
  }
  int prev = -1;
  for (int p : inj.positions) {
    if (p <= prev) throw ValueError("injection positions must be strictly increasing");
    if (p < 0 || p >= t) {
      throw ValueError("injection position " + std::to_string(p) +
                       " outside sequence of length " + std::to_string(t));
    }
    prev = p;
  }
}

}  // namespace

FrozenLM FrozenLM::init_random(const LMConfig& cfg, Vocabulary vocab,
                               std::uint64_t seed) {
  LMConfig fixed = cfg;
  fixed.vocab_size = vocab.size();
  fixed.validate();
  FrozenLM lm;
  lm.cfg_ = fixed;
  lm.vocab_ = std::move(vocab);
  const int d = fixed.model_dim;
  const double base_std = 0.02;
  const double resid_std = base_std / std::sqrt(2.0 * fixed.n_layers);
  lm.embedding = gaussian_tensor({fixed.vocab_size, d}, base_std, seed, "embed");
  if (fixed.positional_scheme == PositionalScheme::AbsoluteLearned) {
    lm.pos_table = gaussian_tensor({fixed.max_positions, d}, base_std, seed, "pos");
  }
  for (int l = 0; l < fixed.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerWeights w;
    w.norm1_gain = Tensor::full({d}, 1.0, true);
    w.norm1_bias = Tensor::zeros({d}, true);
    w.wq = gaussian_tensor({d, d}, base_std, seed, p + "wq");
    w.wk = gaussian_tensor({d, d}, base_std, seed, p + "wk");
    w.wv = gaussian_tensor({d, d}, base_std, seed, p + "wv");
    w.wo = gaussian_tensor({d, d}, resid_std, seed, p + "wo");
    w.norm2_gain = Tensor::full({d}, 1.0, true);
    w.norm2_bias = Tensor::zeros({d}, true);
    w.mlp_w1 = gaussian_tensor({d, fixed.mlp_dim}, base_std, seed, p + "mlp.w1");
    w.mlp_b1 = Tensor::zeros({fixed.mlp_dim}, true);
    w.mlp_w2 = gaussian_tensor({fixed.mlp_dim, d}, resid_std, seed, p + "mlp.w2");
    w.mlp_b2 = Tensor::zeros({d}, true);
    lm.layers.push_back(std::move(w));
  }
  lm.final_norm_gain = Tensor::full({d}, 1.0, true);
  lm.final_norm_bias = Tensor::zeros({d}, true);
  lm.unembed = gaussian_tensor({d, fixed.vocab_size}, base_std, seed, "unembed");
  return lm;
}

std::vector<Tensor> FrozenLM::parameters() {
  std::vector<Tensor> out;
  out.push_back(embedding);
  if (pos_table.defined()) out.push_back(pos_table);
  for (auto& w : layers) {
    out.push_back(w.norm1_gain);
    out.push_back(w.norm1_bias);
    out.push_back(w.wq);
    out.push_back(w.wk);
    out.push_back(w.wv);
    out.push_back(w.wo);
    out.push_back(w.norm2_gain);
    out.push_back(w.norm2_bias);
    out.push_back(w.mlp_w1);
    out.push_back(w.mlp_b1);
    out.push_back(w.mlp_w2);
    out.push_back(w.mlp_b2);
  }
  out.push_back(final_norm_gain);
  out.push_back(final_norm_bias);
  out.push_back(unembed);
  return out;
}

std::vector<NamedTensor> FrozenLM::named_parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"embed", embedding});
  if (pos_table.defined()) out.push_back({"pos", pos_table});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const LayerWeights& w = layers[l];
    out.push_back({p + "norm1.gain", w.norm1_gain});
    out.push_back({p + "norm1.bias", w.norm1_bias});
    out.push_back({p + "wq", w.wq});
    out.push_back({p + "wk", w.wk});
    out.push_back({p + "wv", w.wv});
    out.push_back({p + "wo", w.wo});
    out.push_back({p + "norm2.gain", w.norm2_gain});
    out.push_back({p + "norm2.bias", w.norm2_bias});
    out.push_back({p + "mlp.w1", w.mlp_w1});
    out.push_back({p + "mlp.b1", w.mlp_b1});
    out.push_back({p + "mlp.w2", w.mlp_w2});
    out.push_back({p + "mlp.b2", w.mlp_b2});
  }
  out.push_back({"final_norm.gain", final_norm_gain});
  out.push_back({"final_norm.bias", final_norm_bias});
  out.push_back({"unembed", unembed});
  return out;
}

void FrozenLM::freeze() {
  for (Tensor& t : parameters()) {
    t.zero_grad();
    t.set_requires_grad(false);
  }
  frozen_ = true;
}

std::uint64_t FrozenLM::checksum() const {
  return fnv1a64(serialize_checkpoint(named_parameters()));
}

void FrozenLM::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "lm.ckpt", named_parameters());
  cfg_.save(dir / "lm.config");
  vocab_.save(dir / "vocab.txt");
}

FrozenLM FrozenLM::load(const std::filesystem::path& dir) {
  FrozenLM lm;
  lm.cfg_ = LMConfig::load(dir / "lm.config");
  lm.vocab_ = Vocabulary::load(dir / "vocab.txt");
  if (lm.vocab_.size() != lm.cfg_.vocab_size) {
    throw CheckpointError("vocabulary size " + std::to_string(lm.vocab_.size()) +
                          " does not match config vocab_size " +
                          std::to_string(lm.cfg_.vocab_size));
  }
  auto tensors = load_checkpoint(dir / "lm.ckpt");
  std::unordered_map<std::string, Tensor> by_name;
  for (auto& nt : tensors) by_name.emplace(nt.name, nt.tensor);
  auto take = [&](const std::string& name, Shape expect) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint missing tensor " + name);
    if (it->second.shape() != expect) {
      throw CheckpointError("checkpoint tensor " + name + " has shape " +
                            shape_str(it->second.shape()) + ", expected " +
                            shape_str(expect));
    }
    return it->second;
  };
  const int d = lm.cfg_.model_dim;
  lm.embedding = take("embed", {lm.cfg_.vocab_size, d});
  if (lm.cfg_.positional_scheme == PositionalScheme::AbsoluteLearned) {
    lm.pos_table = take("pos", {lm.cfg_.max_positions, d});
  }
  for (int l = 0; l < lm.cfg_.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerWeights w;
    w.norm1_gain = take(p + "norm1.gain", {d});
    w.norm1_bias = take(p + "norm1.bias", {d});
    w.wq = take(p + "wq", {d, d});
    w.wk = take(p + "wk", {d, d});
    w.wv = take(p + "wv", {d, d});
    w.wo = take(p + "wo", {d, d});
    w.norm2_gain = take(p + "norm2.gain", {d});
    w.norm2_bias = take(p + "norm2.bias", {d});
    w.mlp_w1 = take(p + "mlp.w1", {d, lm.cfg_.mlp_dim});
    w.mlp_b1 = take(p + "mlp.b1", {lm.cfg_.mlp_dim});
    w.mlp_w2 = take(p + "mlp.w2", {lm.cfg_.mlp_dim, d});
    w.mlp_b2 = take(p + "mlp.b2", {d});
    lm.layers.push_back(std::move(w));
  }
  lm.final_norm_gain = take("final_norm.gain", {d});
  lm.final_norm_bias = take("final_norm.bias", {d});
  lm.unembed = take("unembed", {d, lm.cfg_.vocab_size});
  // Loaded models are frozen; pretraining always starts from init_random.
  lm.freeze();
  return lm;
}

Tensor forward_hidden(const FrozenLM& lm, const std::vector<int>& ids,
                      const InjectionMap* injection) {
  const LMConfig& cfg = lm.config();
  const int t = static_cast<int>(ids.size());
  if (t == 0) throw ValueError("forward on empty token sequence");
  if (t > cfg.max_positions) {
    throw ValueError("sequence length " + std::to_string(t) +
                     " exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  if (injection) validate_injection(*injection, t, cfg.model_dim);

  const int d = cfg.model_dim;
  const int hd = cfg.head_dim();
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const auto mask = causal_mask(t);
  const bool absolute = cfg.positional_scheme == PositionalScheme::AbsoluteLearned;

  Tensor x = embedding_lookup(lm.embedding, ids);
  Tensor inj_rows;
  if (injection) {
    inj_rows = scatter_rows(injection->vectors, injection->positions, t);
  }
  Tensor pos_rows;
  if (absolute) pos_rows = slice_rows(lm.pos_table, 0, t);

  for (const LayerWeights& w : lm.layers) {
    Tensor a = layer_norm(x, w.norm1_gain, w.norm1_bias);
    Tensor qk_in = a;
    if (absolute) qk_in = add(qk_in, pos_rows);
    if (injection) qk_in = add(qk_in, inj_rows);
    Tensor v_in = injection ? add(a, inj_rows) : a;

    Tensor q = matmul(qk_in, w.wq);
    Tensor k = matmul(qk_in, w.wk);
    Tensor v = matmul(v_in, w.wv);

    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
      Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
      Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
      Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
      if (!absolute) {
        qh = rope(qh);
        kh = rope(kh);
      }
      Tensor scores = scale(matmul(qh, kh, false, true), att_scale);
      scores = masked_fill(scores, mask, kMaskValue);
      Tensor probs = softmax_rows(scores);
      heads.push_back(matmul(probs, vh));
    }
    Tensor ctx = concat_cols(heads);
    x = add(x, matmul(ctx, w.wo));

    Tensor m = layer_norm(x, w.norm2_gain, w.norm2_bias);
    Tensor hmid = gelu(add_bias(matmul(m, w.mlp_w1), w.mlp_b1));
    x = add(x, add_bias(matmul(hmid, w.mlp_w2), w.mlp_b2));
  }
  return layer_norm(x, lm.final_norm_gain, lm.final_norm_bias);
}

ForwardResult forward(const FrozenLM& lm, const std::vector<int>& ids,
                      const InjectionMap* injection) {
  ForwardResult r;
  r.hidden = forward_hidden(lm, ids, injection);
  r.logits = matmul(r.hidden, lm.unembed);
  return r;
}

Tensor forward_logits_at(const FrozenLM& lm, const std::vector<int>& ids,
                         const InjectionMap* injection, int row) {
  if (row < 0 || row >= static_cast<int>(ids.size())) {
    throw ValueError("logit row " + std::to_string(row) + " outside sequence");
  }
  Tensor hidden = forward_hidden(lm, ids, injection);
  return matmul(slice_rows(hidden, row, row + 1), lm.unembed);
}

Tensor embed_text(const FrozenLM& lm, const std::string& text) {
  const auto ids = lm.vocab().tokenize(text);
  if (ids.empty()) throw ValueError("embed_text: text tokenizes to nothing");
  TapePause pause;
  Tensor hidden = forward_hidden(lm, ids, nullptr);
  return mean_axis(hidden, 0);
}

Tensor lm_loss(const FrozenLM& lm, const std::vector<int>& ids) {
  if (ids.size() < 2) throw ValueError("lm_loss needs at least two tokens");
  Tensor hidden = forward_hidden(lm, ids, nullptr);
  Tensor logits = matmul(slice_rows(hidden, 0, static_cast<int>(ids.size()) - 1),
                         lm.unembed);
  std::vector<int> targets(ids.begin() + 1, ids.end());
  std::vector<std::uint8_t> active(targets.size(), 1);
  bool any = false;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    active[i] = targets[i] != Vocabulary::kPad;
    any = any || active[i];
  }
  if (!any) throw ValueError("lm_loss: every target is <pad>");
  return cross_entropy(logits, targets, &active);
}

std::vector<int> generate(const FrozenLM& lm, const std::vector<int>& prompt,
                          const InjectionMap* injection, int max_new_tokens) {
  if (static_cast<int>(prompt.size()) >= lm.config().max_positions) {
    throw ValueError("prompt does not fit the context window");
  }
  TapePause pause;
  std::vector<int> ids = prompt;
  std::vector<int> out;
  for (int step = 0; step < max_new_tokens; ++step) {
    Tensor logits = forward_logits_at(lm, ids, injection,
                                      static_cast<int>(ids.size()) - 1);
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j) {
      if (logits.at(0, j) > logits.at(0, best)) best = j;
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    ids.push_back(best);
    if (static_cast<int>(ids.size()) >= lm.config().max_positions) break;
  }
  return out;
}

}  // namespace dgtl::lm
