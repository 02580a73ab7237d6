#include "support/oracles.hpp"

#include <cmath>
#include <numbers>

namespace dgtl::testing {

namespace {

std::vector<double> tensor_row(const numerics::Tensor& t, int r) {
  const int c = t.cols();
  std::vector<double> row(static_cast<std::size_t>(c));
  for (int j = 0; j < c; ++j) row[j] = t.at(r, j);
  return row;
}

// y = x @ W + b over plain rows.
std::vector<double> affine(const std::vector<double>& x, const numerics::Tensor& w,
                           const numerics::Tensor* b) {
  const int in = w.rows(), out = w.cols();
  std::vector<double> y(static_cast<std::size_t>(out), 0.0);
  for (int j = 0; j < out; ++j) {
    double s = b ? b->at(static_cast<std::size_t>(j)) : 0.0;
    for (int k = 0; k < in; ++k) s += x[k] * w.at(k, j);
    y[j] = s;
  }
  return y;
}

std::vector<double> layer_norm_row(const std::vector<double>& x,
                                   const numerics::Tensor& gain,
                                   const numerics::Tensor& bias) {
  const std::size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> y(d);
  for (std::size_t j = 0; j < d; ++j) {
    y[j] = (x[j] - mean) * inv * gain.at(j) + bias.at(j);
  }
  return y;
}

double gelu_scalar(double v) {
  return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
}

void rotate_head(std::vector<double>& head, int pos) {
  const int d = static_cast<int>(head.size());
  for (int j = 0; j < d / 2; ++j) {
    const double theta = pos * std::pow(10000.0, -2.0 * j / d);
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double a = head[2 * j], b = head[2 * j + 1];
    head[2 * j] = a * cs - b * sn;
    head[2 * j + 1] = a * sn + b * cs;
  }
}

}  // namespace

Matrix oracle_lm_hidden(const lm::FrozenLM& model, const std::vector<int>& ids,
                        const lm::InjectionMap* injection) {
  const auto& cfg = model.config();
  const int t = static_cast<int>(ids.size());
  const int d = cfg.model_dim;
  const int hd = cfg.head_dim();
  const bool absolute = cfg.positional_scheme == lm::PositionalScheme::AbsoluteLearned;

  Matrix x(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) x[i] = tensor_row(model.embedding, ids[i]);

  Matrix inj(static_cast<std::size_t>(t), std::vector<double>(d, 0.0));
  if (injection) {
    for (std::size_t k = 0; k < injection->positions.size(); ++k) {
      inj[injection->positions[k]] = tensor_row(injection->vectors, static_cast<int>(k));
    }
  }

  for (const auto& w : model.layers) {
    Matrix a(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) a[i] = layer_norm_row(x[i], w.norm1_gain, w.norm1_bias);

    Matrix q(static_cast<std::size_t>(t)), k(static_cast<std::size_t>(t)),
        v(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
      std::vector<double> qk_in = a[i];
      std::vector<double> v_in = a[i];
      for (int j = 0; j < d; ++j) {
        if (absolute) qk_in[j] += model.pos_table.at(i, j);
        qk_in[j] += inj[i][j];
        v_in[j] += inj[i][j];
      }
      q[i] = affine(qk_in, w.wq, nullptr);
      k[i] = affine(qk_in, w.wk, nullptr);
      v[i] = affine(v_in, w.wv, nullptr);
    }

    Matrix ctx(static_cast<std::size_t>(t), std::vector<double>(d, 0.0));
    for (int h = 0; h < cfg.n_heads; ++h) {
      const int off = h * hd;
      Matrix qh(static_cast<std::size_t>(t)), kh(static_cast<std::size_t>(t));
      for (int i = 0; i < t; ++i) {
        qh[i].assign(q[i].begin() + off, q[i].begin() + off + hd);
        kh[i].assign(k[i].begin() + off, k[i].begin() + off + hd);
        if (!absolute) {
          rotate_head(qh[i], i);
          rotate_head(kh[i], i);
        }
      }
      for (int i = 0; i < t; ++i) {
        // Causal attention over j <= i only.
        std::vector<double> scores(static_cast<std::size_t>(i) + 1);
        double mx = -1e300;
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          for (int e = 0; e < hd; ++e) s += qh[i][e] * kh[j][e];
          scores[j] = s / std::sqrt(static_cast<double>(hd));
          mx = std::max(mx, scores[j]);
        }
        double denom = 0.0;
        for (int j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          denom += scores[j];
        }
        for (int j = 0; j <= i; ++j) {
          const double p = scores[j] / denom;
          for (int e = 0; e < hd; ++e) ctx[i][off + e] += p * v[j][off + e];
        }
      }
    }

    for (int i = 0; i < t; ++i) {
      const auto attn = affine(ctx[i], w.wo, nullptr);
      for (int j = 0; j < d; ++j) x[i][j] += attn[j];
      const auto m = layer_norm_row(x[i], w.norm2_gain, w.norm2_bias);
      auto mid = affine(m, w.mlp_w1, &w.mlp_b1);
      for (auto& val : mid) val = gelu_scalar(val);
      const auto mlp_out = affine(mid, w.mlp_w2, &w.mlp_b2);
      for (int j = 0; j < d; ++j) x[i][j] += mlp_out[j];
    }
  }

  for (int i = 0; i < t; ++i) {
    x[i] = layer_norm_row(x[i], model.final_norm_gain, model.final_norm_bias);
  }
  return x;
}

double oracle_lm_loss(const lm::FrozenLM& model, const std::vector<int>& ids) {
  const auto hidden = oracle_lm_hidden(model, ids, nullptr);
  const int v = model.config().vocab_size;
  double total = 0.0;
  int count = 0;
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    const int target = ids[i + 1];
    if (target == lm::Vocabulary::kPad) continue;
    std::vector<double> logits(static_cast<std::size_t>(v), 0.0);
    for (int j = 0; j < v; ++j) {
      double s = 0.0;
      for (int e = 0; e < model.config().model_dim; ++e) {
        s += hidden[i][e] * model.unembed.at(e, j);
      }
      logits[j] = s;
    }
    double mx = logits[0];
    for (double s : logits) mx = std::max(mx, s);
    double denom = 0.0;
    for (double s : logits) denom += std::exp(s - mx);
    total += mx + std::log(denom) - logits[target];
    ++count;
  }
  return total / count;
}

std::vector<double> oracle_embed_text(const lm::FrozenLM& model,
                                      const std::string& text) {
  const auto ids = model.vocab().tokenize(text);
  const auto hidden = oracle_lm_hidden(model, ids, nullptr);
  const int d = model.config().model_dim;
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (const auto& row : hidden) {
    for (int j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (auto& v : mean) v /= static_cast<double>(hidden.size());
  return mean;
}

Matrix oracle_channel_forward(const gnn::ChannelParams& channel,
                              const Matrix& h0,
                              const graphdata::TAGraph& graph, double delta) {
  const int n = graph.node_count();
  auto sigmoid = [](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  };
  auto project = [](const numerics::Tensor& s, const std::vector<double>& h) {
    // (S h)_j = sum_k S[j][k] h[k]
    const int d = s.rows();
    std::vector<double> out(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < s.cols(); ++k) out[j] += s.at(j, k) * h[k];
    }
    return out;
  };

  // Layer 1 on the binary adjacency.
  Matrix h1(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    std::vector<double> m = h0[u];
    for (int v : graph.neighbors(u)) {
      for (std::size_t j = 0; j < m.size(); ++j) m[j] += h0[v][j];
    }
    const double den = 1.0 + graph.degree(u);
    for (auto& val : m) val /= den;
    h1[u] = affine(m, channel.w1, &channel.b1);
    for (auto& val : h1[u]) val = std::max(0.0, val);
  }

  // Layer 2 on the learned weighted structure.
  Matrix h2(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    const auto su = project(channel.s_src, h1[u]);
    std::vector<double> m = h1[u];
    double den = 1.0;
    for (int v : graph.neighbors(u)) {
      const auto dv = project(channel.s_dst, h1[v]);
      double score = 0.0;
      for (std::size_t j = 0; j < su.size(); ++j) score += su[j] * dv[j];
      const double w = delta + (1.0 - delta) * sigmoid(score);
      den += w;
      for (std::size_t j = 0; j < m.size(); ++j) m[j] += w * h1[v][j];
    }
    for (auto& val : m) val /= den;
    h2[u] = affine(m, channel.w2, &channel.b2);
    for (auto& val : h2[u]) val = std::max(0.0, val);
  }
  return h2;
}

}  // namespace dgtl::testing
