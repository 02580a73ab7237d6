#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dgtl/numerics/tensor.hpp"

namespace dgtl::numerics {

// Differentiable operation set. Every op validates shapes (ShapeError names
// the op and the offending shapes), computes values in double, applies the
// global precision mode to the result and, when a tape is active and some
// input requires a gradient, records a backward closure.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor add_bias(const Tensor& x, const Tensor& bias);  // [N,d] + [d], row broadcast

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
              bool transpose_b = false);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form

Tensor softmax_rows(const Tensor& x);  // stable softmax over the last axis of a matrix
Tensor mean_axis(const Tensor& x, int axis);  // matrix -> vector
Tensor sum_all(const Tensor& x);  // scalar

Tensor slice_rows(const Tensor& x, int r0, int r1);
Tensor slice_cols(const Tensor& x, int c0, int c1);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// mask has one entry per element; 1 replaces the element with `value`.
Tensor masked_fill(const Tensor& x, const std::vector<std::uint8_t>& mask,
                   double value);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Fused log-softmax + negative log-likelihood, averaged over the active
// rows (all rows when `active` is null). Targets index the last axis.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<std::uint8_t>* active = nullptr);

// Rotary position map on one attention head: row index = position, pairs
// (2j, 2j+1) rotated by angle pos * base^(-2j/dim).
Tensor rope(const Tensor& x, double base = 10000.0);

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);

// Places src row k at `rows[k]` of an otherwise-zero [n_rows, d] matrix.
// Row indices must be unique and in range.
Tensor scatter_rows(const Tensor& src, const std::vector<int>& rows, int n_rows);

Tensor rowwise_dot(const Tensor& a, const Tensor& b);  // [N,d] x [N,d] -> [N]

// Weighted neighborhood mean with an implicit unit self-loop:
//   out[u] = (sum_e w[e] * h[src[e]] + h[u]) / (sum_e w[e] + 1)
// where e ranges over directed edges with dst[e] == u. Weights must be
// nonnegative and differentiable gradients flow to both h and w.
Tensor weighted_mean_aggregate(const Tensor& h, const Tensor& w,
                               const std::vector<int>& dst,
                               const std::vector<int>& src);

}  // namespace dgtl::numerics
