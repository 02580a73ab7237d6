#include "dgtl/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <tuple>
#include <unordered_set>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/precision.hpp"
#include "dgtl/numerics/tape.hpp"

namespace dgtl::numerics {

namespace {

bool want_grad(std::initializer_list<const Tensor*> ins) {
  if (!active_tape()) return false;
  for (const Tensor* t : ins) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void finalize(Tensor& out, const char* op) {
  if (!out.apply_mode_rounding()) {
    if (precision() == Precision::Float64) {
      throw NonFiniteError(std::string(op) + " produced a non-finite value");
    }
    record_nonfinite_warning();
  }
}

void attach(Tensor& out, std::function<void()> bw,
            std::initializer_list<const Tensor*> ins) {
  Tape* tape = active_tape();
  out.set_requires_grad(true);
  out.set_tape_id(tape->id());
  for (const Tensor* in : ins) {
    if (in->defined() && in->requires_grad() && in->tape_id() != tape->id()) {
      tape->note_leaf(*in);
    }
  }
  tape->record(std::move(bw));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void require_matrix(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_str(x.shape()));
  }
}

// C (+)= opA(A) * opB(B), row-major, effective dims [M,K] x [K,N].
void matmul_accumulate(std::vector<double>& c, const std::vector<double>& a,
                       int ar, int ac, const std::vector<double>& b, int br,
                       int bc, bool ta, bool tb) {
  const int m = ta ? ac : ar;
  const int k = ta ? ar : ac;
  const int n = tb ? br : bc;
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  if (!ta && !tb) {
    for (int i = 0; i < m; ++i) {
      double* crow = C + static_cast<std::size_t>(i) * n;
      const double* arow = A + static_cast<std::size_t>(i) * k;
      for (int kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        const double* brow = B + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!ta && tb) {
    // B stored [N,K]; transpose once so the inner loop streams rows.
    std::vector<double> bt(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j) {
      for (int kk = 0; kk < k; ++kk) {
        bt[static_cast<std::size_t>(kk) * n + j] = B[static_cast<std::size_t>(j) * k + kk];
      }
    }
    for (int i = 0; i < m; ++i) {
      const double* arow = A + static_cast<std::size_t>(i) * k;
      double* crow = C + static_cast<std::size_t>(i) * n;
      for (int kk = 0; kk < k; ++kk) {
        const double av = arow[kk];
        const double* brow = bt.data() + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (ta && !tb) {
    // A stored [K,M]
    for (int kk = 0; kk < k; ++kk) {
      const double* arow = A + static_cast<std::size_t>(kk) * m;
      const double* brow = B + static_cast<std::size_t>(kk) * n;
      for (int i = 0; i < m; ++i) {
        const double av = arow[i];
        double* crow = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    // A stored [K,M], B stored [N,K]: transpose B, then the TN pattern.
    std::vector<double> bt(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j) {
      for (int kk = 0; kk < k; ++kk) {
        bt[static_cast<std::size_t>(kk) * n + j] = B[static_cast<std::size_t>(j) * k + kk];
      }
    }
    for (int kk = 0; kk < k; ++kk) {
      const double* arow = A + static_cast<std::size_t>(kk) * m;
      const double* brow = bt.data() + static_cast<std::size_t>(kk) * n;
      for (int i = 0; i < m; ++i) {
        const double av = arow[i];
        double* crow = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

struct RopeTable {
  std::vector<double> cs, sn;  // [t * d/2]
};

// Rotation angles depend only on (length, dim, base); cache them.
std::shared_ptr<const RopeTable> rope_table(int t, int d, double base) {
  thread_local std::map<std::tuple<int, int, double>,
                        std::shared_ptr<const RopeTable>> cache;
  const auto key = std::make_tuple(t, d, base);
  const auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto table = std::make_shared<RopeTable>();
  const int half = d / 2;
  table->cs.resize(static_cast<std::size_t>(t) * half);
  table->sn.resize(static_cast<std::size_t>(t) * half);
  std::vector<double> freq(static_cast<std::size_t>(half));
  for (int j = 0; j < half; ++j) freq[j] = std::pow(base, -2.0 * j / d);
  for (int pos = 0; pos < t; ++pos) {
    for (int j = 0; j < half; ++j) {
      const double theta = pos * freq[j];
      table->cs[static_cast<std::size_t>(pos) * half + j] = std::cos(theta);
      table->sn[static_cast<std::size_t>(pos) * half + j] = std::sin(theta);
    }
  }
  cache.emplace(key, table);
  return table;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.size();
  auto& ov = out.mutable_values();
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
  finalize(out, "add");
  if (want_grad({&a, &b})) {
    Tensor ta = a, tb = b, to = out;
    attach(out,
           [ta, tb, to]() mutable {
             const auto& go = to.grad();
             if (ta.requires_grad()) {
               auto& ga = ta.grad();
               for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
             }
           },
           {&a, &b});
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.mutable_values();
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i];
  finalize(out, "sub");
  if (want_grad({&a, &b})) {
    Tensor ta = a, tb = b, to = out;
    attach(out,
           [ta, tb, to]() mutable {
             const auto& go = to.grad();
             if (ta.requires_grad()) {
               auto& ga = ta.grad();
               for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
             }
           },
           {&a, &b});
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.mutable_values();
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i];
  finalize(out, "mul");
  if (want_grad({&a, &b})) {
    Tensor ta = a, tb = b, to = out;
    attach(out,
           [ta, tb, to]() mutable {
             const auto& go = to.grad();
             if (ta.requires_grad()) {
               auto& ga = ta.grad();
               const auto& bv = tb.values();
               for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               const auto& av = ta.values();
               for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
             }
           },
           {&a, &b});
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = xv[i] * c;
  finalize(out, "scale");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to, c]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             for (std::size_t i = 0; i < go.size(); ++i) gx[i] += c * go[i];
           },
           {&x});
  }
  return out;
}

Tensor add_scalar(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = xv[i] + c;
  finalize(out, "add_scalar");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
           },
           {&x});
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  if (bias.rank() != 1 || bias.dim(0) != x.cols()) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                     " does not match " + shape_str(x.shape()));
  }
  const int r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  const auto& bv = bias.values();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      ov[static_cast<std::size_t>(i) * c + j] =
          xv[static_cast<std::size_t>(i) * c + j] + bv[j];
    }
  }
  finalize(out, "add_bias");
  if (want_grad({&x, &bias})) {
    Tensor tx = x, tb = bias, to = out;
    attach(out,
           [tx, tb, to, r, c]() mutable {
             const auto& go = to.grad();
             if (tx.requires_grad()) {
               auto& gx = tx.grad();
               for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               for (int i = 0; i < r; ++i) {
                 for (int j = 0; j < c; ++j) {
                   gb[j] += go[static_cast<std::size_t>(i) * c + j];
                 }
               }
             }
           },
           {&x, &bias});
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const int m = transpose_a ? a.cols() : a.rows();
  const int k = transpose_a ? a.rows() : a.cols();
  const int k2 = transpose_b ? b.cols() : b.rows();
  const int n = transpose_b ? b.rows() : b.cols();
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                     (transpose_a ? "^T" : "") + " vs " + shape_str(b.shape()) +
                     (transpose_b ? "^T" : ""));
  }
  Tensor out = Tensor::zeros({m, n});
  matmul_accumulate(out.mutable_values(), a.values(), a.rows(), a.cols(),
                    b.values(), b.rows(), b.cols(), transpose_a, transpose_b);
  finalize(out, "matmul");
  if (want_grad({&a, &b})) {
    Tensor ta = a, tb = b, to = out;
    attach(out,
           [ta, tb, to, transpose_a, transpose_b]() mutable {
             const auto& go = to.grad();
             const int gorows = to.rows(), gocols = to.cols();
             if (ta.requires_grad()) {
               auto& ga = ta.grad();
               if (!transpose_a && !transpose_b) {
                 matmul_accumulate(ga, go, gorows, gocols, tb.values(), tb.rows(), tb.cols(), false, true);
               } else if (!transpose_a && transpose_b) {
                 matmul_accumulate(ga, go, gorows, gocols, tb.values(), tb.rows(), tb.cols(), false, false);
               } else if (transpose_a && !transpose_b) {
                 matmul_accumulate(ga, tb.values(), tb.rows(), tb.cols(), go, gorows, gocols, false, true);
               } else {
                 matmul_accumulate(ga, tb.values(), tb.rows(), tb.cols(), go, gorows, gocols, true, true);
               }
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               if (!transpose_a && !transpose_b) {
                 matmul_accumulate(gb, ta.values(), ta.rows(), ta.cols(), go, gorows, gocols, true, false);
               } else if (!transpose_a && transpose_b) {
                 matmul_accumulate(gb, go, gorows, gocols, ta.values(), ta.rows(), ta.cols(), true, false);
               } else if (transpose_a && !transpose_b) {
                 matmul_accumulate(gb, ta.values(), ta.rows(), ta.cols(), go, gorows, gocols, false, false);
               } else {
                 matmul_accumulate(gb, go, gorows, gocols, ta.values(), ta.rows(), ta.cols(), true, true);
               }
             }
           },
           {&a, &b});
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = xv[i];
    ov[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                     : std::exp(v) / (1.0 + std::exp(v));
  }
  finalize(out, "sigmoid");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             const auto& yv = to.values();
             for (std::size_t i = 0; i < go.size(); ++i) {
               const double y = yv[i];
               gx[i] += go[i] * y * (1.0 - y);
             }
           },
           {&x});
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = std::max(0.0, xv[i]);
  finalize(out, "relu");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             const auto& xv = tx.values();
             for (std::size_t i = 0; i < go.size(); ++i) {
               if (xv[i] > 0.0) gx[i] += go[i];
             }
           },
           {&x});
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = xv[i];
    ov[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  finalize(out, "gelu");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to]() mutable {
             if (!tx.requires_grad()) return;
             constexpr double c = 0.3989422804014327;  // 1/sqrt(2*pi)
             constexpr double inv_s2 = std::numbers::sqrt2 / 2.0;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             const auto& xv = tx.values();
             for (std::size_t i = 0; i < go.size(); ++i) {
               const double v = xv[i];
               const double cdf = 0.5 * (1.0 + std::erf(v * inv_s2));
               const double pdf = c * std::exp(-0.5 * v * v);
               gx[i] += go[i] * (cdf + v * pdf);
             }
           },
           {&x});
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax_rows");
  const int r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  for (int i = 0; i < r; ++i) {
    const double* row = x.values().data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    if (!std::isfinite(mx)) {
      throw ValueError("softmax_rows: non-finite input");
    }
    double sum = 0.0;
    double* orow = ov.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < c; ++j) orow[j] /= sum;
  }
  finalize(out, "softmax_rows");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to, r, c]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             const auto& yv = to.values();
             for (int i = 0; i < r; ++i) {
               const std::size_t off = static_cast<std::size_t>(i) * c;
               double dot = 0.0;
               for (int j = 0; j < c; ++j) dot += go[off + j] * yv[off + j];
               for (int j = 0; j < c; ++j) {
                 gx[off + j] += (go[off + j] - dot) * yv[off + j];
               }
             }
           },
           {&x});
  }
  return out;
}

Tensor mean_axis(const Tensor& x, int axis) {
  require_matrix(x, "mean_axis");
  if (axis != 0 && axis != 1) throw ShapeError("mean_axis: axis must be 0 or 1");
  const int r = x.rows(), c = x.cols();
  const int out_n = axis == 0 ? c : r;
  Tensor out = Tensor::zeros({out_n});
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  if (axis == 0) {
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) ov[j] += xv[static_cast<std::size_t>(i) * c + j];
    }
    for (int j = 0; j < c; ++j) ov[j] /= r;
  } else {
    for (int i = 0; i < r; ++i) {
      double s = 0.0;
      for (int j = 0; j < c; ++j) s += xv[static_cast<std::size_t>(i) * c + j];
      ov[i] = s / c;
    }
  }
  finalize(out, "mean_axis");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to, axis, r, c]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             if (axis == 0) {
               for (int i = 0; i < r; ++i) {
                 for (int j = 0; j < c; ++j) gx[static_cast<std::size_t>(i) * c + j] += go[j] / r;
               }
             } else {
               for (int i = 0; i < r; ++i) {
                 for (int j = 0; j < c; ++j) gx[static_cast<std::size_t>(i) * c + j] += go[i] / c;
               }
             }
           },
           {&x});
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tensor out = Tensor::zeros({1});
  double s = 0.0;
  for (double v : x.values()) s += v;
  out.mutable_values()[0] = s;
  finalize(out, "sum_all");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to]() mutable {
             if (!tx.requires_grad()) return;
             const double g = to.grad()[0];
             auto& gx = tx.grad();
             for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
           },
           {&x});
  }
  return out;
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  require_matrix(x, "slice_rows");
  if (r0 < 0 || r1 > x.rows() || r0 >= r1) {
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," +
                     std::to_string(r1) + ") invalid for " + shape_str(x.shape()));
  }
  const int c = x.cols();
  Tensor out = Tensor::zeros({r1 - r0, c});
  auto& ov = out.mutable_values();
  std::copy_n(x.values().data() + static_cast<std::size_t>(r0) * c,
              static_cast<std::size_t>(r1 - r0) * c, ov.data());
  finalize(out, "slice_rows");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to, r0, c]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             for (std::size_t i = 0; i < go.size(); ++i) {
               gx[static_cast<std::size_t>(r0) * c + i] += go[i];
             }
           },
           {&x});
  }
  return out;
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
  require_matrix(x, "slice_cols");
  if (c0 < 0 || c1 > x.cols() || c0 >= c1) {
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") invalid for " + shape_str(x.shape()));
  }
  const int r = x.rows(), c = x.cols(), w = c1 - c0;
  Tensor out = Tensor::zeros({r, w});
  auto& ov = out.mutable_values();
  for (int i = 0; i < r; ++i) {
    std::copy_n(x.values().data() + static_cast<std::size_t>(i) * c + c0, w,
                ov.data() + static_cast<std::size_t>(i) * w);
  }
  finalize(out, "slice_cols");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to, c0, r, c, w]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             for (int i = 0; i < r; ++i) {
               for (int j = 0; j < w; ++j) {
                 gx[static_cast<std::size_t>(i) * c + c0 + j] +=
                     go[static_cast<std::size_t>(i) * w + j];
               }
             }
           },
           {&x});
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const int c = parts[0].cols();
  int total = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
    }
    total += p.rows();
  }
  Tensor out = Tensor::zeros({total, c});
  auto& ov = out.mutable_values();
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy_n(p.values().data(), p.size(), ov.data() + off);
    off += p.size();
  }
  finalize(out, "concat_rows");
  bool needs = false;
  for (const Tensor& p : parts) needs = needs || p.requires_grad();
  if (needs && active_tape()) {
    std::vector<Tensor> held(parts.begin(), parts.end());
    Tensor to = out;
    Tape* tape = active_tape();
    out.set_requires_grad(true);
    out.set_tape_id(tape->id());
    for (const Tensor& p : held) {
      if (p.requires_grad() && p.tape_id() != tape->id()) tape->note_leaf(p);
    }
    tape->record([held, to]() mutable {
      const auto& go = to.grad();
      std::size_t off2 = 0;
      for (Tensor& p : held) {
        if (p.requires_grad()) {
          auto& gp = p.grad();
          for (std::size_t i = 0; i < p.size(); ++i) gp[i] += go[off2 + i];
        }
        off2 += p.size();
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int r = parts[0].rows();
  int total = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != r) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()));
    }
    total += p.cols();
  }
  Tensor out = Tensor::zeros({r, total});
  auto& ov = out.mutable_values();
  int coff = 0;
  for (const Tensor& p : parts) {
    const int pc = p.cols();
    for (int i = 0; i < r; ++i) {
      std::copy_n(p.values().data() + static_cast<std::size_t>(i) * pc, pc,
                  ov.data() + static_cast<std::size_t>(i) * total + coff);
    }
    coff += pc;
  }
  finalize(out, "concat_cols");
  bool needs = false;
  for (const Tensor& p : parts) needs = needs || p.requires_grad();
  if (needs && active_tape()) {
    std::vector<Tensor> held(parts.begin(), parts.end());
    Tensor to = out;
    Tape* tape = active_tape();
    out.set_requires_grad(true);
    out.set_tape_id(tape->id());
    for (const Tensor& p : held) {
      if (p.requires_grad() && p.tape_id() != tape->id()) tape->note_leaf(p);
    }
    tape->record([held, to, r, total]() mutable {
      const auto& go = to.grad();
      int coff2 = 0;
      for (Tensor& p : held) {
        const int pc = p.cols();
        if (p.requires_grad()) {
          auto& gp = p.grad();
          for (int i = 0; i < r; ++i) {
            for (int j = 0; j < pc; ++j) {
              gp[static_cast<std::size_t>(i) * pc + j] +=
                  go[static_cast<std::size_t>(i) * total + coff2 + j];
            }
          }
        }
        coff2 += pc;
      }
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  require_matrix(table, "embedding_lookup");
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  const int v = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ValueError("embedding_lookup: id " + std::to_string(id) +
                       " outside table of " + std::to_string(v) + " rows");
    }
  }
  Tensor out = Tensor::zeros({static_cast<int>(ids.size()), d});
  auto& ov = out.mutable_values();
  for (std::size_t t = 0; t < ids.size(); ++t) {
    std::copy_n(table.values().data() + static_cast<std::size_t>(ids[t]) * d, d,
                ov.data() + t * d);
  }
  finalize(out, "embedding_lookup");
  if (want_grad({&table})) {
    Tensor tt = table, to = out;
    std::vector<int> held = ids;
    attach(out,
           [tt, to, held, d]() mutable {
             if (!tt.requires_grad()) return;
             const auto& go = to.grad();
             auto& gt = tt.grad();
             for (std::size_t t = 0; t < held.size(); ++t) {
               for (int j = 0; j < d; ++j) {
                 gt[static_cast<std::size_t>(held[t]) * d + j] += go[t * d + j];
               }
             }
           },
           {&table});
  }
  return out;
}

Tensor masked_fill(const Tensor& x, const std::vector<std::uint8_t>& mask, double value) {
  if (mask.size() != x.size()) {
    throw ShapeError("masked_fill: mask size " + std::to_string(mask.size()) +
                     " does not match " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) {
    ov[i] = mask[i] ? value : xv[i];
  }
  finalize(out, "masked_fill");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    std::vector<std::uint8_t> held = mask;
    attach(out,
           [tx, to, held]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             for (std::size_t i = 0; i < go.size(); ++i) {
               if (!held[i]) gx[i] += go[i];
             }
           },
           {&x});
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(x, "layer_norm");
  const int r = x.rows(), c = x.cols();
  if (gain.rank() != 1 || gain.dim(0) != c || bias.rank() != 1 || bias.dim(0) != c) {
    throw ShapeError("layer_norm: gain/bias do not match " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> inv_sigma(r), xhat(static_cast<std::size_t>(r) * c);
  auto& ov = out.mutable_values();
  for (int i = 0; i < r; ++i) {
    const double* row = x.values().data() + static_cast<std::size_t>(i) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = inv;
    const auto& gv = gain.values();
    const auto& bv = bias.values();
    for (int j = 0; j < c; ++j) {
      const double xh = (row[j] - mean) * inv;
      xhat[static_cast<std::size_t>(i) * c + j] = xh;
      ov[static_cast<std::size_t>(i) * c + j] = xh * gv[j] + bv[j];
    }
  }
  finalize(out, "layer_norm");
  if (want_grad({&x, &gain, &bias})) {
    Tensor tx = x, tg = gain, tb = bias, to = out;
    attach(out,
           [tx, tg, tb, to, inv_sigma, xhat, r, c]() mutable {
             const auto& go = to.grad();
             if (tx.requires_grad()) {
               auto& gx = tx.grad();
               const auto& gv = tg.values();
               for (int i = 0; i < r; ++i) {
                 const std::size_t off = static_cast<std::size_t>(i) * c;
                 double mean_dy = 0.0, mean_dy_xhat = 0.0;
                 for (int j = 0; j < c; ++j) {
                   const double dy = go[off + j] * gv[j];
                   mean_dy += dy;
                   mean_dy_xhat += dy * xhat[off + j];
                 }
                 mean_dy /= c;
                 mean_dy_xhat /= c;
                 for (int j = 0; j < c; ++j) {
                   const double dy = go[off + j] * gv[j];
                   gx[off + j] += inv_sigma[i] * (dy - mean_dy - xhat[off + j] * mean_dy_xhat);
                 }
               }
             }
             if (tg.requires_grad()) {
               auto& gg = tg.grad();
               for (int i = 0; i < r; ++i) {
                 const std::size_t off = static_cast<std::size_t>(i) * c;
                 for (int j = 0; j < c; ++j) gg[j] += go[off + j] * xhat[off + j];
               }
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               for (int i = 0; i < r; ++i) {
                 const std::size_t off = static_cast<std::size_t>(i) * c;
                 for (int j = 0; j < c; ++j) gb[j] += go[off + j];
               }
             }
           },
           {&x, &gain, &bias});
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<std::uint8_t>* active) {
  require_matrix(logits, "cross_entropy");
  const int m = logits.rows(), v = logits.cols();
  if (static_cast<int>(targets.size()) != m) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(m) + " rows");
  }
  if (active && static_cast<int>(active->size()) != m) {
    throw ShapeError("cross_entropy: active mask size mismatch");
  }
  int count = 0;
  for (int i = 0; i < m; ++i) {
    if (active && !(*active)[i]) continue;
    if (targets[i] < 0 || targets[i] >= v) {
      throw ValueError("cross_entropy: target " + std::to_string(targets[i]) +
                       " outside vocabulary of " + std::to_string(v));
    }
    ++count;
  }
  if (count == 0) throw ValueError("cross_entropy: no active positions");
  Tensor out = Tensor::zeros({1});
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    if (active && !(*active)[i]) continue;
    const double* row = logits.values().data() + static_cast<std::size_t>(i) * v;
    double mx = row[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
    total += (mx + std::log(sum)) - row[targets[i]];
  }
  out.mutable_values()[0] = total / count;
  finalize(out, "cross_entropy");
  if (want_grad({&logits})) {
    Tensor tl = logits, to = out;
    std::vector<int> held_t = targets;
    std::vector<std::uint8_t> held_a = active ? *active : std::vector<std::uint8_t>();
    attach(out,
           [tl, to, held_t, held_a, m, v, count]() mutable {
             if (!tl.requires_grad()) return;
             const double g = to.grad()[0] / count;
             auto& gl = tl.grad();
             for (int i = 0; i < m; ++i) {
               if (!held_a.empty() && !held_a[i]) continue;
               const double* row = tl.values().data() + static_cast<std::size_t>(i) * v;
               double mx = row[0];
               for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
               double sum = 0.0;
               for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
               const std::size_t off = static_cast<std::size_t>(i) * v;
               for (int j = 0; j < v; ++j) {
                 const double p = std::exp(row[j] - mx) / sum;
                 gl[off + j] += g * (p - (j == held_t[i] ? 1.0 : 0.0));
               }
             }
           },
           {&logits});
  }
  return out;
}

Tensor rope(const Tensor& x, double base) {
  require_matrix(x, "rope");
  const int t = x.rows(), d = x.cols();
  if (d % 2 != 0) throw ShapeError("rope: head dimension must be even, got " + shape_str(x.shape()));
  const auto table = rope_table(t, d, base);
  const auto& cs = table->cs;
  const auto& sn = table->sn;
  Tensor out = Tensor::zeros(x.shape());
  auto& ov = out.mutable_values();
  const auto& xv = x.values();
  for (int pos = 0; pos < t; ++pos) {
    const std::size_t off = static_cast<std::size_t>(pos) * d;
    const std::size_t toff = static_cast<std::size_t>(pos) * (d / 2);
    for (int j = 0; j < d / 2; ++j) {
      const double c = cs[toff + j], sv = sn[toff + j];
      const double a = xv[off + 2 * j], b = xv[off + 2 * j + 1];
      ov[off + 2 * j] = a * c - b * sv;
      ov[off + 2 * j + 1] = a * sv + b * c;
    }
  }
  finalize(out, "rope");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    attach(out,
           [tx, to, t, d, table]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             const auto& cs2 = table->cs;
             const auto& sn2 = table->sn;
             for (int pos = 0; pos < t; ++pos) {
               const std::size_t off = static_cast<std::size_t>(pos) * d;
               const std::size_t toff = static_cast<std::size_t>(pos) * (d / 2);
               for (int j = 0; j < d / 2; ++j) {
                 const double c = cs2[toff + j], sv = sn2[toff + j];
                 const double ga = go[off + 2 * j], gb = go[off + 2 * j + 1];
                 gx[off + 2 * j] += ga * c + gb * sv;
                 gx[off + 2 * j + 1] += -ga * sv + gb * c;
               }
             }
           },
           {&x});
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  require_matrix(x, "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const int n = x.rows(), c = x.cols();
  for (int r : rows) {
    if (r < 0 || r >= n) throw ValueError("gather_rows: row " + std::to_string(r) + " out of range");
  }
  Tensor out = Tensor::zeros({static_cast<int>(rows.size()), c});
  auto& ov = out.mutable_values();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy_n(x.values().data() + static_cast<std::size_t>(rows[k]) * c, c,
                ov.data() + k * c);
  }
  finalize(out, "gather_rows");
  if (want_grad({&x})) {
    Tensor tx = x, to = out;
    std::vector<int> held = rows;
    attach(out,
           [tx, to, held, c]() mutable {
             if (!tx.requires_grad()) return;
             const auto& go = to.grad();
             auto& gx = tx.grad();
             for (std::size_t k = 0; k < held.size(); ++k) {
               for (int j = 0; j < c; ++j) {
                 gx[static_cast<std::size_t>(held[k]) * c + j] += go[k * c + j];
               }
             }
           },
           {&x});
  }
  return out;
}

Tensor scatter_rows(const Tensor& src, const std::vector<int>& rows, int n_rows) {
  require_matrix(src, "scatter_rows");
  if (static_cast<int>(rows.size()) != src.rows()) {
    throw ShapeError("scatter_rows: " + std::to_string(rows.size()) + " rows for " +
                     shape_str(src.shape()));
  }
  std::unordered_set<int> seen;
  for (int r : rows) {
    if (r < 0 || r >= n_rows) throw ValueError("scatter_rows: row " + std::to_string(r) + " out of range");
    if (!seen.insert(r).second) throw ValueError("scatter_rows: duplicate row " + std::to_string(r));
  }
  const int c = src.cols();
  Tensor out = Tensor::zeros({n_rows, c});
  auto& ov = out.mutable_values();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy_n(src.values().data() + k * c, c,
                ov.data() + static_cast<std::size_t>(rows[k]) * c);
  }
  finalize(out, "scatter_rows");
  if (want_grad({&src})) {
    Tensor ts = src, to = out;
    std::vector<int> held = rows;
    attach(out,
           [ts, to, held, c]() mutable {
             if (!ts.requires_grad()) return;
             const auto& go = to.grad();
             auto& gs = ts.grad();
             for (std::size_t k = 0; k < held.size(); ++k) {
               for (int j = 0; j < c; ++j) {
                 gs[k * c + j] += go[static_cast<std::size_t>(held[k]) * c + j];
               }
             }
           },
           {&src});
  }
  return out;
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
  require_matrix(a, "rowwise_dot");
  require_same_shape(a, b, "rowwise_dot");
  const int n = a.rows(), c = a.cols();
  Tensor out = Tensor::zeros({n});
  auto& ov = out.mutable_values();
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * c;
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += av[off + j] * bv[off + j];
    ov[i] = s;
  }
  finalize(out, "rowwise_dot");
  if (want_grad({&a, &b})) {
    Tensor ta = a, tb = b, to = out;
    attach(out,
           [ta, tb, to, n, c]() mutable {
             const auto& go = to.grad();
             if (ta.requires_grad()) {
               auto& ga = ta.grad();
               const auto& bv = tb.values();
               for (int i = 0; i < n; ++i) {
                 const std::size_t off = static_cast<std::size_t>(i) * c;
                 for (int j = 0; j < c; ++j) ga[off + j] += go[i] * bv[off + j];
               }
             }
             if (tb.requires_grad()) {
               auto& gb = tb.grad();
               const auto& av = ta.values();
               for (int i = 0; i < n; ++i) {
                 const std::size_t off = static_cast<std::size_t>(i) * c;
                 for (int j = 0; j < c; ++j) gb[off + j] += go[i] * av[off + j];
               }
             }
           },
           {&a, &b});
  }
  return out;
}

Tensor weighted_mean_aggregate(const Tensor& h, const Tensor& w,
                               const std::vector<int>& dst,
                               const std::vector<int>& src) {
  require_matrix(h, "weighted_mean_aggregate");
  if (w.rank() != 1 || w.size() != dst.size() || dst.size() != src.size()) {
    throw ShapeError("weighted_mean_aggregate: weights " + shape_str(w.shape()) +
                     " vs " + std::to_string(dst.size()) + " edges");
  }
  const int n = h.rows(), c = h.cols();
  const std::size_t e = dst.size();
  for (std::size_t i = 0; i < e; ++i) {
    if (dst[i] < 0 || dst[i] >= n || src[i] < 0 || src[i] >= n) {
      throw ValueError("weighted_mean_aggregate: edge endpoint out of range");
    }
    if (w.values()[i] < 0.0) {
      throw ValueError("weighted_mean_aggregate: negative edge weight");
    }
  }
  const auto& wv_all = w.values();
  const auto& hv_all = h.values();
  std::vector<double> den(static_cast<std::size_t>(n), 1.0);
  for (std::size_t i = 0; i < e; ++i) den[dst[i]] += wv_all[i];
  Tensor out = Tensor::zeros({n, c});
  auto& ov = out.mutable_values();
  std::copy(hv_all.begin(), hv_all.end(), ov.begin());
  for (std::size_t i = 0; i < e; ++i) {
    const double wv = wv_all[i];
    const double* hs = hv_all.data() + static_cast<std::size_t>(src[i]) * c;
    double* od = ov.data() + static_cast<std::size_t>(dst[i]) * c;
    for (int j = 0; j < c; ++j) od[j] += wv * hs[j];
  }
  for (int u = 0; u < n; ++u) {
    double* row = ov.data() + static_cast<std::size_t>(u) * c;
    for (int j = 0; j < c; ++j) row[j] /= den[u];
  }
  finalize(out, "weighted_mean_aggregate");
  if (want_grad({&h, &w})) {
    Tensor th = h, tw = w, to = out;
    std::vector<int> hd = dst, hs = src;
    attach(out,
           [th, tw, to, hd, hs, den, n, c]() mutable {
             const auto& go = to.grad();
             if (th.requires_grad()) {
               auto& gh = th.grad();
               for (int u = 0; u < n; ++u) {
                 const std::size_t off = static_cast<std::size_t>(u) * c;
                 for (int j = 0; j < c; ++j) gh[off + j] += go[off + j] / den[u];
               }
               const auto& wv_all = tw.values();
               for (std::size_t i = 0; i < hd.size(); ++i) {
                 const double wv = wv_all[i];
                 const std::size_t doff = static_cast<std::size_t>(hd[i]) * c;
                 const std::size_t soff = static_cast<std::size_t>(hs[i]) * c;
                 for (int j = 0; j < c; ++j) gh[soff + j] += wv * go[doff + j] / den[hd[i]];
               }
             }
             if (tw.requires_grad()) {
               auto& gw = tw.grad();
               const auto& hv = th.values();
               const auto& yv = to.values();
               for (std::size_t i = 0; i < hd.size(); ++i) {
                 const std::size_t doff = static_cast<std::size_t>(hd[i]) * c;
                 const std::size_t soff = static_cast<std::size_t>(hs[i]) * c;
                 double s = 0.0;
                 for (int j = 0; j < c; ++j) {
                   s += go[doff + j] * (hv[soff + j] - yv[doff + j]);
                 }
                 gw[i] += s / den[hd[i]];
               }
             }
           },
           {&h, &w});
  }
  return out;
}

}  // namespace dgtl::numerics
