#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/adam.hpp"
#include "dgtl/numerics/checkpoint.hpp"
#include "dgtl/numerics/grad_check.hpp"
#include "dgtl/numerics/ops.hpp"
#include "dgtl/numerics/precision.hpp"
#include "dgtl/numerics/rng.hpp"
#include "dgtl/numerics/tape.hpp"

using namespace dgtl;
using namespace dgtl::numerics;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad = true,
                     double stddev = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.gaussian(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Scalarizes an op output against a fixed random projection so every output
// coordinate contributes to the checked gradient.
Tensor project(const Tensor& y, Rng& rng) {
  std::vector<double> r(y.size());
  for (auto& x : r) x = rng.uniform(-1.0, 1.0);
  return sum_all(mul(y, Tensor::from(y.shape(), std::move(r))));
}

}  // namespace

TEST(OpsTest, SigmoidAtZero) {
  Tensor y = sigmoid(Tensor::scalar(0.0));
  EXPECT_DOUBLE_EQ(y.values()[0], 0.5);
}

TEST(OpsTest, SoftmaxUniformOnEqualInputs) {
  PrecisionGuard guard(Precision::Float64);
  Tensor y = softmax_rows(Tensor::from({1, 3}, {0.0, 0.0, 0.0}));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(y.at(0, j), 1.0 / 3.0, 1e-12);
}

TEST(OpsTest, MatmulOfOnes) {
  Tensor a = Tensor::full({2, 3}, 1.0);
  Tensor b = Tensor::full({3, 1}, 1.0);
  Tensor c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(c.at(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(c.at(1, 0), 3.0);
}

TEST(OpsTest, MatmulShapeMismatchNamesBothShapes) {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 1});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x1]"), std::string::npos);
  }
}

TEST(OpsTest, SoftmaxRowsSumToOneProperty) {
  PrecisionGuard guard(Precision::Float64);
  Rng rng(7);
  for (int it = 0; it < 50; ++it) {
    const int r = 1 + rng.uniform_int(4), c = 1 + rng.uniform_int(6);
    Tensor x = random_tensor(rng, {r, c}, false, 5.0);
    Tensor y = softmax_rows(x);
    for (int i = 0; i < r; ++i) {
      double sum = 0.0;
      for (int j = 0; j < c; ++j) {
        EXPECT_GE(y.at(i, j), 0.0);
        sum += y.at(i, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(BackwardTest, SumOfSquares) {
  PrecisionGuard guard(Precision::Float64);
  Tensor x = Tensor::from({2}, {3.0, -1.0}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = sum_all(mul(x, x));
    tape.backward(loss);
  }
  EXPECT_DOUBLE_EQ(x.grad_view()[0], 6.0);
  EXPECT_DOUBLE_EQ(x.grad_view()[1], -2.0);
}

TEST(BackwardTest, SigmoidGradAtZero) {
  PrecisionGuard guard(Precision::Float64);
  Tensor x = Tensor::scalar(0.0, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = sigmoid(x);
    tape.backward(loss);
  }
  EXPECT_NEAR(x.grad_view()[0], 0.25, 1e-12);
}

TEST(BackwardTest, AccumulationAcrossMultipleUses) {
  PrecisionGuard guard(Precision::Float64);
  Tensor x = Tensor::from({2}, {1.5, -0.5}, true);
  // y = x + x: gradient should be exactly the sum of both single-use grads.
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = sum_all(add(x, x));
    tape.backward(loss);
  }
  EXPECT_DOUBLE_EQ(x.grad_view()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad_view()[1], 2.0);
}

TEST(BackwardTest, NonScalarLossRejected) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = mul(x, x);
  EXPECT_THROW(tape.backward(y), ValueError);
}

TEST(BackwardTest, DoubleBackwardRejected) {
  Tensor x = Tensor::scalar(1.0, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum_all(mul(x, x));
  }
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), ValueError);
}

TEST(BackwardTest, FrozenTensorsReceiveNoGradient) {
  PrecisionGuard guard(Precision::Float64);
  Tensor w = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0}, false);
  Tensor x = Tensor::from({1, 2}, {1.0, -1.0}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = sum_all(matmul(x, w));
    auto leaves = tape.backward(loss);
    ASSERT_EQ(leaves.size(), 1u);
    EXPECT_TRUE(leaves[0].same_storage(x));
  }
  EXPECT_FALSE(w.has_grad());
}

TEST(BackwardTest, SmallMlpMatchesFiniteDifferences) {
  PrecisionGuard guard(Precision::Float64);
  Rng rng(11);
  Tensor x = random_tensor(rng, {1, 2});
  Tensor w1 = random_tensor(rng, {2, 3});
  Tensor b1 = random_tensor(rng, {3});
  Tensor w2 = random_tensor(rng, {3, 1});
  Tensor b2 = random_tensor(rng, {1});
  std::vector<Tensor> params = {x, w1, b1, w2, b2};
  auto fn = [&]() {
    Tensor h = relu(add_bias(matmul(x, w1), b1));
    Tensor o = add_bias(matmul(h, w2), b2);
    return sum_all(sigmoid(o));
  };
  auto report = grad_check(fn, params);
  EXPECT_LT(report.max_rel_error, 1e-4);
  EXPECT_EQ(report.coords_checked, 2u + 6u + 3u + 3u + 1u);
}

// Analytic Jacobian-vector products vs central differences for every op,
// over randomized shapes.
TEST(OpGradientsTest, AllOpsMatchFiniteDifferences) {
  PrecisionGuard guard(Precision::Float64);
  Rng rng(17);
  for (int round = 0; round < 5; ++round) {
    const int n = 2 + rng.uniform_int(3);
    const int m = 2 + rng.uniform_int(3);
    const int k = 2 + rng.uniform_int(3);

    {  // add / sub / mul / scale / add_scalar
      Tensor a = random_tensor(rng, {n, m});
      Tensor b = random_tensor(rng, {n, m});
      std::vector<Tensor> params = {a, b};
      Rng proj_rng(round * 101 + 1);
      auto run = [&](const std::function<Tensor()>& make) {
        Rng local(proj_rng.next_u64());
        auto fn = [&]() {
          Rng frozen(local);  // copy: same projection on every call
          return project(make(), frozen);
        };
        auto rep = grad_check(fn, params);
        EXPECT_LT(rep.max_rel_error, 1e-4);
      };
      run([&]() { return add(a, b); });
      run([&]() { return sub(a, b); });
      run([&]() { return mul(a, b); });
      run([&]() { return scale(a, -1.7); });
      run([&]() { return add_scalar(a, 0.3); });
    }

    {  // matmul, all transpose combinations
      Tensor a = random_tensor(rng, {n, k});
      Tensor at = random_tensor(rng, {k, n});
      Tensor b = random_tensor(rng, {k, m});
      Tensor bt = random_tensor(rng, {m, k});
      auto run = [&](std::vector<Tensor> params, const std::function<Tensor()>& make,
                     std::uint64_t tag) {
        Rng local(tag);
        auto fn = [&]() {
          Rng frozen(local);
          return project(make(), frozen);
        };
        auto rep = grad_check(fn, params);
        EXPECT_LT(rep.max_rel_error, 1e-4);
      };
      run({a, b}, [&]() { return matmul(a, b); }, 1);
      run({a, bt}, [&]() { return matmul(a, bt, false, true); }, 2);
      run({at, b}, [&]() { return matmul(at, b, true, false); }, 3);
      run({at, bt}, [&]() { return matmul(at, bt, true, true); }, 4);
    }

    {  // unary: sigmoid, gelu, relu (inputs kept away from the kink), rope
      Tensor x = random_tensor(rng, {n, 4});
      auto run = [&](std::vector<Tensor> params, const std::function<Tensor()>& make,
                     std::uint64_t tag) {
        Rng local(tag + 100);
        auto fn = [&]() {
          Rng frozen(local);
          return project(make(), frozen);
        };
        auto rep = grad_check(fn, params);
        EXPECT_LT(rep.max_rel_error, 1e-4);
      };
      run({x}, [&]() { return sigmoid(x); }, 1);
      run({x}, [&]() { return gelu(x); }, 2);
      run({x}, [&]() { return rope(x); }, 3);
      std::vector<double> vr(static_cast<std::size_t>(n) * 4);
      for (auto& v : vr) {
        v = rng.gaussian();
        if (std::fabs(v) < 0.05) v = 0.3;
      }
      Tensor xr = Tensor::from({n, 4}, std::move(vr), true);
      run({xr}, [&]() { return relu(xr); }, 4);
    }

    {  // structural ops
      Tensor x = random_tensor(rng, {4, 6});
      Tensor g = random_tensor(rng, {6});
      Tensor b = random_tensor(rng, {6});
      auto run = [&](std::vector<Tensor> params, const std::function<Tensor()>& make,
                     std::uint64_t tag) {
        Rng local(tag + 200);
        auto fn = [&]() {
          Rng frozen(local);
          return project(make(), frozen);
        };
        auto rep = grad_check(fn, params);
        EXPECT_LT(rep.max_rel_error, 1e-4);
      };
      run({x}, [&]() { return softmax_rows(x); }, 1);
      run({x}, [&]() { return mean_axis(x, 0); }, 2);
      run({x}, [&]() { return mean_axis(x, 1); }, 3);
      run({x}, [&]() { return slice_rows(x, 1, 3); }, 4);
      run({x}, [&]() { return slice_cols(x, 2, 5); }, 5);
      run({x, g, b}, [&]() { return layer_norm(x, g, b); }, 6);
      run({x, g}, [&]() { return add_bias(x, g); }, 7);
      std::vector<std::uint8_t> mask(24, 0);
      for (std::size_t i = 0; i < mask.size(); i += 3) mask[i] = 1;
      run({x}, [&]() { return masked_fill(x, mask, -5.0); }, 8);
      run({x}, [&]() { return gather_rows(x, {0, 2, 2, 3}); }, 9);
      Tensor s = random_tensor(rng, {2, 6});
      run({s}, [&]() { return scatter_rows(s, {3, 0}, 5); }, 10);
      Tensor y = random_tensor(rng, {4, 6});
      run({x, y}, [&]() { return rowwise_dot(x, y); }, 11);
      Tensor parts0 = random_tensor(rng, {2, 3});
      Tensor parts1 = random_tensor(rng, {2, 2});
      run({parts0, parts1},
          [&]() {
            std::vector<Tensor> ps = {parts0, parts1};
            return concat_cols(ps);
          },
          12);
      Tensor q0 = random_tensor(rng, {2, 3});
      Tensor q1 = random_tensor(rng, {1, 3});
      run({q0, q1},
          [&]() {
            std::vector<Tensor> ps = {q0, q1};
            return concat_rows(ps);
          },
          13);
    }

    {  // embedding, cross-entropy, weighted aggregation
      Tensor table = random_tensor(rng, {5, 3});
      std::vector<int> ids = {1, 4, 1, 0};
      Rng local(round + 300);
      auto fn_embed = [&]() {
        Rng frozen(local);
        return project(embedding_lookup(table, ids), frozen);
      };
      std::vector<Tensor> p1 = {table};
      EXPECT_LT(grad_check(fn_embed, p1).max_rel_error, 1e-4);

      Tensor logits = random_tensor(rng, {3, 5});
      std::vector<int> targets = {2, 0, 4};
      std::vector<std::uint8_t> active = {1, 0, 1};
      auto fn_ce = [&]() { return cross_entropy(logits, targets, &active); };
      std::vector<Tensor> p2 = {logits};
      EXPECT_LT(grad_check(fn_ce, p2).max_rel_error, 1e-4);

      Tensor h = random_tensor(rng, {4, 3});
      std::vector<int> dst = {0, 1, 1, 2, 3};
      std::vector<int> src = {1, 0, 2, 1, 0};
      std::vector<double> wv(dst.size());
      for (auto& v : wv) v = rng.uniform(0.1, 1.0);
      const int n_edges = static_cast<int>(wv.size());
      Tensor w = Tensor::from({n_edges}, std::move(wv), true);
      Rng local2(round + 400);
      auto fn_agg = [&]() {
        Rng frozen(local2);
        return project(weighted_mean_aggregate(h, w, dst, src), frozen);
      };
      std::vector<Tensor> p3 = {h, w};
      EXPECT_LT(grad_check(fn_agg, p3).max_rel_error, 1e-4);
    }
  }
}

TEST(AdamTest, FirstStepMagnitude) {
  Tensor x = Tensor::scalar(0.0, true);
  x.grad()[0] = 2.0;
  AdamConfig cfg;
  cfg.lr = 0.001;
  AdamState state(cfg);
  std::vector<Tensor> params = {x};
  ASSERT_TRUE(state.step(params));
  const double expected = -cfg.lr * 2.0 / (std::sqrt(4.0) + cfg.epsilon);
  EXPECT_NEAR(x.values()[0], expected, 1e-6);
  EXPECT_EQ(state.step_count(), 1);
}

TEST(AdamTest, ZeroGradientIsIdentity) {
  Tensor x = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
  x.zero_grad();
  AdamState state;
  std::vector<Tensor> params = {x};
  ASSERT_TRUE(state.step(params));
  EXPECT_DOUBLE_EQ(x.values()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.values()[1], -2.0);
  EXPECT_DOUBLE_EQ(x.values()[2], 0.5);
}

TEST(AdamTest, DeterministicAcrossIdenticalRuns) {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor(rng, {4}, true);
    AdamState state;
    std::vector<Tensor> params = {x};
    for (int i = 0; i < 10; ++i) {
      x.zero_grad();
      auto& g = x.grad();
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = rng.gaussian();
      state.step(params);
    }
    return x.values();
  };
  EXPECT_EQ(run(5), run(5));
}

TEST(AdamTest, NanGradientSkipsUpdate) {
  Tensor x = Tensor::scalar(1.0, true);
  x.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  AdamState state;
  std::vector<Tensor> params = {x};
  EXPECT_FALSE(state.step(params));
  EXPECT_DOUBLE_EQ(x.values()[0], 1.0);
  EXPECT_EQ(state.step_count(), 0);
}

TEST(GradCheckTest, QuadraticIsExact) {
  PrecisionGuard guard(Precision::Float64);
  Tensor x = Tensor::from({3}, {0.7, -1.3, 2.2}, true);
  std::vector<Tensor> params = {x};
  auto fn = [&]() { return sum_all(mul(x, x)); };
  auto rep = grad_check(fn, params);
  EXPECT_LT(rep.max_rel_error, 1e-8);
}

TEST(GradCheckTest, ConstantFunctionHasZeroError) {
  PrecisionGuard guard(Precision::Float64);
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  std::vector<Tensor> params = {x};
  auto fn = [&]() { return scale(sum_all(mul(x, Tensor::zeros({2}))), 1.0); };
  auto rep = grad_check(fn, params);
  EXPECT_DOUBLE_EQ(rep.max_rel_error, 0.0);
}

TEST(GradCheckTest, RequiresFloat64Mode) {
  PrecisionGuard guard(Precision::Float32);
  Tensor x = Tensor::scalar(1.0, true);
  std::vector<Tensor> params = {x};
  auto fn = [&]() { return mul(x, x); };
  EXPECT_THROW(grad_check(fn, params), ValueError);
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngTest, DifferentSeedsDiverge) {
  Rng a(1), b(2);
  bool differ = false;
  for (int i = 0; i < 100 && !differ; ++i) differ = a.next_u64() != b.next_u64();
  EXPECT_TRUE(differ);
}

TEST(RngTest, GaussianMeanNearZero) {
  Rng rng(123);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += rng.gaussian();
  EXPECT_LT(std::fabs(sum / n), 0.02);
}

TEST(RngTest, UniformIntBoundsAndDeterminism) {
  Rng a(9), b(9);
  for (int i = 0; i < 200; ++i) {
    const int x = a.uniform_int(7);
    EXPECT_GE(x, 0);
    EXPECT_LT(x, 7);
    EXPECT_EQ(x, b.uniform_int(7));
  }
}

TEST(RngTest, CategoricalRespectsZeroWeights) {
  Rng rng(4);
  std::vector<double> w = {0.0, 1.0, 0.0};
  for (int i = 0; i < 50; ++i) EXPECT_EQ(rng.categorical(w), 1);
}

TEST(CheckpointTest, GoldenBytes) {
  Tensor t = Tensor::from({2}, {1.0, -2.0});
  std::vector<NamedTensor> ts = {{"t", t}};
  const std::string bytes = serialize_checkpoint(ts);
  const unsigned char expected[] = {
      'D', 'G', 'T', 'L', '0', '0', '0', '1',      // magic
      0x01, 0x00, 0x00, 0x00,                      // name length
      't',                                         // name
      0x01, 0x00, 0x00, 0x00,                      // rank
      0x02, 0x00, 0x00, 0x00,                      // dim 0
      0x00, 0x00, 0x80, 0x3f,                      // 1.0f
      0x00, 0x00, 0x00, 0xc0,                      // -2.0f
      0x00, 0x00, 0x00, 0x00,                      // end marker
  };
  ASSERT_EQ(bytes.size(), sizeof(expected));
  for (std::size_t i = 0; i < sizeof(expected); ++i) {
    EXPECT_EQ(static_cast<unsigned char>(bytes[i]), expected[i]) << "byte " << i;
  }
}

TEST(CheckpointTest, RoundTrip) {
  Rng rng(31);
  std::vector<NamedTensor> ts;
  ts.push_back({"alpha", random_tensor(rng, {3, 4}, false)});
  ts.push_back({"beta.bias", random_tensor(rng, {7}, false)});
  const std::string bytes = serialize_checkpoint(ts);
  auto loaded = parse_checkpoint(bytes);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].name, "alpha");
  EXPECT_EQ(loaded[1].name, "beta.bias");
  EXPECT_EQ(loaded[0].tensor.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < ts[0].tensor.size(); ++i) {
    EXPECT_EQ(static_cast<float>(loaded[0].tensor.values()[i]),
              static_cast<float>(ts[0].tensor.values()[i]));
  }
  // Serialization of the parsed tensors reproduces the bytes exactly.
  EXPECT_EQ(serialize_checkpoint(loaded), bytes);
}

TEST(CheckpointTest, RejectsBadMagic) {
  EXPECT_THROW(parse_checkpoint("NOPE0001"), CheckpointError);
}

TEST(PrecisionTest, Float32ModeRoundsStoredValues) {
  PrecisionGuard guard(Precision::Float32);
  Tensor x = Tensor::from({1}, {0.1});
  EXPECT_EQ(x.values()[0], static_cast<double>(0.1f));
}

TEST(PrecisionTest, NonFiniteThrowsInFloat64) {
  PrecisionGuard guard(Precision::Float64);
  Tensor x = Tensor::from({1}, {1e308});
  EXPECT_THROW(mul(x, x), NonFiniteError);
}

TEST(PrecisionTest, NonFiniteCountsWarningInFloat32) {
  PrecisionGuard guard(Precision::Float32);
  reset_nonfinite_warnings();
  Tensor x = Tensor::from({1}, {1e38});
  (void)mul(x, x);
  EXPECT_EQ(nonfinite_warnings(), 1u);
  reset_nonfinite_warnings();
}

TEST(TapeTest, LeavesReportedInRegistrationOrder) {
  PrecisionGuard guard(Precision::Float64);
  Tensor a = Tensor::scalar(1.0, true);
  Tensor b = Tensor::scalar(2.0, true);
  Tape tape;
  std::vector<Tensor> leaves;
  {
    TapeScope scope(tape);
    Tensor loss = sum_all(mul(a, b));
    leaves = tape.backward(loss);
  }
  ASSERT_EQ(leaves.size(), 2u);
  EXPECT_TRUE(leaves[0].same_storage(a));
  EXPECT_TRUE(leaves[1].same_storage(b));
  EXPECT_DOUBLE_EQ(a.grad_view()[0], 2.0);
  EXPECT_DOUBLE_EQ(b.grad_view()[0], 1.0);
}

TEST(TapeTest, NoRecordingWithoutActiveTape) {
  Tensor a = Tensor::scalar(1.0, true);
  Tensor y = mul(a, a);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(y.tape_id(), 0u);
}
