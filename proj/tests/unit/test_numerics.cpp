#include <gtest/gtest.h>

#include <cmath>

#include "ciat/numerics/grad_check.hpp"
#include "ciat/numerics/ops.hpp"
#include "grad_suite.hpp"

using namespace ciat;

namespace {

Var<double> vec(std::initializer_list<double> v, bool grad = false) { return Var<double>(Tensor<double>::vector(v), grad); }

}  // namespace

TEST(Softmax, UniformInput) {
  auto y = ops::softmax(vec({2.5, 2.5, 2.5})).value();
  for (double p : y.data()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariant) {
  auto a = ops::softmax(vec({0.3, -1.2, 2.0})).value();
  auto b = ops::softmax(vec({10.3, 8.8, 12.0})).value();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Softmax, ZeroAndLogThree) {
  auto y = ops::softmax(vec({0.0, std::log(3.0)})).value();
  EXPECT_NEAR(y[0], 0.25, 1e-12);
  EXPECT_NEAR(y[1], 0.75, 1e-12);
}

TEST(Softmax, RowsSumToOne) {
  std::mt19937_64 rng(3);
  auto y = ops::softmax(Var<float>(fixtures::random_tensor<float>({6, 9}, rng, 4.0))).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      EXPECT_GE(y[r * 9 + c], 0.0f);
      s += y[r * 9 + c];
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Softmax, EmptyAxisThrows) {
  EXPECT_THROW(ops::softmax(Var<double>(Tensor<double>(Shape{3, 0}))), ShapeError);
}

TEST(LayerNorm, ConstantVectorMapsToZero) {
  auto y = ops::layer_norm(vec({5, 5, 5, 5}), vec({1, 1, 1, 1}), vec({0, 0, 0, 0}), 1e-6).value();
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, PlusMinusOne) {
  auto y = ops::layer_norm(vec({1, -1}), vec({1, 1}), vec({0, 0}), 0.0).value();
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], -1.0);
}

TEST(LayerNorm, ScaleInvariantAndNormalized) {
  std::mt19937_64 rng(4);
  auto x = fixtures::random_tensor<double>({5, 8}, rng);
  Var<double> g(Tensor<double>({8}, 1.0)), b(Tensor<double>({8}, 0.0));
  auto y1 = ops::layer_norm(Var<double>(x), g, b, 1e-12).value();
  Tensor<double> x3 = x;
  for (auto& v : x3.data()) v *= 3.0;
  auto y3 = ops::layer_norm(Var<double>(x3), g, b, 1e-12).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double mu = 0, var = 0;
    for (std::size_t c = 0; c < 8; ++c) mu += y1[r * 8 + c];
    mu /= 8;
    for (std::size_t c = 0; c < 8; ++c) var += (y1[r * 8 + c] - mu) * (y1[r * 8 + c] - mu);
    EXPECT_LT(std::abs(mu), 1e-6);
    EXPECT_NEAR(var / 8, 1.0, 1e-6);
  }
  for (std::size_t i = 0; i < y1.numel(); ++i) EXPECT_NEAR(y1[i], y3[i], 1e-9);
}

TEST(LayerNorm, DimensionBelowTwoThrows) {
  EXPECT_THROW(ops::layer_norm(vec({1.0}), vec({1.0}), vec({0.0}), 1e-6), ShapeError);
}

TEST(Backward, Square) {
  auto x = vec({1.0}, true);
  backward(ops::sum(ops::mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
}

TEST(Backward, Linear) {
  auto x = vec({-2.0, 0.5, 7.0}, true);
  backward(ops::sum(ops::scale(x, 3.0)));
  for (double g : x.grad().data()) EXPECT_DOUBLE_EQ(g, 3.0);
}

TEST(Backward, NonScalarLossThrows) {
  auto x = vec({1.0, 2.0}, true);
  EXPECT_THROW(backward(ops::scale(x, 2.0)), Error);
}

TEST(Backward, SharedSubexpressionVisitedOnce) {
  // y = (x*x) used twice: d/dx (2 x^2) = 4x
  auto x = vec({1.5}, true);
  auto sq = ops::mul(x, x);
  backward(ops::sum(ops::add(sq, sq)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, FrozenAndUnusedParametersGetNoGradient) {
  auto x = vec({1.0, 2.0}, true);
  auto frozen = vec({3.0, 4.0}, false);
  auto unused = vec({5.0}, true);
  backward(ops::sum(ops::mul(x, frozen)));
  EXPECT_TRUE(x.has_grad());
  EXPECT_FALSE(frozen.has_grad());
  EXPECT_FALSE(unused.has_grad());
}

TEST(Backward, NoGradGuardRecordsNothing) {
  auto x = vec({1.0}, true);
  Var<double> y;
  {
    NoGradGuard guard;
    y = ops::scale(x, 2.0);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(backward(ops::sum(y)), Error);
}

TEST(Backward, Deterministic) {
  std::mt19937_64 rng(8);
  auto t = fixtures::random_tensor<double>({4, 6}, rng);
  auto run = [&] {
    Var<double> x(t, true);
    backward(fixtures::project(ops::softmax(ops::relu(x)), 3));
    return x.grad();
  };
  EXPECT_TRUE(run().bit_identical(run()));
}

TEST(GradCheck, Quadratic) {
  auto x = vec({0.3, -1.1, 2.0}, true);
  auto report = grad_check([&] { return ops::sum(ops::mul(x, x)); }, {{"x", x}});
  EXPECT_LT(report.max_rel_err, 1e-8);
  EXPECT_EQ(report.worst_param, "x");
}

TEST(GradCheck, DetectsNonDeterminism) {
  auto x = vec({1.0}, true);
  int calls = 0;
  EXPECT_THROW(grad_check([&] { return ops::sum(ops::scale(x, 1.0 + ++calls)); }, {{"x", x}}), Error);
}

TEST(GradCheck, FlagsWrongGradient) {
  // relu at exactly 0 has a one-sided derivative; FD sees the average.
  auto x = vec({0.0}, true);
  auto report = grad_check([&] { return ops::sum(ops::relu(x)); }, {{"x", x}});
  EXPECT_GT(report.max_rel_err, 0.1);
}

TEST(GradCheck, EveryPrimitiveMatchesFiniteDifferences) {
  for (const auto& c : fixtures::primitive_grad_cases()) {
    EXPECT_LT(c.report.max_rel_err, 1e-6) << c.name << " worst " << c.report.worst_param;
  }
}

TEST(GradCheck, PrimitivesAtSinglePrecision) {
  // 32-bit analytic gradients against a 64-bit finite-difference reference.
  std::mt19937_64 rng(12);
  auto xt = fixtures::random_tensor<double>({3, 6}, rng);
  auto gt = fixtures::random_tensor<double>({6}, rng);
  auto bt = fixtures::random_tensor<double>({6}, rng);
  Var<float> x(xt.cast<float>(), true), g(gt.cast<float>(), true), b(bt.cast<float>(), true);
  auto weights = fixtures::random_tensor<double>({3, 6}, rng);
  backward(ops::sum(ops::mul(ops::layer_norm(x, g, b, 1e-6f), Var<float>(weights.cast<float>()))));
  Var<double> xd(xt, true), gd(gt, true), bd(bt, true);
  auto f = [&] { return ops::sum(ops::mul(ops::layer_norm(xd, gd, bd, 1e-6), Var<double>(weights))); };
  auto report = grad_check(f, {{"x", xd}, {"g", gd}, {"b", bd}});
  ASSERT_LT(report.max_rel_err, 1e-6);
  for (std::size_t i = 0; i < xt.numel(); ++i) {
    const double a = x.grad()[i], n = xd.grad()[i];
    EXPECT_LT(std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-2}), 1e-4);
  }
}

TEST(Ops, EmbeddingRejectsOutOfRangeIds) {
  Var<double> table(Tensor<double>({4, 2}));
  const std::vector<std::int32_t> ids{0, 4};
  EXPECT_THROW(ops::embedding(table, std::span(ids), Shape{2}), Error);
}

TEST(Ops, CrossEntropyAllPaddingThrows) {
  Var<double> logits(Tensor<double>({2, 3}));
  const std::vector<std::int32_t> t{0, 0};
  EXPECT_THROW(ops::cross_entropy(logits, std::span(t), 0.0, 0), Error);
}

TEST(Ops, MaskedSoftmaxHidesInvisibleKeys) {
  ops::AttentionMask mask{1, 1, 3, {1, 0, 1}};
  auto y = ops::masked_softmax(Var<double>(Tensor<double>({1, 1, 3}, std::vector<double>{0.0, 5.0, 0.0})), mask, 1)
               .value();
  EXPECT_EQ(y[1], 0.0);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(Ops, LinearHandComputed) {
  Var<double> x(Tensor<double>({1, 2}, std::vector<double>{1, 2}));
  Var<double> w(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3, 4}));
  auto y = ops::linear(x, w, vec({0.5, -0.5})).value();
  EXPECT_DOUBLE_EQ(y[0], 7.5);
  EXPECT_DOUBLE_EQ(y[1], 9.5);
}
