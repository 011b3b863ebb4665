#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gradcheck.hpp"
#include "ovenet/ops.hpp"
#include "ovenet/tensor.hpp"

using namespace ovenet;
using ovenet::testing::gradcheck;
using ovenet::testing::project;
using ovenet::testing::random_tensor;

TEST(Tensor, ShapeAndFill) {
  Tensor<float> t(Shape{2, 3}, 1.5f);
  EXPECT_EQ(t.numel(), 6);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3);
  EXPECT_FLOAT_EQ(t[4], 1.5f);
  EXPECT_THROW(t.dim(2), ShapeError);
  EXPECT_THROW(t.item(), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_EQ(Tensor<double>::scalar(3.0).item(), 3.0);
}

TEST(Tensor, DetachIsDeepCopy) {
  Tensor<double> a(Shape{2}, std::vector<double>{1, 2});
  auto b = a.detach();
  b.mutable_values()[0] = 9;
  EXPECT_EQ(a[0], 1);
  EXPECT_FALSE(a.same_storage(b));
}

TEST(Tape, ChainRuleOnSmallGraph) {
  Tensor<double> x(Shape{3}, std::vector<double>{1, 2, 3});
  Tensor<double> y(Shape{3}, std::vector<double>{4, 5, 6});
  {
    Tape<double> tape;
    tape.watch(x);
    tape.watch(y);
    // loss = sum(x*y + x) -> dx = y + 1, dy = x
    auto loss = sum(add(mul(x, y), x));
    EXPECT_EQ(loss.item(), 4 + 10 + 18 + 6);
    tape.backward(loss);
  }
  EXPECT_EQ(x.grad(), (std::vector<double>{5, 6, 7}));
  EXPECT_EQ(y.grad(), (std::vector<double>{1, 2, 3}));
  EXPECT_FALSE(x.tracked());
}

TEST(Tape, SharedSubexpressionAccumulates) {
  Tensor<double> x(Shape{1}, std::vector<double>{3});
  {
    Tape<double> tape;
    tape.watch(x);
    auto sq = mul(x, x);
    auto loss = sum(add(sq, sq));  // 2x^2
    tape.backward(loss);
  }
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Tape, UnreachedLeafGetsZeros) {
  Tensor<double> x(Shape{2}, 1.0), unused(Shape{3}, 2.0);
  Tape<double> tape;
  tape.watch(x);
  tape.watch(unused);
  tape.backward(sum(x));
  EXPECT_EQ(unused.grad(), (std::vector<double>{0, 0, 0}));
}

TEST(Tape, MisuseIsReported) {
  Tensor<double> x(Shape{2}, 1.0);
  Tape<double> tape;
  tape.watch(x);
  EXPECT_THROW(x.mutable_values(), Error);
  auto s = sum(x);
  EXPECT_THROW(tape.backward(x), ShapeError);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), Error);
  Tape<double> other;
  Tensor<double> z(Shape{2}, 1.0);
  EXPECT_THROW(other.watch(x), Error);
  (void)z;
}

TEST(Tape, MixingTapesIsAnError) {
  Tensor<double> a(Shape{1}, 1.0), b(Shape{1}, 2.0);
  Tape<double> t1, t2;
  t1.watch(a);
  t2.watch(b);
  EXPECT_THROW(add(a, b), Error);
}

TEST(Tape, NonFiniteOutputNamesTheOp) {
  Tensor<double> x(Shape{1}, std::vector<double>{800.0});
  Tape<double> tape;
  tape.watch(x);
  try {
    exp(x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
}

TEST(Ops, ScalarBroadcast) {
  Tensor<double> a(Shape{3}, std::vector<double>{1, 2, 3});
  auto s = Tensor<double>::scalar(2.0);
  const auto m = mul(a, s);
  EXPECT_EQ(std::vector<double>(m.values().begin(), m.values().end()), (std::vector<double>{2, 4, 6}));
  EXPECT_THROW(add(a, Tensor<double>(Shape{2}, 1.0)), ShapeError);
}

TEST(Ops, StrictAndClampedLog) {
  Tensor<double> z(Shape{1}, std::vector<double>{0.0});
  EXPECT_THROW(log(z), NumericError);
  EXPECT_DOUBLE_EQ(log(z, NumericMode::kClamped).item(), std::log(kClampEpsilon));
  EXPECT_THROW(div(Tensor<double>::scalar(1.0), z), NumericError);
}

TEST(Ops, SliceConcatReshape) {
  Tensor<double> a(Shape{2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5});
  auto s = slice(a, 1, 1, 2);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_EQ(std::vector<double>(s.values().begin(), s.values().end()), (std::vector<double>{1, 2, 4, 5}));
  auto c = concat<double>({slice(a, 1, 0, 1), s}, 1);
  EXPECT_EQ(std::vector<double>(c.values().begin(), c.values().end()),
            std::vector<double>(a.values().begin(), a.values().end()));
  EXPECT_THROW(slice(a, 1, 2, 2), ShapeError);
  EXPECT_THROW(reshape(a, Shape{4}), ShapeError);
  EXPECT_EQ(reshape(a, Shape{3, 2}).shape(), (Shape{3, 2}));
}

TEST(Ops, MaxOverAxisGradientGoesToFirstMax) {
  Tensor<double> a(Shape{1, 3}, std::vector<double>{2, 5, 5});
  {
    Tape<double> tape;
    tape.watch(a);
    auto m = max_over_axis(a, 1);
    EXPECT_EQ(m.item(), 5);
    tape.backward(sum(m));
  }
  EXPECT_EQ(a.grad(), (std::vector<double>{0, 1, 0}));
}

class OpGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{7};
};

TEST_F(OpGradients, Elementwise) {
  auto a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng, 0.5, 2.0);
  auto f = [](const std::vector<Tensor<double>>& x) {
    auto t = add(mul(x[0], x[1]), sub(div(x[0], x[1]), neg(x[0])));
    t = add(t, add_scalar(scale(tanh(x[0]), 0.7), 0.1));
    t = add(t, add(exp(x[0]), log(x[1])));
    return project(t);
  };
  EXPECT_LE(gradcheck(f, {a, b}).rel_error, 1e-6);
}

TEST_F(OpGradients, Reductions) {
  auto a = random_tensor({2, 4, 3}, rng);
  auto f = [](const std::vector<Tensor<double>>& x) {
    return add(project(max_over_axis(x[0], 1)), scale(mean(mul(x[0], x[0])), 2.0));
  };
  EXPECT_LE(gradcheck(f, {a}).rel_error, 1e-6);
}

TEST_F(OpGradients, ShapeOps) {
  auto a = random_tensor({2, 3, 2}, rng), b = random_tensor({2, 1, 2}, rng);
  auto f = [](const std::vector<Tensor<double>>& x) {
    auto c = concat<double>({x[0], x[1]}, 1);
    return project(reshape(slice(c, 1, 1, 3), Shape{12}));
  };
  EXPECT_LE(gradcheck(f, {a, b}).rel_error, 1e-6);
}
