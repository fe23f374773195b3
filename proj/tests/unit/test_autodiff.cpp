#include <gtest/gtest.h>

#include <cmath>

#include "xamr/autodiff.hpp"
#include "xamr/random.hpp"

namespace xamr::ad {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = uniform_real(rng, -scale, scale);
  return Tensor(std::move(shape), std::move(v));
}

void expect_gradients_match(const ScalarFunction& f, const std::vector<Tensor>& point) {
  const GradCheckResult r = grad_check(f, point);
  EXPECT_LT(r.max_relative_error, 1e-4) << "absolute " << r.max_absolute_error;
}

TEST(Tensor, ShapeValidation) {
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0}), ShapeMismatch);
  EXPECT_THROW(Tensor({0, 2}), ShapeMismatch);
  EXPECT_EQ(Tensor({2, 3}).size(), 6u);
}

TEST(Primitives, ForwardExamples) {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = t.constant(Tensor::matrix(3, 1, {1, 0, -1}));
  const Tensor& m = t.value(t.matmul(a, b));
  EXPECT_EQ(m.shape(), (Shape{2, 1}));
  EXPECT_EQ(m[0], -2.0);
  EXPECT_EQ(m[1], -2.0);

  const Tensor& s = t.value(t.softmax_rows(t.constant(Tensor::matrix(1, 2, {0, 0}))));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);

  EXPECT_THROW(t.matmul(a, a), ShapeMismatch);
  EXPECT_THROW(t.add(a, b), ShapeMismatch);
}

TEST(Primitives, CrossEntropyLimit) {
  double previous = 1e9;
  for (double gap : {1.0, 5.0, 20.0, 50.0}) {
    Tape t;
    Var logits = t.constant(Tensor::matrix(2, 3, {gap, 0, 0, 0, 0, gap}));
    const double loss = t.value(t.cross_entropy(logits, {0, 2}))[0];
    EXPECT_LT(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-20);
}

TEST(Primitives, CrossEntropyIgnoresPadRows) {
  Tape t;
  Var logits = t.constant(Tensor::matrix(2, 2, {0, 0, 3, -3}));
  EXPECT_DOUBLE_EQ(t.value(t.cross_entropy(logits, {1, 0}, 0))[0], std::log(2.0));
}

TEST(Primitives, NonFiniteAborts) {
  Tape t;
  Var a = t.constant(Tensor::matrix(1, 1, {1e308}));
  EXPECT_THROW(t.add(a, a), NonFinite);
}

TEST(Backward, SquareAndUnusedInput) {
  Tape t;
  Var x = t.parameter(Tensor::scalar(3.0));
  Var y = t.parameter(Tensor::scalar(7.0));
  Var loss = t.mul(x, x);
  const Gradients g = t.backward(loss);
  EXPECT_EQ(g.of(x)[0], 6.0);
  EXPECT_EQ(g.of(y)[0], 0.0);
}

TEST(Backward, NotScalar) {
  Tape t;
  Var x = t.parameter(Tensor::matrix(1, 2, {1, 2}));
  EXPECT_THROW(t.backward(x), NotScalarLoss);
}

TEST(Backward, Linearity) {
  Rng rng(2);
  const Tensor w0 = random_tensor({3, 3}, rng);
  auto grads = [&](double a, double b) {
    Tape t;
    Var w = t.parameter(w0);
    Var f = t.sum(t.tanh(w));
    Var g = t.sum(t.mul(w, w));
    Var loss = t.add(t.scale(f, a), t.scale(g, b));
    return t.backward(loss).of(w);
  };
  const Tensor gf = grads(1, 0), gg = grads(0, 1), combo = grads(2.5, -0.5);
  for (std::size_t i = 0; i < combo.size(); ++i)
    EXPECT_NEAR(combo[i], 2.5 * gf[i] - 0.5 * gg[i], 1e-12);
}

TEST(Backward, Deterministic) {
  Rng rng(4);
  const Tensor w0 = random_tensor({4, 5}, rng);
  const Tensor v0 = random_tensor({5, 2}, rng);
  auto run = [&] {
    Tape t;
    Var w = t.parameter(w0);
    Var p = t.softmax_rows(t.matmul(w, t.constant(v0)));
    return t.backward(t.sum(t.mul(p, p))).of(w);
  };
  EXPECT_EQ(run(), run());
}

// One finite-difference check per primitive.

TEST(GradCheck, Elementwise) {
  Rng rng(7);
  expect_gradients_match(
      [](Tape& t, std::span<const Var> in) {
        Var s = t.add(t.mul(in[0], in[1]), t.sub(t.tanh(in[0]), t.sigmoid(in[1])));
        return t.sum(t.scale(s, 1.7));
      },
      {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
}

TEST(GradCheck, RowBroadcast) {
  Rng rng(8);
  expect_gradients_match(
      [](Tape& t, std::span<const Var> in) {
        return t.sum(t.tanh(t.sub(t.add(in[0], in[1]), in[1])));
      },
      {random_tensor({3, 4}, rng), random_tensor({1, 4}, rng)});
}

TEST(GradCheck, MatmulSoftmax) {
  Rng rng(9);
  expect_gradients_match(
      [](Tape& t, std::span<const Var> in) {
        Var p = t.softmax_rows(t.matmul(in[0], in[1]));
        return t.sum(t.mul(p, p));
      },
      {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)});
}

TEST(GradCheck, EmbeddingConcatSlice) {
  Rng rng(10);
  expect_gradients_match(
      [](Tape& t, std::span<const Var> in) {
        Var e = t.embedding_lookup(in[0], {2, 0, 2});
        const Var cols[] = {e, t.tanh(e)};
        Var wide = t.concat_cols(cols);
        const Var rows[] = {wide, t.sigmoid(wide)};
        Var tall = t.concat_rows(rows);
        Var part = t.slice_cols(tall, 1, 4);
        return t.sum(t.mul(part, part));
      },
      {random_tensor({4, 3}, rng)});
}

TEST(GradCheck, Attention) {
  Rng rng(12);
  expect_gradients_match(
      [](Tape& t, std::span<const Var> in) {
        const Var steps[] = {in[0], t.tanh(in[0]), in[1]};
        Var memory = t.stack_steps(steps);
        Var weights = t.softmax_rows(t.attention_scores(memory, in[2]));
        Var ctx = t.attention_context(weights, memory);
        return t.sum(t.mul(ctx, ctx));
      },
      {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
}

TEST(GradCheck, CrossEntropy) {
  Rng rng(13);
  expect_gradients_match(
      [](Tape& t, std::span<const Var> in) {
        return t.cross_entropy(t.matmul(in[0], in[1]), {1, 0, 3, 2}, 3);
      },
      {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng)});
}

TEST(GradCheck, TwoLayerNetwork) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    expect_gradients_match(
        [](Tape& t, std::span<const Var> in) {
          Var h = t.tanh(t.add(t.matmul(in[0], in[1]), in[2]));
          return t.cross_entropy(t.matmul(h, in[3]), {0, 2, 1});
        },
        {random_tensor({3, 4}, rng), random_tensor({4, 6}, rng), random_tensor({1, 6}, rng),
         random_tensor({6, 3}, rng)});
  }
}

}  // namespace
}  // namespace xamr::ad
