#include <gtest/gtest.h>

#include <cmath>

#include "l2r/error.hpp"
#include "l2r/tensor.hpp"
#include "oracles.hpp"

using namespace l2r;
using namespace l2r::tensor;

namespace {

Tensor t2(std::size_t r, std::size_t c, std::vector<double> v, bool grad = false) { return Tensor({r, c}, v, grad); }

void expect_values(const Tensor& t, std::vector<double> expected, double tol = 1e-12) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.data()[i], expected[i], tol) << "at " << i;
}

}  // namespace

TEST(Tensor, RejectsMismatchedDataLength) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({0}, {}), DimensionError);
}

TEST(Matmul, IdentityAndHandValues) {
  const auto m = t2(2, 2, {1, 2, 3, 4});
  expect_values(matmul(t2(2, 2, {1, 0, 0, 1}), m), {1, 2, 3, 4});
  expect_values(matmul(t2(1, 2, {1, 2}), t2(2, 1, {3, 4})), {11});
  expect_values(matmul(Tensor::zeros({2, 3}), Tensor::full({3, 2}, 7.0)), {0, 0, 0, 0});
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2,3)"), std::string::npos) << msg;
  }
}

TEST(Softmax, KnownValuesAndStability) {
  expect_values(softmax(Tensor({3}, {0, 0, 0}), 0), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  expect_values(softmax(Tensor({2}, {1000, 1000}), 0), {0.5, 0.5});
  expect_values(softmax(Tensor({2}, {0, std::log(3.0)}), 0), {0.25, 0.75});
}

TEST(Softmax, SlicesSumToOne) {
  CounterRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = Tensor::randn({3, 5, 4}, rng, 50.0);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      const auto s = sum(softmax(x, axis), axis);
      for (double v : s.data()) EXPECT_NEAR(v, 1.0, 1e-12);
    }
  }
}

TEST(LayerNorm, KnownValues) {
  expect_values(layer_norm(Tensor({1, 3}, {5, 5, 5}), 1), {0, 0, 0});
  expect_values(layer_norm(Tensor({1, 2}, {1, 3}), 1, 0.0), {-1, 1});
  CounterRng rng(3);
  const auto y = layer_norm(Tensor::randn({4, 16}, rng, 3.0), 1);
  const auto means = mean(y, 1);
  for (double m : means.data()) EXPECT_NEAR(m, 0.0, 1e-12);
}

TEST(Transpose, InvolutionAndShape) {
  const auto m = t2(2, 2, {1, 2, 3, 4});
  expect_values(transpose_last2(m), {1, 3, 2, 4});
  CounterRng rng(5);
  const auto x = Tensor::randn({2, 3, 4}, rng);
  EXPECT_EQ(transpose_last2(x).shape(), (Shape{2, 4, 3}));
  const auto back = transpose_last2(transpose_last2(x));
  EXPECT_TRUE(std::equal(back.data().begin(), back.data().end(), x.data().begin()));
  EXPECT_THROW(transpose_last2(Tensor({3}, {1, 2, 3})), RankError);
}

TEST(CosineSim, KnownValues) {
  const std::vector<double> v{0.3, -2, 5};
  EXPECT_NEAR(cosine_sim(v, v), 1.0, 1e-12);
  EXPECT_EQ(cosine_sim(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine_sim(std::vector<double>{1, 1}, std::vector<double>{1, 0}),
              1 / ((std::sqrt(2.0) + 1e-12) * (1 + 1e-12)), 1e-15);
  EXPECT_EQ(cosine_sim(std::vector<double>{0, 0}, std::vector<double>{1, 2}), 0.0);
  EXPECT_THROW(cosine_sim(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST(Concat, DefinitionAndSliceRoundTrip) {
  expect_values(concat({t2(2, 1, {1, 2}), t2(2, 1, {3, 4})}, 1), {1, 3, 2, 4});
  const auto one = t2(1, 2, {7, 8});
  expect_values(concat({one}, 0), {7, 8});
  CounterRng rng(9);
  const auto a = Tensor::randn({3, 2, 4}, rng), b = Tensor::randn({3, 5, 4}, rng);
  const auto c = concat({a, b}, 1);
  const auto a2 = slice(c, 1, 0, 2), b2 = slice(c, 1, 2, 5);
  EXPECT_TRUE(std::equal(a2.data().begin(), a2.data().end(), a.data().begin()));
  EXPECT_TRUE(std::equal(b2.data().begin(), b2.data().end(), b.data().begin()));
  EXPECT_THROW(concat({Tensor::zeros({2, 2}), Tensor::zeros({3, 3})}, 0), DimensionError);
  EXPECT_EQ(sum(Tensor::zeros({4})).item(), 0.0);
}

TEST(Backward, SquareAndAccumulation) {
  auto x = Tensor::scalar(3.0, true);
  auto y = mul(x, x);
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  mul(x, x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(Backward, NonScalarIsContractError) {
  auto x = Tensor::full({2}, 1.0, true);
  EXPECT_THROW(scale(x, 2.0).backward(), ContractError);
}

TEST(Backward, SoftmaxPickGradientsSumToZero) {
  CounterRng rng(4);
  auto x = Tensor::randn({6}, rng, 1.0, true);
  const std::size_t pick[] = {2};
  sum(index_select(softmax(x, 0), 0, pick)).backward();
  double s = 0.0;
  for (double g : x.grad()) s += g;
  EXPECT_NEAR(s, 0.0, 1e-14);
}

TEST(Backward, MatchesIndependentFiniteDifferences) {
  CounterRng rng(21);
  const auto av = Tensor::randn({3, 4}, rng);
  const auto bv = Tensor::randn({4, 2}, rng);
  auto f = [&](const std::vector<double>& flat) {
    const Tensor a({3, 4}, flat);
    return sum(exp(scale(matmul(a, bv), 0.3))).item();
  };
  auto a = Tensor({3, 4}, std::vector<double>(av.data().begin(), av.data().end()), true);
  sum(exp(scale(matmul(a, bv), 0.3))).backward();
  const auto numeric = oracle::numeric_gradient(f, std::vector<double>(av.data().begin(), av.data().end()));
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double an = a.grad()[i];
    EXPECT_LT(std::abs(an - numeric[i]) / (std::abs(an) + std::abs(numeric[i]) + 1e-6), 1e-6);
  }
}

TEST(FiniteDiffCheck, LinearAndQuadratic) {
  CounterRng rng(8);
  const auto x = Tensor::randn({10}, rng);
  const auto w = Tensor::randn({10}, rng);
  EXPECT_LT(finite_diff_check([&](const Tensor& v) { return sum(mul(v, w)); }, x), 1e-7);
  EXPECT_LT(finite_diff_check([](const Tensor& v) { return sum(mul(v, v)); }, x), 1e-7);
}

// Every differentiable op against central differences, random inputs of
// magnitude up to 10 and size up to 64.
TEST(GradientProperty, EveryOpMatchesFiniteDifferences) {
  CounterRng rng(2024);
  const auto w = Tensor::randn({4, 4}, rng);
  auto readout = [&](const Tensor& y) {
    CounterRng r(77);
    return sum(mul(y, Tensor::randn(y.shape(), r)));
  };
  const std::vector<std::pair<std::string, std::function<Tensor(const Tensor&)>>> ops = {
      {"add", [&](const Tensor& x) { return add(x, w); }},
      {"sub", [&](const Tensor& x) { return sub(w, x); }},
      {"mul", [&](const Tensor& x) { return mul(x, x); }},
      {"scale", [](const Tensor& x) { return scale(x, -1.7); }},
      {"exp", [](const Tensor& x) { return exp(scale(x, 0.2)); }},
      {"log", [](const Tensor& x) { return log(add_scalar(mul(x, x), 1.0)); }},
      {"sigmoid", [](const Tensor& x) { return sigmoid(x); }},
      {"sum_axis", [](const Tensor& x) { return sum(x, 1); }},
      {"mean_axis", [](const Tensor& x) { return mean(x, 0); }},
      {"matmul", [&](const Tensor& x) { return matmul(x, w); }},
      {"softmax", [](const Tensor& x) { return softmax(scale(x, 0.3), 1); }},
      {"log_softmax", [](const Tensor& x) { return log_softmax(scale(x, 0.3), 0); }},
      {"layer_norm", [](const Tensor& x) { return layer_norm(x, 1); }},
      {"transpose", [](const Tensor& x) { return transpose_last2(x); }},
      {"reshape", [](const Tensor& x) { return reshape(x, {2, 8}); }},
      {"broadcast", [](const Tensor& x) { return broadcast_to(slice(x, 0, 0, 1), {3, 4}); }},
      {"concat", [&](const Tensor& x) { return concat({x, mul(x, w)}, 0); }},
      {"stack", [&](const Tensor& x) { return stack(std::vector<Tensor>{x, w}); }},
      {"index_select", [](const Tensor& x) {
         const std::size_t idx[] = {3, 0, 3};
         return index_select(x, 1, idx);
       }},
      {"diagonal", [](const Tensor& x) { return diagonal(x); }},
      {"l2_normalize", [](const Tensor& x) { return l2_normalize(x); }},
      {"cosine_similarity", [&](const Tensor& x) { return cosine_similarity(x, w); }},
  };
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = Tensor::randn({4, 4}, rng, 3.0);
    for (const auto& [name, op] : ops) {
      const double err = finite_diff_check([&](const Tensor& v) { return readout(op(v)); }, x);
      EXPECT_LT(err, 1e-6) << name << " trial " << trial;
    }
  }
}

TEST(ForwardProperty, FiniteInputsGiveFiniteOutputs) {
  CounterRng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = Tensor::randn({4, 8}, rng, 10.0);
    for (const auto& y : {softmax(x, 1), log_softmax(x, 0), layer_norm(x, 1), l2_normalize(x), sigmoid(x),
                          exp(scale(x, 0.1))}) {
      for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
    }
  }
}

TEST(ScaleGradient, ForwardIsIdentity) {
  auto x = Tensor::full({3}, 2.0, true);
  const auto y = scale_gradient(x, 3.0);
  expect_values(y, {2, 2, 2});
  sum(y).backward();
  expect_values(Tensor({3}, std::vector<double>(x.grad().begin(), x.grad().end())), {3, 3, 3});
}
