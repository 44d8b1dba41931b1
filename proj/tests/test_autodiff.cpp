#include "dtl/autodiff.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

namespace dtl {
namespace {

Tensor T(std::initializer_list<std::initializer_list<double>> rows) { return Tensor::from_rows(rows); }

TEST(Tensor, ShapeAndValues) {
  Tensor t(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 0), 4.0);
  EXPECT_THROW(Tensor(2, 2, {1, 2, 3}), ShapeError);
  EXPECT_THROW(T({{1, 2}, {3}}), ShapeError);
}

TEST(Matmul, IdentityAndDot) {
  Graph g;
  EXPECT_EQ(matmul(g.constant(T({{1, 0}, {0, 1}})), g.constant(T({{3, 4}, {5, 6}}))).value(),
            T({{3, 4}, {5, 6}}));
  EXPECT_EQ(matmul(g.constant(T({{1, 2}})), g.constant(T({{3}, {4}}))).value(), T({{11}}));
}

TEST(Matmul, MismatchNamesBothShapes) {
  Graph g;
  try {
    matmul(g.constant(Tensor(2, 3)), g.constant(Tensor(2, 3)));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3] x [2x3]"), std::string::npos) << e.what();
  }
}

TEST(Matmul, GradientOfSumAtRandom3x3) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<Parameter> ps{{"a", test::random_tensor(rng, 3, 3)}, {"b", test::random_tensor(rng, 3, 3)}};
    const double err = test::max_gradient_error(
        ps, [](Graph&, const std::vector<Var>& v) { return sum(matmul(v[0], v[1])); });
    EXPECT_LE(err, 1e-6) << "seed " << seed;
  }
}

TEST(GradReverse, ForwardIsBitwiseIdentity) {
  Graph g;
  Rng rng(3);
  const Tensor x = test::random_tensor(rng, 4, 5);
  Var y = grad_reverse(g.constant(x), 0.7);
  EXPECT_EQ(std::memcmp(y.value().values().data(), x.values().data(), sizeof(double) * 20), 0);
  EXPECT_EQ(grad_reverse(g.constant(T({{1, 2, 3}})), 1.0).value(), T({{1, 2, 3}}));
}

TEST(GradReverse, BackwardNegatesAndScales) {
  for (double lambda : {1.0, 0.5, 0.0}) {
    Parameter x("x", T({{1, 2, 3}}));
    Graph g;
    const Tensor w = T({{0.3}, {-1.5}, {2.0}});
    g.backward(sum(matmul(grad_reverse(g.parameter(x), lambda), g.constant(w))));
    for (int k = 0; k < 3; ++k) EXPECT_EQ(x.grad(0, k), -lambda * w(k, 0));
  }
}

TEST(GradReverse, NegativeLambdaRejected) {
  Graph g;
  EXPECT_THROW(grad_reverse(g.constant(Tensor(1, 1)), -0.1), std::invalid_argument);
}

TEST(Elementwise, Definitions) {
  Graph g;
  EXPECT_EQ(relu(g.constant(T({{-1, 0, 2}}))).value(), T({{0, 0, 2}}));
  EXPECT_EQ(softmax_rows(g.constant(T({{0, 0, 0, 0}}))).value(), T({{0.25, 0.25, 0.25, 0.25}}));
  EXPECT_EQ(sigmoid(g.constant(T({{0}}))).value()(0, 0), 0.5);
  EXPECT_EQ(add_bias(g.constant(T({{1, 2}, {3, 4}})), g.constant(T({{10, 20}}))).value(),
            T({{11, 22}, {13, 24}}));
  EXPECT_EQ(abs(g.constant(T({{-2, 3}}))).value(), T({{2, 3}}));
}

TEST(Elementwise, SaturationStaysFinite) {
  Graph g;
  Var s = sigmoid(g.constant(T({{-800, 800}})));
  EXPECT_EQ(s.value()(0, 0), 0.0);
  EXPECT_EQ(s.value()(0, 1), 1.0);
  Var p = softmax_rows(g.constant(T({{1000, 1001, -1000}})));
  EXPECT_TRUE(p.value().all_finite());
  EXPECT_NEAR(p.value()(0, 1), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Softmax, RowsSumToOne) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    Graph g;
    Var p = softmax_rows(g.constant(test::random_tensor(rng, 7, 5, 10.0)));
    for (std::size_t r = 0; r < 7; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        EXPECT_GE(p.value()(r, c), 0.0);
        EXPECT_LE(p.value()(r, c), 1.0);
        total += p.value()(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(BatchNorm, TrainModeStandardizes) {
  Rng rng(11);
  const Tensor x = test::random_tensor(rng, 32, 6, 5.0);
  BatchNormState state(6);
  Graph g;
  Parameter gamma("g", Tensor::filled(1, 6, 1.0)), beta("b", Tensor(1, 6));
  Var y = batch_norm(g.constant(x), g.parameter(gamma), g.parameter(beta), state, Mode::train);
  for (std::size_t c = 0; c < 6; ++c) {
    double mean = 0, var = 0;
    for (std::size_t r = 0; r < 32; ++r) mean += y.value()(r, c) / 32;
    for (std::size_t r = 0; r < 32; ++r) var += std::pow(y.value()(r, c) - mean, 2) / 32;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(BatchNorm, RunningStatsFollowMovingAverage) {
  BatchNormState state(1);
  Graph g;
  Parameter gamma("g", Tensor::filled(1, 1, 1.0)), beta("b", Tensor(1, 1));
  batch_norm(g.constant(T({{1}, {3}})), g.parameter(gamma), g.parameter(beta), state, Mode::train);
  // batch mean 2, unbiased variance 2
  EXPECT_DOUBLE_EQ(state.running_mean(0, 0), 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(state.running_var(0, 0), 0.9 * 1.0 + 0.1 * 2.0);
}

TEST(BatchNorm, EvalModeUsesRunningStats) {
  BatchNormState state(2);
  state.running_mean = T({{1, -2}});
  state.running_var = T({{4, 0.25}});
  Graph g;
  Parameter gamma("g", Tensor::filled(1, 2, 1.0)), beta("b", Tensor(1, 2));
  Var y = batch_norm(g.constant(T({{3, -1}})), g.parameter(gamma), g.parameter(beta), state, Mode::eval);
  EXPECT_NEAR(y.value()(0, 0), 2.0 / std::sqrt(4 + state.epsilon), 1e-15);
  EXPECT_NEAR(y.value()(0, 1), 1.0 / std::sqrt(0.25 + state.epsilon), 1e-15);
}

TEST(BatchNorm, TrainBatchOfOneRejected) {
  BatchNormState state(2);
  Graph g;
  Parameter gamma("g", Tensor::filled(1, 2, 1.0)), beta("b", Tensor(1, 2));
  EXPECT_THROW(batch_norm(g.constant(Tensor(1, 2)), g.parameter(gamma), g.parameter(beta), state, Mode::train),
               std::invalid_argument);
}

TEST(Backward, SumGivesOnes) {
  Parameter x("x", Tensor(2, 3, {1, 2, 3, 4, 5, 6}));
  Graph g;
  g.backward(sum(g.parameter(x)));
  EXPECT_EQ(x.grad, Tensor::filled(2, 3, 1.0));
}

TEST(Backward, NonScalarLossRejected) {
  Parameter x("x", Tensor(2, 3));
  Graph g;
  EXPECT_THROW(g.backward(g.parameter(x)), ShapeError);
}

TEST(Backward, AccumulatesWithoutZeroing) {
  Rng rng(5);
  Parameter a("a", test::random_tensor(rng, 3, 4));
  const Tensor w = test::random_tensor(rng, 4, 1);
  auto run = [&] {
    Graph g;
    g.backward(sum(matmul(sigmoid(g.parameter(a)), g.constant(w))));
  };
  run();
  const Tensor once = a.grad;
  run();
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(a.grad.values()[i], 2 * once.values()[i]);
  a.zero_grad();
  run();
  EXPECT_EQ(a.grad, once);
}

TEST(Backward, IntermediateGradientsVisible) {
  Parameter x("x", T({{1, -2}}));
  Graph g;
  Var h = scale(g.parameter(x), 3.0);
  Var loss = sum(h);
  g.backward(loss);
  EXPECT_EQ(h.grad(), T({{1, 1}}));
  EXPECT_EQ(x.grad, T({{3, 3}}));
}

TEST(FiniteDifferences, EveryOpOverRandomConfigurations) {
  std::size_t configs = 0;
  for (const auto& c : test::gradient_cases()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const double err = c.run(seed);
      EXPECT_LE(err, test::kFdTolerance) << c.name << " seed " << seed;
      ++configs;
    }
  }
  EXPECT_GE(configs, 100u);
}

}  // namespace
}  // namespace dtl
