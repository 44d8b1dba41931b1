#pragma once

// Central finite-difference oracle for the autodiff engine, plus a catalogue
// of randomized gradient cases shared by the unit tests and the acceptance
// binary.

#include "dtl/autodiff.hpp"
#include "dtl/nn.hpp"
#include "dtl/random.hpp"
#include "dtl/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace dtl::test {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;
// Below this magnitude the comparison is effectively absolute; FD rounding
// noise (~1e-11 at unit-scale losses) would otherwise dominate.
inline constexpr double kFdFloor = 1e-4;

using LossBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kFdFloor});
}

/// Largest relative error between backward() and central differences over
/// every entry of every parameter.
inline double max_gradient_error(std::vector<Parameter>& params, const LossBuilder& build) {
  auto evaluate = [&] {
    Graph g;
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(g.parameter(p));
    return build(g, vars).value()(0, 0);
  };
  for (auto& p : params) p.zero_grad();
  {
    Graph g;
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(g.parameter(p));
    g.backward(build(g, vars));
  }
  double worst = 0.0;
  for (auto& p : params) {
    const Matrix analytic = p.grad.matrix();
    for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
      for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
        double& cell = p.value.map()(r, c);
        const double saved = cell;
        cell = saved + kFdStep;
        const double up = evaluate();
        cell = saved - kFdStep;
        const double down = evaluate();
        cell = saved;
        worst = std::max(worst, relative_error(analytic(r, c), (up - down) / (2 * kFdStep)));
      }
    }
  }
  return worst;
}

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return Tensor(std::move(m));
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> out(n);
  for (int& y : out) y = d(rng);
  return out;
}

struct GradientCase {
  std::string name;
  /// Runs one randomized configuration; returns the worst relative error.
  std::function<double(std::uint64_t seed)> run;
};

inline std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline std::vector<GradientCase> gradient_cases() {
  std::vector<GradientCase> cases;

  cases.push_back({"matmul", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto m = dim(rng, 1, 5), k = dim(rng, 1, 5), n = dim(rng, 1, 5);
                     std::vector<Parameter> ps{{"a", random_tensor(rng, m, k)}, {"b", random_tensor(rng, k, n)}};
                     const Tensor w = random_tensor(rng, n, 1);
                     return max_gradient_error(ps, [&](Graph& g, const std::vector<Var>& v) {
                       return sum(matmul(matmul(v[0], v[1]), g.constant(w)));
                     });
                   }});

  cases.push_back({"add_bias/add/sub/scale", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto m = dim(rng, 1, 5), n = dim(rng, 1, 5);
                     std::vector<Parameter> ps{{"x", random_tensor(rng, m, n)},
                                               {"y", random_tensor(rng, m, n)},
                                               {"b", random_tensor(rng, 1, n)}};
                     const double f = std::uniform_real_distribution<double>(-2, 2)(rng);
                     const Tensor w = random_tensor(rng, n, 1);
                     return max_gradient_error(ps, [&](Graph& g, const std::vector<Var>& v) {
                       Var h = sub(add_bias(v[0], v[2]), scale(add(v[1], v[0]), f));
                       return sum(matmul(h, g.constant(w)));
                     });
                   }});

  auto unary = [](std::string name, Var (*op)(Var)) {
    return GradientCase{name, [op](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto m = dim(rng, 1, 6), n = dim(rng, 1, 6);
                          std::vector<Parameter> ps{{"x", random_tensor(rng, m, n, 2.0)}};
                          const Tensor w = random_tensor(rng, n, 1);
                          return max_gradient_error(ps, [&](Graph& g, const std::vector<Var>& v) {
                            return sum(matmul(op(v[0]), g.constant(w)));
                          });
                        }};
  };
  cases.push_back(unary("relu", &relu));
  cases.push_back(unary("sigmoid", &sigmoid));
  cases.push_back(unary("softmax_rows", &softmax_rows));
  cases.push_back(unary("abs", &dtl::abs));

  cases.push_back({"grad_reverse", [](std::uint64_t seed) {
                     // Feature map -> reversal -> small sigmoid head, as in DANN.
                     Rng rng(seed);
                     const auto m = dim(rng, 2, 5), k = dim(rng, 1, 4), h = dim(rng, 1, 4);
                     const double lambda = std::uniform_real_distribution<double>(0, 2)(rng);
                     std::vector<Parameter> ps{{"x", random_tensor(rng, m, k)},
                                               {"wf", random_tensor(rng, k, h)},
                                               {"wd", random_tensor(rng, h, 1)}};
                     const Tensor w = random_tensor(rng, 1, 1);
                     // Reference: FD-checked gradients of the same graph without reversal.
                     std::vector<Parameter> plain = ps;
                     const auto build_plain = [&](Graph& g, const std::vector<Var>& v) {
                       return sum(matmul(sigmoid(matmul(relu(matmul(v[0], v[1])), v[2])), g.constant(w)));
                     };
                     const auto build_reversed = [&](Graph& g, const std::vector<Var>& v) {
                       return sum(matmul(sigmoid(matmul(grad_reverse(relu(matmul(v[0], v[1])), lambda), v[2])),
                                         g.constant(w)));
                     };
                     double worst = max_gradient_error(plain, build_plain);
                     for (auto& p : ps) p.zero_grad();
                     {
                       Graph g;
                       std::vector<Var> v;
                       for (auto& p : ps) v.push_back(g.parameter(p));
                       g.backward(build_reversed(g, v));
                     }
                     // Upstream of the reversal: -lambda * plain; downstream: unchanged.
                     for (std::size_t i = 0; i < ps.size(); ++i) {
                       const double factor = i < 2 ? -lambda : 1.0;
                       const Matrix expect = plain[i].grad.matrix() * factor;
                       for (Eigen::Index j = 0; j < expect.size(); ++j) {
                         worst = std::max(worst, relative_error(ps[i].grad.matrix().data()[j], expect.data()[j]));
                       }
                     }
                     return worst;
                   }});

  cases.push_back({"batch_norm/train", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto m = dim(rng, 2, 6), n = dim(rng, 1, 5);
                     std::vector<Parameter> ps{{"x", random_tensor(rng, m, n, 2.0)},
                                               {"gamma", random_tensor(rng, 1, n)},
                                               {"beta", random_tensor(rng, 1, n)}};
                     BatchNormState state(n);
                     const Tensor w = random_tensor(rng, n, 1);
                     return max_gradient_error(ps, [&](Graph& g, const std::vector<Var>& v) {
                       return sum(matmul(batch_norm(v[0], v[1], v[2], state, Mode::train), g.constant(w)));
                     });
                   }});

  cases.push_back({"batch_norm/eval", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto m = dim(rng, 1, 6), n = dim(rng, 1, 5);
                     std::vector<Parameter> ps{{"x", random_tensor(rng, m, n, 2.0)},
                                               {"gamma", random_tensor(rng, 1, n)},
                                               {"beta", random_tensor(rng, 1, n)}};
                     BatchNormState state(n);
                     state.running_mean = random_tensor(rng, 1, n);
                     state.running_var = Tensor(
                         (random_tensor(rng, 1, n).matrix().array().square() + 0.5).matrix());
                     const Tensor w = random_tensor(rng, n, 1);
                     return max_gradient_error(ps, [&](Graph& g, const std::vector<Var>& v) {
                       return sum(matmul(batch_norm(v[0], v[1], v[2], state, Mode::eval), g.constant(w)));
                     });
                   }});

  cases.push_back({"concat/slice/mean", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto a = dim(rng, 1, 4), b = dim(rng, 1, 4), n = dim(rng, 1, 4);
                     std::vector<Parameter> ps{{"x", random_tensor(rng, a, n)}, {"y", random_tensor(rng, b, n)}};
                     const Tensor w = random_tensor(rng, n, 1);
                     const std::size_t cut = std::uniform_int_distribution<std::size_t>(1, a + b)(rng);
                     return max_gradient_error(ps, [&](Graph& g, const std::vector<Var>& v) {
                       Var both = sigmoid(concat_rows(v[0], v[1]));
                       return add(mean(matmul(slice_rows(both, 0, cut), g.constant(w))),
                                  sum(slice_rows(both, cut - 1, a + b)));
                     });
                   }});

  cases.push_back({"cross_entropy", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto m = dim(rng, 1, 6), k = dim(rng, 2, 5);
                     std::vector<Parameter> ps{{"logits", random_tensor(rng, m, k)}};
                     const auto labels = random_labels(rng, m, static_cast<int>(k));
                     return max_gradient_error(ps, [&](Graph&, const std::vector<Var>& v) {
                       return cross_entropy(softmax_rows(v[0]), labels);
                     });
                   }});

  cases.push_back({"binary_cross_entropy", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto m = dim(rng, 1, 6);
                     std::vector<Parameter> ps{{"logits", random_tensor(rng, m, 1, 2.0)}};
                     const auto labels = random_labels(rng, m, 2);
                     return max_gradient_error(ps, [&](Graph&, const std::vector<Var>& v) {
                       return binary_cross_entropy(sigmoid(v[0]), labels);
                     });
                   }});

  cases.push_back({"discrepancy", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const auto m = dim(rng, 1, 5), k = dim(rng, 2, 5);
                     std::vector<Parameter> ps{{"a", random_tensor(rng, m, k)}, {"b", random_tensor(rng, m, k)}};
                     return max_gradient_error(ps, [&](Graph&, const std::vector<Var>& v) {
                       return discrepancy(softmax_rows(v[0]), softmax_rows(v[1]));
                     });
                   }});

  cases.push_back({"network/M1+cross_entropy", [](std::uint64_t seed) {
                     Rng rng(seed);
                     const std::size_t in = dim(rng, 2, 8), m = dim(rng, 2, 6);
                     Network net = Network::init(
                         NetworkSpec{"M1", {FullyConnected{in, 6}, Relu{}, FullyConnected{6, 3}, Softmax{}}}, seed);
                     const Tensor x = random_tensor(rng, m, in);
                     const auto labels = random_labels(rng, m, 3);
                     return max_gradient_error(net.parameters(), [&](Graph& g, const std::vector<Var>&) {
                       return cross_entropy(net.forward(g, g.constant(x), Mode::train), labels);
                     });
                   }});

  cases.push_back({"network/bn-relu-sigmoid+bce", [](std::uint64_t seed) {
                     // Scaled-down domain classifier: FC -> BN -> ReLU -> FC -> sigmoid.
                     Rng rng(seed);
                     const std::size_t in = dim(rng, 2, 6), h = dim(rng, 2, 6), m = dim(rng, 3, 6);
                     Network net = Network::init(
                         NetworkSpec{"gd", {FullyConnected{in, h}, BatchNorm{h}, Relu{}, FullyConnected{h, 1}, Sigmoid{}}},
                         seed);
                     const Tensor x = random_tensor(rng, m, in);
                     const auto labels = random_labels(rng, m, 2);
                     return max_gradient_error(net.parameters(), [&](Graph& g, const std::vector<Var>&) {
                       return binary_cross_entropy(net.forward(g, g.constant(x), Mode::train), labels);
                     });
                   }});
  return cases;
}

}  // namespace dtl::test
