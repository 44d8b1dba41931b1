#pragma once

// Reverse-mode automatic differentiation over dense row-major 2-D arrays.
//
// A Graph is a tape: every op appends a node whose parents were created
// earlier, so creation order is a topological order and backward simply walks
// the tape in reverse. Parameters live outside the graph and are bound as
// leaves; backward accumulates into Parameter::grad until it is zeroed.

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense rows x cols array of doubles. The shape is fixed at construction.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  explicit Tensor(Matrix m) : m_(std::move(m)) {}

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor filled(std::size_t rows, std::size_t cols, double value);

  std::size_t rows() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(m_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(m_.size()); }

  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  double& operator()(std::size_t r, std::size_t c) { return m_(r, c); }

  std::span<const double> values() const { return {m_.data(), size()}; }
  std::span<double> values() { return {m_.data(), size()}; }

  const Matrix& matrix() const { return m_; }
  // Writable view that cannot change the shape.
  Eigen::Map<Matrix> map() { return {m_.data(), m_.rows(), m_.cols()}; }

  std::string shape_string() const;
  bool same_shape(const Tensor& other) const {
    return rows() == other.rows() && cols() == other.cols();
  }
  bool all_finite() const { return m_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.m_ == b.m_;
  }

 private:
  Matrix m_;
};

/// A trainable array together with its gradient accumulator and SGD velocity.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v);
  void zero_grad();
};

enum class Mode { train, eval };

/// Running statistics for one batch-norm layer. Scale and shift are
/// Parameters owned alongside it.
struct BatchNormState {
  Tensor running_mean;  // 1 x width
  Tensor running_var;   // 1 x width
  double momentum = 0.9;
  double epsilon = 1e-7;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t width);
};

class Graph;

/// Handle to a node in a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Receives the gradient of the loss w.r.t. this node's output; pushes
  // contributions into parents via Graph::accumulate.
  using BackwardFn = std::function<void(Graph&, const Matrix& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; reads its value in place, so the parameter
  /// must outlive backward() and stay unchanged until then. Its gradient
  /// accumulates straight into Parameter::grad.
  Var parameter(Parameter& p);

  /// Appends an op node. `backward` may be empty for ops without gradients.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  /// Adds `delta` into the gradient of `v` if it participates in differentiation.
  void accumulate(Var v, const Matrix& delta);
  /// Gradient slot of `v` for in-place accumulation (zeroed on first use),
  /// or nullptr when `v` takes no gradient.
  Tensor* grad_buffer(Var v);
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Clears node gradients, seeds d loss / d loss = 1 and walks the tape in
  /// reverse. Parameter gradients accumulate across calls.
  void backward(Var loss);

  const Tensor& value(Var v) const {
    const Node& n = nodes_[v.id()];
    return n.param != nullptr ? n.param->value : n.value;
  }
  /// For a parameter leaf this is the parameter's accumulated gradient.
  const Tensor& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until something flows in
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  mutable std::deque<Node> nodes_;
};

// Ops. All operands must belong to the same graph.
Var matmul(Var a, Var b);
Var add_bias(Var x, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double factor);
Var relu(Var x);
Var sigmoid(Var x);
Var softmax_rows(Var x);
Var abs(Var x);
/// Identity forward; backward multiplies the incoming gradient by -lambda.
Var grad_reverse(Var x, double lambda);
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode);
Var concat_rows(Var top, Var bottom);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var sum(Var x);
Var mean(Var x);

}  // namespace dtl
