#include "dtl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dtl {

Tensor::Tensor(std::size_t rows, std::size_t cols)
    : m_(Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) {
    std::ostringstream os;
    os << "tensor of shape " << rows << "x" << cols << " given " << values.size() << " values";
    throw ShapeError(os.str());
  }
  m_ = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(rows),
                          static_cast<Eigen::Index>(cols));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(values));
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value) {
  return Tensor(Matrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                                 value));
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "[" << rows() << "x" << cols() << "]";
  return os.str();
}

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.rows(), value.cols()),
      velocity(value.rows(), value.cols()) {}

void Parameter::zero_grad() { grad.map().setZero(); }

BatchNormState::BatchNormState(std::size_t width)
    : running_mean(1, width), running_var(Tensor::filled(1, width, 1.0)) {}

const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad(*this); }

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Parameter& p) {
  nodes_.push_back(Node{{}, {}, {}, &p, true});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.graph() != this) throw std::logic_error("operands belong to different graphs");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  const bool differentiable = needs && backward != nullptr;
  nodes_.push_back(Node{std::move(value), {}, differentiable ? std::move(backward) : BackwardFn{},
                        nullptr, differentiable});
  return Var(this, nodes_.size() - 1);
}

void Graph::accumulate(Var v, const Matrix& delta) {
  if (Tensor* buf = grad_buffer(v)) buf->map() += delta;
}

Tensor* Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (n.param != nullptr) return &n.param->grad;
  if (n.grad.rows() * n.grad.cols() == 0 && n.value.rows() * n.value.cols() != 0) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
  }
  return &n.grad;
}

const Tensor& Graph::grad(Var v) const {
  Node& n = nodes_[v.id()];
  if (n.param != nullptr) return n.param->grad;
  if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw std::logic_error("loss belongs to a different graph");
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + lv.shape_string());
  }
  for (std::size_t i = 0; i <= loss.id(); ++i) nodes_[i].grad = Tensor();
  nodes_[loss.id()].grad = Tensor::filled(1, 1, 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    // Nodes nothing flowed into have a zero gradient; skip their backward.
    if (!n.requires_grad || !n.backward || n.grad.rows() * n.grad.cols() == 0) continue;
    n.backward(*this, n.grad.matrix());
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& am = a.value().matrix();
  const Matrix& bm = b.value().matrix();
  if (am.cols() != bm.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.value().shape_string() + " x " +
                     b.value().shape_string());
  }
  Matrix out(am.rows(), bm.cols());
  out.noalias() = am * bm;
  return a.graph().record(Tensor(std::move(out)), {a, b}, [a, b](Graph& g, const Matrix& go) {
    if (Tensor* ga = g.grad_buffer(a)) ga->map().noalias() += go * b.value().matrix().transpose();
    if (Tensor* gb = g.grad_buffer(b)) gb->map().noalias() += a.value().matrix().transpose() * go;
  });
}

Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_bias: bias " + bv.shape_string() + " does not fit " +
                     xv.shape_string());
  }
  Matrix out = xv.matrix().rowwise() + bv.matrix().row(0);
  return x.graph().record(Tensor(std::move(out)), {x, bias}, [x, bias](Graph& g, const Matrix& go) {
    g.accumulate(x, go);
    if (g.requires_grad(bias)) g.accumulate(bias, go.colwise().sum());
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value().matrix() + b.value().matrix();
  return a.graph().record(Tensor(std::move(out)), {a, b}, [a, b](Graph& g, const Matrix& go) {
    g.accumulate(a, go);
    g.accumulate(b, go);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value().matrix() - b.value().matrix();
  return a.graph().record(Tensor(std::move(out)), {a, b}, [a, b](Graph& g, const Matrix& go) {
    g.accumulate(a, go);
    if (g.requires_grad(b)) g.accumulate(b, -go);
  });
}

Var scale(Var x, double factor) {
  Matrix out = x.value().matrix() * factor;
  return x.graph().record(Tensor(std::move(out)), {x}, [x, factor](Graph& g, const Matrix& go) {
    g.accumulate(x, go * factor);
  });
}

Var relu(Var x) {
  Matrix out = x.value().matrix().cwiseMax(0.0);
  return x.graph().record(Tensor(std::move(out)), {x}, [x](Graph& g, const Matrix& go) {
    const Matrix& xv = x.value().matrix();
    g.accumulate(x, (xv.array() > 0.0).select(go, 0.0));
  });
}

Var sigmoid(Var x) {
  Matrix out = x.value().matrix().unaryExpr(&stable_sigmoid);
  Tensor y(out);
  return x.graph().record(Tensor(std::move(out)), {x},
                          [x, y = std::move(y)](Graph& g, const Matrix& go) {
                            const auto s = y.matrix().array();
                            g.accumulate(x, (go.array() * s * (1.0 - s)).matrix());
                          });
}

Var softmax_rows(Var x) {
  const Matrix& xv = x.value().matrix();
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mx = xv.row(r).maxCoeff();
    out.row(r) = (xv.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  Tensor y(out);
  return x.graph().record(Tensor(std::move(out)), {x},
                          [x, y = std::move(y)](Graph& g, const Matrix& go) {
                            const Matrix& s = y.matrix();
                            Eigen::VectorXd dots = (go.array() * s.array()).rowwise().sum();
                            Matrix dx = s.array() * (go.colwise() - dots).array();
                            g.accumulate(x, dx);
                          });
}

Var abs(Var x) {
  Matrix out = x.value().matrix().cwiseAbs();
  return x.graph().record(Tensor(std::move(out)), {x}, [x](Graph& g, const Matrix& go) {
    const Matrix& xv = x.value().matrix();
    Matrix sign = xv.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
    g.accumulate(x, go.cwiseProduct(sign));
  });
}

Var grad_reverse(Var x, double lambda) {
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("grad_reverse: lambda must be nonnegative, got " +
                                std::to_string(lambda));
  }
  return x.graph().record(x.value(), {x}, [x, lambda](Graph& g, const Matrix& go) {
    g.accumulate(x, go * (-lambda));
  });
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode) {
  const Matrix& xv = x.value().matrix();
  const Eigen::Index m = xv.rows();
  const Eigen::Index w = xv.cols();
  if (gamma.value().rows() != 1 || static_cast<Eigen::Index>(gamma.value().cols()) != w ||
      !gamma.value().same_shape(beta.value()) ||
      static_cast<Eigen::Index>(state.running_mean.cols()) != w) {
    throw ShapeError("batch_norm: parameters do not fit input " + x.value().shape_string());
  }
  RowVector mu;
  RowVector var;
  if (mode == Mode::train) {
    if (m < 2) throw std::invalid_argument("batch_norm: train mode needs a batch of at least 2");
    mu = xv.colwise().mean();
    var = (xv.rowwise() - mu).array().square().colwise().mean();
    const double unbias = static_cast<double>(m) / static_cast<double>(m - 1);
    state.running_mean.map() =
        state.momentum * state.running_mean.matrix() + (1.0 - state.momentum) * mu;
    state.running_var.map() =
        state.momentum * state.running_var.matrix() + (1.0 - state.momentum) * unbias * var;
  } else {
    mu = state.running_mean.matrix().row(0);
    var = state.running_var.matrix().row(0);
  }
  const RowVector inv_std = (var.array() + state.epsilon).rsqrt();
  Matrix xhat = ((xv.rowwise() - mu).array().rowwise() * inv_std.array()).matrix();
  Matrix out = (xhat.array().rowwise() * gamma.value().matrix().row(0).array()).matrix();
  out.rowwise() += beta.value().matrix().row(0);

  Tensor xhat_t(std::move(xhat));
  return x.graph().record(
      Tensor(std::move(out)), {x, gamma, beta},
      [x, gamma, beta, mode, inv_std, xhat_t = std::move(xhat_t)](Graph& g, const Matrix& go) {
        const Matrix& xh = xhat_t.matrix();
        if (g.requires_grad(gamma)) g.accumulate(gamma, go.cwiseProduct(xh).colwise().sum());
        if (g.requires_grad(beta)) g.accumulate(beta, go.colwise().sum());
        if (!g.requires_grad(x)) return;
        const RowVector scale_row =
            (gamma.value().matrix().row(0).array() * inv_std.array()).matrix();
        if (mode == Mode::eval) {
          g.accumulate(x, (go.array().rowwise() * scale_row.array()).matrix());
          return;
        }
        const double m = static_cast<double>(go.rows());
        const RowVector sum_g = go.colwise().sum();
        const RowVector sum_gx = go.cwiseProduct(xh).colwise().sum();
        Matrix centered = (go * m).rowwise() - sum_g;
        centered -= (xh.array().rowwise() * sum_gx.array()).matrix();
        g.accumulate(x, (centered.array().rowwise() * (scale_row.array() / m)).matrix());
      });
}

Var concat_rows(Var top, Var bottom) {
  const Tensor& a = top.value();
  const Tensor& b = bottom.value();
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: widths differ, " + a.shape_string() + " vs " +
                     b.shape_string());
  }
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.matrix();
  out.bottomRows(b.rows()) = b.matrix();
  const auto split = static_cast<Eigen::Index>(a.rows());
  return top.graph().record(Tensor(std::move(out)), {top, bottom},
                            [top, bottom, split](Graph& g, const Matrix& go) {
                              g.accumulate(top, go.topRows(split));
                              g.accumulate(bottom, go.bottomRows(go.rows() - split));
                            });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (begin > end || end > xv.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + xv.shape_string());
  }
  const auto b = static_cast<Eigen::Index>(begin);
  const auto n = static_cast<Eigen::Index>(end - begin);
  Matrix out = xv.matrix().middleRows(b, n);
  return x.graph().record(Tensor(std::move(out)), {x}, [x, b, n](Graph& g, const Matrix& go) {
    Matrix full = Matrix::Zero(x.value().matrix().rows(), go.cols());
    full.middleRows(b, n) = go;
    g.accumulate(x, full);
  });
}

Var sum(Var x) {
  Tensor out(1, 1);
  out(0, 0) = x.value().matrix().sum();
  return x.graph().record(std::move(out), {x}, [x](Graph& g, const Matrix& go) {
    g.accumulate(x, Matrix::Constant(x.value().matrix().rows(), x.value().matrix().cols(),
                                     go(0, 0)));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  Tensor out(1, 1);
  out(0, 0) = x.value().matrix().sum() / n;
  return x.graph().record(std::move(out), {x}, [x, n](Graph& g, const Matrix& go) {
    g.accumulate(x, Matrix::Constant(x.value().matrix().rows(), x.value().matrix().cols(),
                                     go(0, 0) / n));
  });
}

}  // namespace dtl
