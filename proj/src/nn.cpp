#include "dtl/nn.hpp"

#include "dtl/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

NetworkSpec make(std::string name, std::vector<LayerSpec> layers) {
  NetworkSpec spec{std::move(name), std::move(layers)};
  spec.validate();
  return spec;
}

// input -> widths... (ReLU each) -> classes (softmax)
NetworkSpec mlp(std::string name, std::size_t input, std::vector<std::size_t> hidden,
                std::size_t classes) {
  std::vector<LayerSpec> layers;
  std::size_t prev = input;
  for (std::size_t w : hidden) {
    layers.emplace_back(FullyConnected{prev, w});
    layers.emplace_back(Relu{});
    prev = w;
  }
  layers.emplace_back(FullyConnected{prev, classes});
  layers.emplace_back(Softmax{});
  return make(std::move(name), std::move(layers));
}

constexpr std::size_t kInferChunk = 1024;

}  // namespace

std::string layer_name(const LayerSpec& layer) {
  return std::visit(overloaded{
                        [](const FullyConnected& fc) {
                          return "fc(" + std::to_string(fc.in) + "->" + std::to_string(fc.out) + ")";
                        },
                        [](const Relu&) { return std::string("relu"); },
                        [](const BatchNorm& bn) { return "batch_norm(" + std::to_string(bn.width) + ")"; },
                        [](const Sigmoid&) { return std::string("sigmoid"); },
                        [](const Softmax&) { return std::string("softmax"); },
                    },
                    layer);
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("network '" + name + "' has no layers");
  if (!std::holds_alternative<FullyConnected>(layers.front())) {
    throw std::invalid_argument("network '" + name + "' must start with a fully-connected layer");
  }
  std::size_t width = std::get<FullyConnected>(layers.front()).in;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto* fc = std::get_if<FullyConnected>(&layers[i])) {
      if (fc->in == 0 || fc->out == 0) {
        throw std::invalid_argument("network '" + name + "' layer " + std::to_string(i) +
                                    " has zero width");
      }
      if (fc->in != width) {
        throw std::invalid_argument("network '" + name + "' layer " + std::to_string(i) + " " +
                                    layer_name(layers[i]) + " expects width " +
                                    std::to_string(fc->in) + ", previous layer gives " +
                                    std::to_string(width));
      }
      width = fc->out;
    } else if (const auto* bn = std::get_if<BatchNorm>(&layers[i])) {
      if (bn->width != width) {
        throw std::invalid_argument("network '" + name + "' layer " + std::to_string(i) + " " +
                                    layer_name(layers[i]) + " does not match width " +
                                    std::to_string(width));
      }
    }
  }
}

std::size_t NetworkSpec::input_width() const {
  return std::get<FullyConnected>(layers.front()).in;
}

std::size_t NetworkSpec::output_width() const {
  std::size_t width = input_width();
  for (const auto& l : layers) {
    if (const auto* fc = std::get_if<FullyConnected>(&l)) width = fc->out;
  }
  return width;
}

std::size_t NetworkSpec::block_count() const {
  return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const auto& l) {
    return std::holds_alternative<FullyConnected>(l);
  }));
}

NetworkSpec compose(const NetworkSpec& first, const NetworkSpec& second, std::string name) {
  NetworkSpec out{std::move(name), first.layers};
  out.layers.insert(out.layers.end(), second.layers.begin(), second.layers.end());
  out.validate();
  return out;
}

namespace presets {

NetworkSpec m1(std::size_t input, std::size_t classes) { return mlp("M1", input, {128}, classes); }
NetworkSpec m2(std::size_t input, std::size_t classes) { return mlp("M2", input, {64}, classes); }
NetworkSpec m3(std::size_t input, std::size_t classes) {
  return mlp("M3", input, {64, 32}, classes);
}
NetworkSpec m4(std::size_t input, std::size_t classes) {
  return mlp("M4", input, {128, 128}, classes);
}
NetworkSpec m5(std::size_t input, std::size_t classes) {
  return mlp("M5", input, {128, 128, 64}, classes);
}
NetworkSpec m6(std::size_t input, std::size_t classes) {
  return mlp("M6", input, {128, 64, 32, 16}, classes);
}

NetworkSpec feature_extractor(std::size_t input) {
  return make("feature_extractor",
              {FullyConnected{input, kHidden}, Relu{}, FullyConnected{kHidden, kHidden}, Relu{}});
}

NetworkSpec label_predictor(std::size_t classes, bool relu_before_softmax) {
  std::vector<LayerSpec> layers{FullyConnected{kHidden, classes}, BatchNorm{classes}};
  if (relu_before_softmax) layers.emplace_back(Relu{});
  layers.emplace_back(Softmax{});
  return make("label_predictor", std::move(layers));
}

NetworkSpec domain_classifier() {
  return make("domain_classifier",
              {FullyConnected{kHidden, kDomainHidden}, BatchNorm{kDomainHidden}, Relu{},
               FullyConnected{kDomainHidden, kDomainHidden}, BatchNorm{kDomainHidden}, Relu{},
               FullyConnected{kDomainHidden, 1}, Sigmoid{}});
}

NetworkSpec mcd_classifier(std::size_t classes) {
  return make("mcd_classifier", {FullyConnected{kHidden, kHidden}, Relu{},
                                 FullyConnected{kHidden, kHidden}, Relu{},
                                 FullyConnected{kHidden, classes}, Softmax{}});
}

NetworkSpec backbone(std::size_t input, std::size_t classes, bool relu_before_softmax) {
  return compose(feature_extractor(input), label_predictor(classes, relu_before_softmax),
                 "backbone");
}

NetworkSpec by_name(std::string_view name, std::size_t input, std::size_t classes) {
  if (name == "M1" || name == "m1") return m1(input, classes);
  if (name == "M2" || name == "m2") return m2(input, classes);
  if (name == "M3" || name == "m3") return m3(input, classes);
  if (name == "M4" || name == "m4") return m4(input, classes);
  if (name == "M5" || name == "m5") return m5(input, classes);
  if (name == "M6" || name == "m6") return m6(input, classes);
  if (name == "feature_extractor") return feature_extractor(input);
  if (name == "label_predictor") return label_predictor(classes);
  if (name == "domain_classifier") return domain_classifier();
  if (name == "mcd_classifier") return mcd_classifier(classes);
  if (name == "backbone") return backbone(input, classes);
  throw std::invalid_argument("unknown network preset '" + std::string(name) + "'");
}

}  // namespace presets

Network Network::init(NetworkSpec spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec_ = std::move(spec);
  net.seed_ = seed;
  for (std::size_t i = 0; i < net.spec_.layers.size(); ++i) {
    const LayerSpec& layer = net.spec_.layers[i];
    if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
      Rng rng(derive_seed(seed, {i}));
      const double limit = std::sqrt(6.0 / static_cast<double>(fc->in));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Tensor w(fc->in, fc->out);
      for (double& v : w.values()) v = dist(rng);
      const std::string prefix = "layer" + std::to_string(i);
      net.params_.emplace_back(prefix + ".weight", std::move(w));
      net.params_.emplace_back(prefix + ".bias", Tensor(1, fc->out));
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      const std::string prefix = "layer" + std::to_string(i);
      net.params_.emplace_back(prefix + ".scale", Tensor::filled(1, bn->width, 1.0));
      net.params_.emplace_back(prefix + ".shift", Tensor(1, bn->width));
      net.bn_.emplace_back(bn->width);
    }
  }
  net.build_slots();
  return net;
}

Network::Network(NetworkSpec spec, std::uint64_t seed, std::vector<Parameter> params,
                 std::vector<BatchNormState> batch_norm)
    : spec_(std::move(spec)), seed_(seed), params_(std::move(params)), bn_(std::move(batch_norm)) {
  spec_.validate();
  build_slots();
  std::size_t expected_params = 0;
  std::size_t expected_bn = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const Slot& s = slots_[i];
    if (s.param < 0) continue;
    expected_params += 2;
    if (expected_params > params_.size()) break;
    const Tensor& first = params_[static_cast<std::size_t>(s.param)].value;
    const Tensor& second = params_[static_cast<std::size_t>(s.param) + 1].value;
    bool ok = true;
    if (const auto* fc = std::get_if<FullyConnected>(&spec_.layers[i])) {
      ok = first.rows() == fc->in && first.cols() == fc->out && second.rows() == 1 &&
           second.cols() == fc->out;
    } else if (const auto* bn = std::get_if<BatchNorm>(&spec_.layers[i])) {
      ++expected_bn;
      ok = first.rows() == 1 && first.cols() == bn->width && second.same_shape(first) &&
           expected_bn <= bn_.size() &&
           bn_[expected_bn - 1].running_mean.same_shape(first) &&
           bn_[expected_bn - 1].running_var.same_shape(first);
    }
    if (!ok) {
      throw ShapeError("stored parameters do not match layer " + std::to_string(i) + " " +
                       layer_name(spec_.layers[i]));
    }
  }
  if (expected_params != params_.size() || expected_bn != bn_.size()) {
    throw ShapeError("stored parameter count does not match network spec '" + spec_.name + "'");
  }
  for (Parameter& p : params_) {
    if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
    if (!p.velocity.same_shape(p.value)) p.velocity = Tensor(p.value.rows(), p.value.cols());
  }
}

void Network::build_slots() {
  slots_.assign(spec_.layers.size(), Slot{});
  int next_param = 0;
  int next_bn = 0;
  std::size_t block = 0;
  bool seen_fc = false;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    if (std::holds_alternative<FullyConnected>(layer)) {
      if (seen_fc) ++block;
      seen_fc = true;
      slots_[i].param = next_param;
      next_param += 2;
    } else if (std::holds_alternative<BatchNorm>(layer)) {
      slots_[i].param = next_param;
      slots_[i].bn = next_bn++;
      next_param += 2;
    }
    slots_[i].block = block;
  }
  blocks_ = seen_fc ? block + 1 : 0;
  frozen_.assign(blocks_, false);
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<std::size_t> Network::block_parameters(std::size_t block) const {
  std::vector<std::size_t> out;
  for (const Slot& s : slots_) {
    if (s.block == block && s.param >= 0) {
      out.push_back(static_cast<std::size_t>(s.param));
      out.push_back(static_cast<std::size_t>(s.param) + 1);
    }
  }
  return out;
}

void Network::set_block_frozen(std::size_t block, bool frozen) {
  if (block >= blocks_) {
    throw std::out_of_range("block " + std::to_string(block) + " outside " +
                            std::to_string(blocks_) + " blocks");
  }
  frozen_[block] = frozen;
  for (std::size_t idx : block_parameters(block)) params_[idx].frozen = frozen;
}

bool Network::block_frozen(std::size_t block) const { return frozen_.at(block); }

Var Network::forward(Graph& g, Var x, Mode mode, std::size_t first, std::size_t last) {
  last = std::min(last, spec_.layers.size());
  if (x.cols() != 0 && first < last) {
    if (const auto* fc = std::get_if<FullyConnected>(&spec_.layers[first])) {
      if (x.cols() != fc->in) {
        throw ShapeError("network '" + spec_.name + "' layer " + std::to_string(first) +
                         " expects width " + std::to_string(fc->in) + ", input is " +
                         x.value().shape_string());
      }
    }
  }
  Var h = x;
  for (std::size_t i = first; i < last; ++i) {
    const Slot& s = slots_[i];
    h = std::visit(
        overloaded{
            [&](const FullyConnected&) {
              Var w = g.parameter(params_[static_cast<std::size_t>(s.param)]);
              Var b = g.parameter(params_[static_cast<std::size_t>(s.param) + 1]);
              return add_bias(matmul(h, w), b);
            },
            [&](const Relu&) { return relu(h); },
            [&](const BatchNorm&) {
              Var gamma = g.parameter(params_[static_cast<std::size_t>(s.param)]);
              Var beta = g.parameter(params_[static_cast<std::size_t>(s.param) + 1]);
              const Mode m = frozen_[s.block] ? Mode::eval : mode;
              return batch_norm(h, gamma, beta, bn_[static_cast<std::size_t>(s.bn)], m);
            },
            [&](const Sigmoid&) { return sigmoid(h); },
            [&](const Softmax&) { return softmax_rows(h); },
        },
        spec_.layers[i]);
  }
  return h;
}

Tensor Network::infer(const Tensor& x, std::size_t first, std::size_t last) const {
  last = std::min(last, spec_.layers.size());
  Matrix out(x.rows(), 0);
  std::size_t width = 0;
  // Process in chunks to bound the size of wide intermediate activations.
  std::vector<Matrix> chunks;
  for (std::size_t begin = 0; begin < x.rows(); begin += kInferChunk) {
    const auto count = static_cast<Eigen::Index>(std::min(kInferChunk, x.rows() - begin));
    Matrix h = x.matrix().middleRows(static_cast<Eigen::Index>(begin), count);
    for (std::size_t i = first; i < last; ++i) {
      const Slot& s = slots_[i];
      const LayerSpec& layer = spec_.layers[i];
      if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
        if (static_cast<std::size_t>(h.cols()) != fc->in) {
          throw ShapeError("network '" + spec_.name + "' layer " + std::to_string(i) +
                           " expects width " + std::to_string(fc->in) + ", got " +
                           std::to_string(h.cols()));
        }
        Matrix next(h.rows(), static_cast<Eigen::Index>(fc->out));
        next.noalias() = h * params_[static_cast<std::size_t>(s.param)].value.matrix();
        next.rowwise() += params_[static_cast<std::size_t>(s.param) + 1].value.matrix().row(0);
        h = std::move(next);
      } else if (std::holds_alternative<Relu>(layer)) {
        h = h.cwiseMax(0.0);
      } else if (std::holds_alternative<BatchNorm>(layer)) {
        const BatchNormState& st = bn_[static_cast<std::size_t>(s.bn)];
        const RowVector inv_std = (st.running_var.matrix().row(0).array() + st.epsilon).rsqrt();
        const RowVector gamma = params_[static_cast<std::size_t>(s.param)].value.matrix().row(0);
        const RowVector beta = params_[static_cast<std::size_t>(s.param) + 1].value.matrix().row(0);
        h = ((h.rowwise() - st.running_mean.matrix().row(0)).array().rowwise() *
             (inv_std.array() * gamma.array()))
                .matrix();
        h.rowwise() += beta;
      } else if (std::holds_alternative<Sigmoid>(layer)) {
        h = h.unaryExpr([](double v) {
          if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        });
      } else {
        for (Eigen::Index r = 0; r < h.rows(); ++r) {
          const double mx = h.row(r).maxCoeff();
          h.row(r) = (h.row(r).array() - mx).exp();
          h.row(r) /= h.row(r).sum();
        }
      }
    }
    width = static_cast<std::size_t>(h.cols());
    chunks.push_back(std::move(h));
  }
  Matrix result(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(width));
  Eigen::Index row = 0;
  for (const Matrix& c : chunks) {
    result.middleRows(row, c.rows()) = c;
    row += c.rows();
  }
  return Tensor(std::move(result));
}

void Network::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

bool same_parameters(const Network& a, const Network& b) {
  if (a.parameters().size() != b.parameters().size()) return false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    if (!(a.parameters()[i].value == b.parameters()[i].value)) return false;
  }
  return true;
}

Var cross_entropy(Var probs, std::span<const int> labels) {
  const Tensor& p = probs.value();
  if (labels.size() != p.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     p.shape_string() + " probabilities");
  }
  const auto k = static_cast<int>(p.cols());
  for (int l : labels) {
    if (l < 0 || l >= k) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(l) + " outside [0," +
                              std::to_string(k) + ")");
    }
  }
  const double m = static_cast<double>(p.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    total -= std::log(std::max(p(r, static_cast<std::size_t>(labels[r])), kLogClamp));
  }
  Tensor out(1, 1);
  out(0, 0) = total / m;
  std::vector<int> lab(labels.begin(), labels.end());
  return probs.graph().record(std::move(out), {probs},
                              [probs, lab = std::move(lab), m](Graph& g, const Matrix& go) {
                                const Tensor& pv = probs.value();
                                Matrix d = Matrix::Zero(pv.matrix().rows(), pv.matrix().cols());
                                for (std::size_t r = 0; r < lab.size(); ++r) {
                                  const auto c = static_cast<std::size_t>(lab[r]);
                                  const double q = pv(r, c);
                                  if (q > kLogClamp) d(r, c) = -go(0, 0) / (m * q);
                                }
                                g.accumulate(probs, d);
                              });
}

Var binary_cross_entropy(Var probs, std::span<const int> labels) {
  const Tensor& p = probs.value();
  if (p.cols() != 1 || labels.size() != p.rows()) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     p.shape_string() + " probabilities");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::out_of_range("binary_cross_entropy: label must be 0 or 1");
  }
  const double m = static_cast<double>(p.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const double q = std::clamp(p(r, 0), kLogClamp, 1.0 - kLogClamp);
    total -= labels[r] == 1 ? std::log(q) : std::log(1.0 - q);
  }
  Tensor out(1, 1);
  out(0, 0) = total / m;
  std::vector<int> lab(labels.begin(), labels.end());
  return probs.graph().record(std::move(out), {probs},
                              [probs, lab = std::move(lab), m](Graph& g, const Matrix& go) {
                                const Tensor& pv = probs.value();
                                Matrix d = Matrix::Zero(pv.matrix().rows(), 1);
                                for (std::size_t r = 0; r < lab.size(); ++r) {
                                  const double q = pv(r, 0);
                                  if (q <= kLogClamp || q >= 1.0 - kLogClamp) continue;
                                  d(r, 0) = go(0, 0) *
                                            (lab[r] == 1 ? -1.0 / q : 1.0 / (1.0 - q)) / m;
                                }
                                g.accumulate(probs, d);
                              });
}

void sgd_step(std::span<Parameter> params, double learning_rate, double momentum) {
  for (Parameter& p : params) {
    if (p.frozen) continue;
    p.velocity.map() = momentum * p.velocity.matrix() + p.grad.matrix();
    p.value.map() -= learning_rate * p.velocity.matrix();
  }
}

void sgd_step(Network& net, double learning_rate, double momentum) {
  sgd_step(std::span<Parameter>(net.parameters()), learning_rate, momentum);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (epochs < 1) throw std::invalid_argument("epoch count must be at least 1");
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t rows, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {fnv1a("epoch"), epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t begin = 0; begin < rows; begin += batch_size) {
    const std::size_t end = std::min(rows, begin + batch_size);
    if (end - begin == 1 && !batches.empty()) {
      batches.back().push_back(order[begin]);
    } else {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return batches;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.matrix().cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.matrix().row(static_cast<Eigen::Index>(rows[i]));
  }
  return Tensor(std::move(out));
}

std::vector<int> gather(std::span<const int> values, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(values[r]);
  return out;
}

void fit_classifier(Network& net, const Tensor& inputs, std::span<const int> labels,
                    const TrainConfig& cfg) {
  if (inputs.rows() != labels.size()) {
    throw DataError("input rows and label count differ");
  }
  if (inputs.cols() != net.spec().input_width()) {
    throw ShapeError("input width " + std::to_string(inputs.cols()) +
                     " does not match network input " + std::to_string(net.spec().input_width()));
  }
  if (inputs.rows() < 2) throw DataError("need at least two training rows");
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, {fnv1a("shuffle")});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : epoch_batches(inputs.rows(), cfg.batch_size, shuffle_seed, epoch)) {
      Graph g;
      Var x = g.constant(gather_rows(inputs, batch));
      const std::vector<int> y = gather(labels, batch);
      Var loss = cross_entropy(net.forward(g, x, Mode::train), y);
      net.zero_grad();
      g.backward(loss);
      sgd_step(net, cfg.learning_rate, cfg.momentum);
    }
  }
  net.zero_grad();
}

Network train_classifier(Network net, const Tensor& inputs, std::span<const int> labels,
                         const TrainConfig& cfg) {
  cfg.validate();
  fit_classifier(net, inputs, labels, cfg);
  return net;
}

Network train_classifier(Network net, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (!data.labeled()) throw DataError("train_classifier needs labeled data");
  const Tensor x = one_hot(data);
  fit_classifier(net, x, data.labels(), cfg);
  return net;
}

std::vector<int> argmax_rows(const Tensor& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Tensor& probs, std::span<const int> labels) {
  if (probs.rows() == 0) throw DataError("accuracy of an empty dataset");
  if (probs.rows() != labels.size()) throw DataError("prediction and label counts differ");
  const auto pred = argmax_rows(probs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double evaluate(const Network& net, const Tensor& inputs, std::span<const int> labels) {
  if (inputs.rows() == 0) throw DataError("evaluate on an empty dataset");
  return accuracy(net.infer(inputs), labels);
}

double evaluate(const Network& net, const Dataset& data) {
  if (data.rows() == 0) throw DataError("evaluate on an empty dataset");
  return evaluate(net, one_hot(data), data.labels());
}

}  // namespace dtl
