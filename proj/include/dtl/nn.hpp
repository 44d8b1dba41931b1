#pragma once

// Fully-connected networks built from declarative layer lists, their losses,
// and a seeded mini-batch SGD loop.

#include "dtl/autodiff.hpp"
#include "dtl/bayesnet.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dtl {

struct FullyConnected {
  std::size_t in = 0;
  std::size_t out = 0;
  friend bool operator==(const FullyConnected&, const FullyConnected&) = default;
};
struct Relu {
  friend bool operator==(const Relu&, const Relu&) = default;
};
struct BatchNorm {
  std::size_t width = 0;
  friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};
struct Sigmoid {
  friend bool operator==(const Sigmoid&, const Sigmoid&) = default;
};
struct Softmax {
  friend bool operator==(const Softmax&, const Softmax&) = default;
};

using LayerSpec = std::variant<FullyConnected, Relu, BatchNorm, Sigmoid, Softmax>;

std::string layer_name(const LayerSpec& layer);

/// Ordered layer list. A "block" is a fully-connected layer together with
/// everything up to the next fully-connected layer; freezing works per block.
struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;

  /// Throws std::invalid_argument on inconsistent widths or an empty list.
  void validate() const;
  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t block_count() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// `first` followed by `second`.
NetworkSpec compose(const NetworkSpec& first, const NetworkSpec& second, std::string name);

namespace presets {

inline constexpr std::size_t kHidden = 128;
inline constexpr std::size_t kDomainHidden = 1024;

// Architectures tried on the real-world tasks.
NetworkSpec m1(std::size_t input, std::size_t classes);
NetworkSpec m2(std::size_t input, std::size_t classes);
NetworkSpec m3(std::size_t input, std::size_t classes);
NetworkSpec m4(std::size_t input, std::size_t classes);
NetworkSpec m5(std::size_t input, std::size_t classes);
NetworkSpec m6(std::size_t input, std::size_t classes);

/// FC(in->128) ReLU FC(128->128) ReLU. Shared by DANN and MCD.
NetworkSpec feature_extractor(std::size_t input);
/// FC(128->classes) BN ReLU softmax. The ReLU can be dropped.
NetworkSpec label_predictor(std::size_t classes, bool relu_before_softmax = true);
/// FC(128->1024) BN ReLU FC(1024->1024) BN ReLU FC(1024->1) sigmoid.
NetworkSpec domain_classifier();
/// FC(128->128) ReLU FC(128->128) ReLU FC(128->classes) softmax.
NetworkSpec mcd_classifier(std::size_t classes);
/// Baseline backbone: feature_extractor composed with label_predictor.
NetworkSpec backbone(std::size_t input, std::size_t classes, bool relu_before_softmax = true);

/// Looks up m1..m6, feature_extractor, label_predictor, domain_classifier,
/// mcd_classifier or backbone by name.
NetworkSpec by_name(std::string_view name, std::size_t input, std::size_t classes);

}  // namespace presets

/// Trainable state for a NetworkSpec.
class Network {
 public:
  static constexpr std::size_t kAllLayers = std::numeric_limits<std::size_t>::max();

  /// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases;
  /// batch-norm scale 1, shift 0. Deterministic given the seed.
  static Network init(NetworkSpec spec, std::uint64_t seed);

  /// Assembles a network from stored state; shapes are checked.
  Network(NetworkSpec spec, std::uint64_t seed, std::vector<Parameter> params,
          std::vector<BatchNormState> batch_norm);

  const NetworkSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<BatchNormState>& batch_norm_states() { return bn_; }
  const std::vector<BatchNormState>& batch_norm_states() const { return bn_; }
  std::size_t parameter_count() const;

  std::size_t layer_count() const { return spec_.layers.size(); }
  std::size_t block_count() const { return blocks_; }
  std::size_t block_of_layer(std::size_t layer) const { return slots_[layer].block; }
  /// Indices into parameters() owned by a block.
  std::vector<std::size_t> block_parameters(std::size_t block) const;

  /// Frozen blocks receive no SGD updates and run batch-norm on running stats.
  void set_block_frozen(std::size_t block, bool frozen);
  bool block_frozen(std::size_t block) const;

  /// Records layers [first, last) on the graph. In train mode batch-norm
  /// layers of unfrozen blocks use batch statistics and update running stats.
  Var forward(Graph& g, Var x, Mode mode, std::size_t first = 0, std::size_t last = kAllLayers);

  /// Eval-mode forward without a graph. Safe to call concurrently.
  Tensor infer(const Tensor& x, std::size_t first = 0, std::size_t last = kAllLayers) const;

  void zero_grad();

 private:
  Network() = default;
  void build_slots();

  struct Slot {
    int param = -1;  // first parameter index (weight/scale); -1 if none
    int bn = -1;     // batch-norm state index
    std::size_t block = 0;
  };

  NetworkSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<Parameter> params_;
  std::vector<BatchNormState> bn_;
  std::vector<Slot> slots_;
  std::vector<bool> frozen_;
  std::size_t blocks_ = 0;
};

bool same_parameters(const Network& a, const Network& b);

inline constexpr double kLogClamp = 1e-12;

/// Mean of -log p(label) over the batch, with p clamped below at 1e-12.
Var cross_entropy(Var probs, std::span<const int> labels);
/// Mean binary cross-entropy of an m x 1 column of probabilities.
Var binary_cross_entropy(Var probs, std::span<const int> labels);

/// v <- momentum * v + g; p <- p - lr * v. Frozen parameters are skipped.
void sgd_step(std::span<Parameter> params, double learning_rate, double momentum);
void sgd_step(Network& net, double learning_rate, double momentum);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Shuffled mini-batches for one epoch, seeded from (seed, epoch). A trailing
/// batch of a single row is merged into the previous one.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t rows, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
std::vector<int> gather(std::span<const int> values, std::span<const std::size_t> rows);

/// Mini-batch SGD on cross-entropy. `net` must end in a softmax.
Network train_classifier(Network net, const Dataset& data, const TrainConfig& cfg);
Network train_classifier(Network net, const Tensor& inputs, std::span<const int> labels,
                         const TrainConfig& cfg);

/// Same loop without the epochs >= 1 check; zero epochs returns `net` as is.
void fit_classifier(Network& net, const Tensor& inputs, std::span<const int> labels,
                    const TrainConfig& cfg);

/// Row-wise argmax, ties to the lowest index.
std::vector<int> argmax_rows(const Tensor& probs);
double accuracy(const Tensor& probs, std::span<const int> labels);
double evaluate(const Network& net, const Dataset& data);
double evaluate(const Network& net, const Tensor& inputs, std::span<const int> labels);

}  // namespace dtl
