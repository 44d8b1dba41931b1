#pragma once

// Transfer strategies: domain-adversarial training (DANN), maximum classifier
// discrepancy (MCD), warm-start fine-tuning with frozen blocks, and the
// source-only / target-only baselines they are compared against.

#include "dtl/divergence.hpp"
#include "dtl/nn.hpp"
#include "dtl/serialize.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dtl {

/// Mean over rows of (1/K) sum_k |p1_k - p2_k|.
Var discrepancy(Var p1, Var p2);
double discrepancy(const Tensor& p1, const Tensor& p2);

// ---------------------------------------------------------------------------
// DANN

struct DannSpecs {
  NetworkSpec feature_extractor;
  NetworkSpec label_predictor;
  NetworkSpec domain_classifier;

  /// Standard sub-networks for `input`-wide one-hot data and `classes` labels.
  static DannSpecs standard(std::size_t input, std::size_t classes,
                            bool label_relu_before_softmax = true);
};

struct DannConfig {
  TrainConfig train;
  LambdaSchedule schedule = LambdaSchedule::fixed(1.0);
  /// Divergence handed to the schedule; 0 when unknown.
  double kl = 0.0;
  /// Adds target cross-entropy (same weight as the source term).
  bool use_target_labels = false;
};

struct DannModel {
  /// Feature extractor followed by label predictor, as one network so the
  /// prediction path is identical to a baseline with the same spec and seed.
  Network backbone;
  /// Layers [0, feature_layers) of the backbone form the feature extractor.
  std::size_t feature_layers = 0;
  Network domain_classifier;
  double lambda = 0.0;

  Tensor features(const Tensor& inputs) const;
  Tensor predict(const Tensor& inputs) const;
  double evaluate(const Dataset& data) const;
  /// Fraction of rows the domain classifier assigns to the right domain
  /// (source = 0, target = 1).
  double domain_accuracy(const Tensor& source_inputs, const Tensor& target_inputs) const;
  ModelBundle to_bundle() const;
};

/// Initializes a DANN model. The backbone uses train.seed, exactly as a
/// baseline would.
DannModel init_dann(const DannSpecs& specs, std::uint64_t seed);

/// One optimisation step per call: source cross-entropy (plus target
/// cross-entropy when target labels are given) and the domain loss
///   BCE(G_d(R(G_f(xs))), 0) + BCE(G_d(R(G_f(xt))), 1)
/// where R reverses gradients scaled by lambda.
class DannTrainer {
 public:
  DannTrainer(DannModel& model, double learning_rate, double momentum);
  double step(const Tensor& xs, std::span<const int> ys, const Tensor& xt,
              std::span<const int> yt = {});

 private:
  DannModel& model_;
  double learning_rate_;
  double momentum_;
};

DannModel train_dann(const Dataset& source, const Dataset& target, const DannSpecs& specs,
                     const DannConfig& cfg);

// ---------------------------------------------------------------------------
// MCD

enum class McdInference { classifier1, classifier2, average };

struct McdSpecs {
  NetworkSpec generator;
  NetworkSpec classifier;

  static McdSpecs standard(std::size_t input, std::size_t classes);
};

struct McdConfig {
  TrainConfig train;
  double lambda = 1.0;
  /// Repetitions of the generator step per iteration.
  std::size_t generator_steps = 4;
  McdInference inference = McdInference::classifier1;
};

struct McdModel {
  Network generator;
  Network classifier1;
  Network classifier2;
  double lambda = 1.0;
  std::size_t generator_steps = 4;
  McdInference inference = McdInference::classifier1;

  Tensor predict(const Tensor& inputs) const;
  double evaluate(const Dataset& data) const;
  ModelBundle to_bundle() const;
};

/// Generator from `seed`; the two classifiers from distinct derived seeds.
McdModel init_mcd(const McdSpecs& specs, std::uint64_t seed);

class McdTrainer {
 public:
  McdTrainer(McdModel& model, double learning_rate, double momentum);

  /// Updates G, F1, F2 on CE(F1) + CE(F2) over the source batch.
  double step_source(const Tensor& xs, std::span<const int> ys);
  /// Updates F1, F2 only on CE(F1) + CE(F2) - lambda * discrepancy(target).
  double step_classifiers(const Tensor& xs, std::span<const int> ys, const Tensor& xt);
  /// Updates G only on discrepancy(target).
  double step_generator(const Tensor& xt);

 private:
  McdModel& model_;
  double learning_rate_;
  double momentum_;
};

McdModel train_mcd(const Dataset& source, const Dataset& target, const McdSpecs& specs,
                   const McdConfig& cfg);

// ---------------------------------------------------------------------------
// Fine-tuning

class FreezeStrategy {
 public:
  enum class Kind { retrain_all, freeze_first_k, retrain_last_k };

  static FreezeStrategy retrain_all() { return {Kind::retrain_all, 0}; }
  static FreezeStrategy freeze_first(std::size_t k) { return {Kind::freeze_first_k, k}; }
  static FreezeStrategy retrain_last(std::size_t k) { return {Kind::retrain_last_k, k}; }

  Kind kind() const { return kind_; }
  std::size_t k() const { return k_; }
  std::string to_string() const;

  /// Per-block frozen flags; throws std::invalid_argument when k does not
  /// fit `blocks`.
  std::vector<bool> frozen_blocks(std::size_t blocks) const;

 private:
  FreezeStrategy(Kind kind, std::size_t k) : kind_(kind), k_(k) {}
  Kind kind_;
  std::size_t k_;
};

/// Warm-starts from `source_model` and trains the unfrozen blocks on labeled
/// target data. Optimizer state starts fresh. Zero epochs is allowed and
/// returns the source parameters.
Network fine_tune(const Network& source_model, const Dataset& target,
                  const FreezeStrategy& strategy, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Baselines

Network train_source_baseline(const Dataset& source, const NetworkSpec& spec,
                              const TrainConfig& cfg);
Network train_target_baseline(const Dataset& target, const NetworkSpec& spec,
                              const TrainConfig& cfg);

/// Wraps a single classifier network in a bundle.
ModelBundle classifier_bundle(const Network& net, std::string algorithm);

}  // namespace dtl
