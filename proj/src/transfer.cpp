#include "dtl/transfer.hpp"

#include "dtl/random.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace dtl {

namespace {

// Endless stream of shuffled row indices; reshuffles after every pass.
class IndexCycler {
 public:
  IndexCycler(std::size_t rows, std::uint64_t seed) : order_(rows), seed_(seed) {
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t count) {
    count = std::min(count, order_.size());
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed(seed_, {round_++}));
    std::shuffle(order_.begin(), order_.end(), rng);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::uint64_t seed_;
  std::uint64_t round_ = 0;
  std::size_t pos_ = 0;
};

std::vector<int> constant_labels(std::size_t n, int value) { return std::vector<int>(n, value); }

void check_pair(const Dataset& source, const Dataset& target) {
  if (!source.labeled()) throw DataError("source data must be labeled");
  if (source.arities() != target.arities()) {
    throw DataError("source and target feature arities differ");
  }
  if (source.rows() < 2) throw DataError("need at least two source rows");
  if (target.rows() < 2) throw DataError("need at least two target rows");
}

std::size_t class_count(const Dataset& data, std::size_t minimum) {
  std::size_t k = minimum;
  for (int l : data.labels()) k = std::max(k, static_cast<std::size_t>(l) + 1);
  return k;
}

void check_output(const NetworkSpec& spec, const Dataset& data, const char* what) {
  if (class_count(data, 0) > spec.output_width()) {
    throw DataError(std::string(what) + " labels exceed the classifier's " +
                    std::to_string(spec.output_width()) + " classes");
  }
}

}  // namespace

Var discrepancy(Var p1, Var p2) {
  if (!p1.value().same_shape(p2.value())) {
    throw ShapeError("discrepancy: width mismatch " + p1.value().shape_string() + " vs " +
                     p2.value().shape_string());
  }
  return mean(abs(sub(p1, p2)));
}

double discrepancy(const Tensor& p1, const Tensor& p2) {
  if (!p1.same_shape(p2)) {
    throw ShapeError("discrepancy: width mismatch " + p1.shape_string() + " vs " +
                     p2.shape_string());
  }
  if (p1.size() == 0) throw ShapeError("discrepancy of empty tensors");
  return (p1.matrix() - p2.matrix()).cwiseAbs().sum() / static_cast<double>(p1.size());
}

// ---------------------------------------------------------------------------
// DANN

DannSpecs DannSpecs::standard(std::size_t input, std::size_t classes,
                              bool label_relu_before_softmax) {
  return {presets::feature_extractor(input),
          presets::label_predictor(classes, label_relu_before_softmax),
          presets::domain_classifier()};
}

DannModel init_dann(const DannSpecs& specs, std::uint64_t seed) {
  if (specs.feature_extractor.output_width() != specs.label_predictor.input_width() ||
      specs.feature_extractor.output_width() != specs.domain_classifier.input_width()) {
    throw std::invalid_argument("feature extractor width does not feed both heads");
  }
  if (specs.domain_classifier.output_width() != 1) {
    throw std::invalid_argument("domain classifier must output one probability");
  }
  return DannModel{
      Network::init(compose(specs.feature_extractor, specs.label_predictor, "backbone"), seed),
      specs.feature_extractor.layers.size(),
      Network::init(specs.domain_classifier, derive_seed(seed, {fnv1a("domain")})), 0.0};
}

Tensor DannModel::features(const Tensor& inputs) const {
  return backbone.infer(inputs, 0, feature_layers);
}

Tensor DannModel::predict(const Tensor& inputs) const { return backbone.infer(inputs); }

double DannModel::evaluate(const Dataset& data) const {
  if (data.rows() == 0) throw DataError("evaluate on an empty dataset");
  return accuracy(predict(one_hot(data)), data.labels());
}

double DannModel::domain_accuracy(const Tensor& source_inputs, const Tensor& target_inputs) const {
  const Tensor ps = domain_classifier.infer(features(source_inputs));
  const Tensor pt = domain_classifier.infer(features(target_inputs));
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ps.rows(); ++r) correct += ps(r, 0) < 0.5 ? 1 : 0;
  for (std::size_t r = 0; r < pt.rows(); ++r) correct += pt(r, 0) >= 0.5 ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(ps.rows() + pt.rows());
}

ModelBundle DannModel::to_bundle() const {
  ModelBundle b;
  b.algorithm = "dann";
  b.metadata["lambda"] = std::to_string(lambda);
  b.metadata["feature_layers"] = std::to_string(feature_layers);
  b.networks.emplace("backbone", backbone);
  b.networks.emplace("domain_classifier", domain_classifier);
  b.heads = {"backbone"};
  return b;
}

DannTrainer::DannTrainer(DannModel& model, double learning_rate, double momentum)
    : model_(model), learning_rate_(learning_rate), momentum_(momentum) {}

double DannTrainer::step(const Tensor& xs, std::span<const int> ys, const Tensor& xt,
                         std::span<const int> yt) {
  Network& net = model_.backbone;
  const std::size_t split = model_.feature_layers;
  Graph g;
  Var fs = net.forward(g, g.constant(xs), Mode::train, 0, split);
  Var loss = cross_entropy(net.forward(g, fs, Mode::train, split), ys);
  Var ft = net.forward(g, g.constant(xt), Mode::train, 0, split);
  if (!yt.empty()) loss = add(loss, cross_entropy(net.forward(g, ft, Mode::train, split), yt));

  Var both = concat_rows(grad_reverse(fs, model_.lambda), grad_reverse(ft, model_.lambda));
  Var domain = model_.domain_classifier.forward(g, both, Mode::train);
  const std::size_t ns = xs.rows();
  Var domain_loss =
      add(binary_cross_entropy(slice_rows(domain, 0, ns), constant_labels(ns, 0)),
          binary_cross_entropy(slice_rows(domain, ns, ns + xt.rows()),
                               constant_labels(xt.rows(), 1)));
  loss = add(loss, domain_loss);

  net.zero_grad();
  model_.domain_classifier.zero_grad();
  g.backward(loss);
  sgd_step(net, learning_rate_, momentum_);
  sgd_step(model_.domain_classifier, learning_rate_, momentum_);
  return loss.value()(0, 0);
}

DannModel train_dann(const Dataset& source, const Dataset& target, const DannSpecs& specs,
                     const DannConfig& cfg) {
  cfg.train.validate();
  check_pair(source, target);
  if (cfg.use_target_labels && !target.labeled()) {
    throw DataError("target labels requested but the target data is unlabeled");
  }
  check_output(specs.label_predictor, source, "source");
  DannModel model = init_dann(specs, cfg.train.seed);
  model.lambda = resolve_lambda(cfg.schedule, cfg.kl);

  const Tensor xs_all = one_hot(source);
  const Tensor xt_all = one_hot(target, source.arities());
  const std::vector<int>& ys_all = source.labels();
  const std::vector<int> no_labels;
  const std::vector<int>& yt_all = cfg.use_target_labels ? target.labels() : no_labels;

  DannTrainer trainer(model, cfg.train.learning_rate, cfg.train.momentum);
  // Source batches follow the same schedule as train_classifier.
  const std::uint64_t shuffle_seed = derive_seed(cfg.train.seed, {fnv1a("shuffle")});
  IndexCycler target_rows(target.rows(), derive_seed(cfg.train.seed, {fnv1a("target")}));
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    for (const auto& batch :
         epoch_batches(source.rows(), cfg.train.batch_size, shuffle_seed, epoch)) {
      const auto tb = target_rows.next(batch.size());
      const std::vector<int> yt = cfg.use_target_labels ? gather(yt_all, tb) : std::vector<int>{};
      trainer.step(gather_rows(xs_all, batch), gather(ys_all, batch), gather_rows(xt_all, tb), yt);
    }
  }
  model.backbone.zero_grad();
  model.domain_classifier.zero_grad();
  return model;
}

// ---------------------------------------------------------------------------
// MCD

McdSpecs McdSpecs::standard(std::size_t input, std::size_t classes) {
  return {presets::feature_extractor(input), presets::mcd_classifier(classes)};
}

McdModel init_mcd(const McdSpecs& specs, std::uint64_t seed) {
  if (specs.generator.output_width() != specs.classifier.input_width()) {
    throw std::invalid_argument("generator width does not feed the classifiers");
  }
  return McdModel{Network::init(specs.generator, seed),
                  Network::init(specs.classifier, derive_seed(seed, {fnv1a("classifier1")})),
                  Network::init(specs.classifier, derive_seed(seed, {fnv1a("classifier2")})),
                  1.0,
                  4,
                  McdInference::classifier1};
}

Tensor McdModel::predict(const Tensor& inputs) const {
  const Tensor h = generator.infer(inputs);
  switch (inference) {
    case McdInference::classifier1:
      return classifier1.infer(h);
    case McdInference::classifier2:
      return classifier2.infer(h);
    case McdInference::average:
      break;
  }
  Matrix avg = (classifier1.infer(h).matrix() + classifier2.infer(h).matrix()) * 0.5;
  return Tensor(std::move(avg));
}

double McdModel::evaluate(const Dataset& data) const {
  if (data.rows() == 0) throw DataError("evaluate on an empty dataset");
  return accuracy(predict(one_hot(data)), data.labels());
}

ModelBundle McdModel::to_bundle() const {
  ModelBundle b;
  b.algorithm = "mcd";
  b.metadata["lambda"] = std::to_string(lambda);
  b.metadata["generator_steps"] = std::to_string(generator_steps);
  b.networks.emplace("generator", generator);
  b.networks.emplace("classifier1", classifier1);
  b.networks.emplace("classifier2", classifier2);
  b.trunk = {"generator"};
  switch (inference) {
    case McdInference::classifier1:
      b.heads = {"classifier1"};
      break;
    case McdInference::classifier2:
      b.heads = {"classifier2"};
      break;
    case McdInference::average:
      b.heads = {"classifier1", "classifier2"};
      break;
  }
  return b;
}

McdTrainer::McdTrainer(McdModel& model, double learning_rate, double momentum)
    : model_(model), learning_rate_(learning_rate), momentum_(momentum) {}

double McdTrainer::step_source(const Tensor& xs, std::span<const int> ys) {
  Graph g;
  Var h = model_.generator.forward(g, g.constant(xs), Mode::train);
  Var loss = add(cross_entropy(model_.classifier1.forward(g, h, Mode::train), ys),
                 cross_entropy(model_.classifier2.forward(g, h, Mode::train), ys));
  model_.generator.zero_grad();
  model_.classifier1.zero_grad();
  model_.classifier2.zero_grad();
  g.backward(loss);
  sgd_step(model_.generator, learning_rate_, momentum_);
  sgd_step(model_.classifier1, learning_rate_, momentum_);
  sgd_step(model_.classifier2, learning_rate_, momentum_);
  return loss.value()(0, 0);
}

double McdTrainer::step_classifiers(const Tensor& xs, std::span<const int> ys, const Tensor& xt) {
  // The generator is not updated here, so its outputs enter as constants.
  Tensor hs_value;
  Tensor ht_value;
  {
    Graph gen;
    hs_value = model_.generator.forward(gen, gen.constant(xs), Mode::train).value();
    ht_value = model_.generator.forward(gen, gen.constant(xt), Mode::train).value();
  }
  Graph g;
  Var hs = g.constant(std::move(hs_value));
  Var ht = g.constant(std::move(ht_value));
  Var source_loss = add(cross_entropy(model_.classifier1.forward(g, hs, Mode::train), ys),
                        cross_entropy(model_.classifier2.forward(g, hs, Mode::train), ys));
  Var adv = discrepancy(model_.classifier1.forward(g, ht, Mode::train),
                        model_.classifier2.forward(g, ht, Mode::train));
  Var loss = sub(source_loss, scale(adv, model_.lambda));
  model_.classifier1.zero_grad();
  model_.classifier2.zero_grad();
  g.backward(loss);
  sgd_step(model_.classifier1, learning_rate_, momentum_);
  sgd_step(model_.classifier2, learning_rate_, momentum_);
  return loss.value()(0, 0);
}

double McdTrainer::step_generator(const Tensor& xt) {
  Graph g;
  Var ht = model_.generator.forward(g, g.constant(xt), Mode::train);
  Var loss = discrepancy(model_.classifier1.forward(g, ht, Mode::train),
                         model_.classifier2.forward(g, ht, Mode::train));
  model_.generator.zero_grad();
  model_.classifier1.zero_grad();
  model_.classifier2.zero_grad();
  g.backward(loss);
  sgd_step(model_.generator, learning_rate_, momentum_);
  model_.classifier1.zero_grad();
  model_.classifier2.zero_grad();
  return loss.value()(0, 0);
}

McdModel train_mcd(const Dataset& source, const Dataset& target, const McdSpecs& specs,
                   const McdConfig& cfg) {
  cfg.train.validate();
  check_pair(source, target);
  check_output(specs.classifier, source, "source");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("MCD lambda must be nonnegative");
  McdModel model = init_mcd(specs, cfg.train.seed);
  model.lambda = cfg.lambda;
  model.generator_steps = cfg.generator_steps;
  model.inference = cfg.inference;

  const Tensor xs_all = one_hot(source);
  const Tensor xt_all = one_hot(target, source.arities());
  const std::vector<int>& ys_all = source.labels();
  McdTrainer trainer(model, cfg.train.learning_rate, cfg.train.momentum);
  const std::uint64_t shuffle_seed = derive_seed(cfg.train.seed, {fnv1a("shuffle")});
  IndexCycler target_rows(target.rows(), derive_seed(cfg.train.seed, {fnv1a("target")}));
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    for (const auto& batch :
         epoch_batches(source.rows(), cfg.train.batch_size, shuffle_seed, epoch)) {
      const Tensor xs = gather_rows(xs_all, batch);
      const std::vector<int> ys = gather(ys_all, batch);
      const Tensor xt = gather_rows(xt_all, target_rows.next(batch.size()));
      trainer.step_source(xs, ys);
      trainer.step_classifiers(xs, ys, xt);
      for (std::size_t c = 0; c < cfg.generator_steps; ++c) trainer.step_generator(xt);
    }
  }
  model.generator.zero_grad();
  model.classifier1.zero_grad();
  model.classifier2.zero_grad();
  return model;
}

// ---------------------------------------------------------------------------
// Fine-tuning

std::string FreezeStrategy::to_string() const {
  switch (kind_) {
    case Kind::retrain_all:
      return "retrain_all";
    case Kind::freeze_first_k:
      return "freeze_first_" + std::to_string(k_);
    case Kind::retrain_last_k:
      return "retrain_last_" + std::to_string(k_);
  }
  return "";
}

std::vector<bool> FreezeStrategy::frozen_blocks(std::size_t blocks) const {
  std::vector<bool> frozen(blocks, false);
  switch (kind_) {
    case Kind::retrain_all:
      break;
    case Kind::freeze_first_k:
      if (k_ > blocks) {
        throw std::invalid_argument("cannot freeze " + std::to_string(k_) + " of " +
                                    std::to_string(blocks) + " layers");
      }
      for (std::size_t b = 0; b < k_; ++b) frozen[b] = true;
      break;
    case Kind::retrain_last_k:
      if (k_ < 1 || k_ > blocks) {
        throw std::invalid_argument("cannot retrain the last " + std::to_string(k_) + " of " +
                                    std::to_string(blocks) + " layers");
      }
      for (std::size_t b = 0; b + k_ < blocks; ++b) frozen[b] = true;
      break;
  }
  return frozen;
}

Network fine_tune(const Network& source_model, const Dataset& target,
                  const FreezeStrategy& strategy, const TrainConfig& cfg) {
  TrainConfig check = cfg;
  check.epochs = std::max<std::size_t>(cfg.epochs, 1);
  check.validate();
  if (!target.labeled()) throw DataError("fine-tuning needs labeled target data");
  check_output(source_model.spec(), target, "target");
  const std::vector<bool> frozen = strategy.frozen_blocks(source_model.block_count());

  Network net = source_model;
  for (Parameter& p : net.parameters()) {
    p.zero_grad();
    p.velocity.map().setZero();
  }
  for (std::size_t b = 0; b < frozen.size(); ++b) net.set_block_frozen(b, frozen[b]);
  if (cfg.epochs > 0) fit_classifier(net, one_hot(target), target.labels(), cfg);
  for (std::size_t b = 0; b < frozen.size(); ++b) net.set_block_frozen(b, false);
  return net;
}

// ---------------------------------------------------------------------------
// Baselines

Network train_source_baseline(const Dataset& source, const NetworkSpec& spec,
                              const TrainConfig& cfg) {
  cfg.validate();
  check_output(spec, source, "source");
  return train_classifier(Network::init(spec, cfg.seed), source, cfg);
}

Network train_target_baseline(const Dataset& target, const NetworkSpec& spec,
                              const TrainConfig& cfg) {
  cfg.validate();
  check_output(spec, target, "target");
  return train_classifier(Network::init(spec, cfg.seed), target, cfg);
}

ModelBundle classifier_bundle(const Network& net, std::string algorithm) {
  ModelBundle b;
  b.algorithm = std::move(algorithm);
  b.networks.emplace("backbone", net);
  b.heads = {"backbone"};
  return b;
}

}  // namespace dtl
