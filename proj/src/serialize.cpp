#include "dtl/serialize.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace dtl {

namespace {

using json = nlohmann::ordered_json;

json layer_to_json(const LayerSpec& layer) {
  if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
    return {{"type", "fc"}, {"in", fc->in}, {"out", fc->out}};
  }
  if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
    return {{"type", "batch_norm"}, {"width", bn->width}};
  }
  if (std::holds_alternative<Relu>(layer)) return {{"type", "relu"}};
  if (std::holds_alternative<Sigmoid>(layer)) return {{"type", "sigmoid"}};
  return {{"type", "softmax"}};
}

LayerSpec layer_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "fc") return FullyConnected{j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>()};
  if (type == "batch_norm") return BatchNorm{j.at("width").get<std::size_t>()};
  if (type == "relu") return Relu{};
  if (type == "sigmoid") return Sigmoid{};
  if (type == "softmax") return Softmax{};
  throw FormatError("unknown layer type '" + type + "'");
}

json row_to_json(const Tensor& t) { return std::vector<double>(t.values().begin(), t.values().end()); }

Tensor tensor_from_json(const json& values, std::size_t rows, std::size_t cols) {
  return Tensor(rows, cols, values.get<std::vector<double>>());
}

json network_json(const Network& net) {
  json j;
  j["format"] = "dtl-network";
  j["version"] = kNetworkFormatVersion;
  j["name"] = net.spec().name;
  j["seed"] = net.seed();
  json layers = json::array();
  for (const auto& l : net.spec().layers) layers.push_back(layer_to_json(l));
  j["layers"] = std::move(layers);
  json params = json::array();
  for (const Parameter& p : net.parameters()) {
    params.push_back({{"name", p.name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"values", row_to_json(p.value)}});
  }
  j["parameters"] = std::move(params);
  json bn = json::array();
  for (const BatchNormState& s : net.batch_norm_states()) {
    bn.push_back({{"running_mean", row_to_json(s.running_mean)},
                  {"running_var", row_to_json(s.running_var)},
                  {"momentum", s.momentum},
                  {"epsilon", s.epsilon}});
  }
  j["batch_norm"] = std::move(bn);
  return j;
}

Network network_from(const json& j) {
  if (j.value("format", std::string()) != "dtl-network") {
    throw FormatError("not a network file (format field missing or wrong)");
  }
  const int version = j.at("version").get<int>();
  if (version != kNetworkFormatVersion) {
    throw FormatError("unsupported network file version " + std::to_string(version));
  }
  NetworkSpec spec;
  spec.name = j.at("name").get<std::string>();
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
  std::vector<Parameter> params;
  for (const auto& p : j.at("parameters")) {
    params.emplace_back(p.at("name").get<std::string>(),
                        tensor_from_json(p.at("values"), p.at("rows").get<std::size_t>(),
                                         p.at("cols").get<std::size_t>()));
  }
  std::vector<BatchNormState> bn;
  for (const auto& s : j.at("batch_norm")) {
    const auto mean = s.at("running_mean").get<std::vector<double>>();
    const auto var = s.at("running_var").get<std::vector<double>>();
    BatchNormState state;
    state.running_mean = Tensor(1, mean.size(), mean);
    state.running_var = Tensor(1, var.size(), var);
    state.momentum = s.at("momentum").get<double>();
    state.epsilon = s.at("epsilon").get<double>();
    bn.push_back(std::move(state));
  }
  return Network(std::move(spec), j.at("seed").get<std::uint64_t>(), std::move(params),
                 std::move(bn));
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid network: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string network_to_json(const Network& net) { return network_json(net).dump(); }

Network network_from_json(const std::string& text) {
  return guarded([&] { return network_from(json::parse(text)); });
}

const Network& ModelBundle::network(const std::string& name) const {
  auto it = networks.find(name);
  if (it == networks.end()) throw FormatError("model bundle has no network '" + name + "'");
  return it->second;
}

Tensor ModelBundle::predict(const Tensor& inputs) const {
  if (heads.empty()) throw FormatError("model bundle has no inference heads");
  Tensor h = inputs;
  for (const auto& name : trunk) h = network(name).infer(h);
  Matrix total;
  for (const auto& name : heads) {
    Tensor p = network(name).infer(h);
    if (total.size() == 0) {
      total = p.matrix();
    } else {
      total += p.matrix();
    }
  }
  total /= static_cast<double>(heads.size());
  return Tensor(std::move(total));
}

double ModelBundle::evaluate(const Dataset& data) const {
  if (data.rows() == 0) throw DataError("evaluate on an empty dataset");
  return accuracy(predict(one_hot(data)), data.labels());
}

std::string bundle_to_json(const ModelBundle& bundle) {
  json j;
  j["format"] = "dtl-model";
  j["version"] = kNetworkFormatVersion;
  j["algorithm"] = bundle.algorithm;
  j["metadata"] = bundle.metadata;
  j["trunk"] = bundle.trunk;
  j["heads"] = bundle.heads;
  json nets = json::object();
  for (const auto& [name, net] : bundle.networks) nets[name] = network_json(net);
  j["networks"] = std::move(nets);
  return j.dump();
}

ModelBundle bundle_from_json(const std::string& text) {
  return guarded([&] {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != "dtl-model") {
      throw FormatError("not a model file (format field missing or wrong)");
    }
    const int version = j.at("version").get<int>();
    if (version != kNetworkFormatVersion) {
      throw FormatError("unsupported model file version " + std::to_string(version));
    }
    ModelBundle b;
    b.algorithm = j.at("algorithm").get<std::string>();
    b.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    b.trunk = j.at("trunk").get<std::vector<std::string>>();
    b.heads = j.at("heads").get<std::vector<std::string>>();
    for (const auto& [name, net] : j.at("networks").items()) {
      b.networks.emplace(name, network_from(net));
    }
    for (const auto& n : b.trunk) b.network(n);
    for (const auto& n : b.heads) b.network(n);
    return b;
  });
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bundle_to_json(bundle) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) { return bundle_from_json(read_file(path)); }

}  // namespace dtl
