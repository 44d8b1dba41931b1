#pragma once

// Parameter files for trained networks.
//
// A network file is JSON:
//   {"format": "dtl-network", "version": 1, "name": ..., "seed": ...,
//    "layers": [{"type": "fc", "in": 32, "out": 128}, {"type": "relu"}, ...],
//    "parameters": [{"name": ..., "rows": r, "cols": c, "values": [...]}, ...],
//    "batch_norm": [{"running_mean": [...], "running_var": [...],
//                    "momentum": 0.9, "epsilon": 1e-7}, ...]}
// Doubles are written with 17 significant digits, so values round-trip
// bit-exactly. A model bundle wraps one or more named networks with the
// algorithm that produced them and how to run inference:
//   {"format": "dtl-model", "version": 1, "algorithm": "dann",
//    "metadata": {...}, "trunk": ["generator"], "heads": ["classifier1"],
//    "networks": {"generator": <network>, ...}}
// Prediction runs the trunk networks in order and averages the softmax
// outputs of the heads.

#include "dtl/nn.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dtl {

inline constexpr int kNetworkFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string network_to_json(const Network& net);
Network network_from_json(const std::string& text);

struct ModelBundle {
  std::string algorithm;
  std::map<std::string, std::string> metadata;
  std::map<std::string, Network> networks;
  std::vector<std::string> trunk;
  std::vector<std::string> heads;

  const Network& network(const std::string& name) const;
  /// Class probabilities for one-hot inputs.
  Tensor predict(const Tensor& inputs) const;
  double evaluate(const Dataset& data) const;
};

std::string bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const std::string& text);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace dtl
