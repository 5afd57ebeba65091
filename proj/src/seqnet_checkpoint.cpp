#include "priceband/seqnet/checkpoint.hpp"

namespace priceband::seqnet {

const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  throw Error(ErrorCode::CorruptCheckpoint, "unknown activation '" + name + "'");
}

nlohmann::json layer_specs_to_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 0; l < spec.num_layers; ++l) {
    layers.push_back({{"kind", "lstm"}, {"input_dim", spec.layer_input_dim(l)}, {"hidden_dim", spec.hidden_dim}});
  }
  layers.push_back({{"kind", "dense"},
                    {"input_dim", spec.head_input_dim()},
                    {"output_dim", spec.output_dim},
                    {"activation", to_string(spec.head)}});
  return layers;
}

NetworkSpec layer_specs_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_array() || j.empty()) throw Error(ErrorCode::CorruptCheckpoint, "layer_specs must be a non-empty array");
    NetworkSpec spec;
    spec.num_layers = static_cast<int>(j.size()) - 1;
    const auto& head = j.back();
    if (head.at("kind") != "dense") throw Error(ErrorCode::CorruptCheckpoint, "last layer must be dense");
    spec.output_dim = head.at("output_dim").get<int>();
    spec.head = activation_from_string(head.at("activation").get<std::string>());
    if (spec.num_layers == 0) {
      spec.input_dim = head.at("input_dim").get<int>();
      spec.hidden_dim = 0;
    } else {
      spec.input_dim = j.front().at("input_dim").get<int>();
      spec.hidden_dim = j.front().at("hidden_dim").get<int>();
      for (int l = 0; l < spec.num_layers; ++l) {
        const auto& layer = j.at(l);
        if (layer.at("kind") != "lstm" || layer.at("hidden_dim").get<int>() != spec.hidden_dim ||
            layer.at("input_dim").get<int>() != spec.layer_input_dim(l)) {
          throw Error(ErrorCode::CorruptCheckpoint, "inconsistent lstm layer " + std::to_string(l));
        }
      }
      if (head.at("input_dim").get<int>() != spec.hidden_dim) {
        throw Error(ErrorCode::CorruptCheckpoint, "dense head width does not match hidden_dim");
      }
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("layer_specs: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    throw Error(ErrorCode::CorruptCheckpoint, e.what());
  }
}

nlohmann::json network_to_json(const Network<double>& net) {
  const auto& p = net.flat();
  return {{"layer_specs", layer_specs_to_json(net.spec())},
          {"flat_weights", std::vector<double>(p.data(), p.data() + p.size())}};
}

Network<double> network_from_json(const nlohmann::json& j) {
  try {
    const NetworkSpec spec = layer_specs_from_json(j.at("layer_specs"));
    const auto weights = j.at("flat_weights").get<std::vector<double>>();
    Network<double> net(spec);
    if (static_cast<Eigen::Index>(weights.size()) != net.size()) {
      throw Error(ErrorCode::CorruptCheckpoint, "expected " + std::to_string(net.size()) + " weights, found " +
                                                    std::to_string(weights.size()));
    }
    net.set_flat(Eigen::Map<const Eigen::VectorXd>(weights.data(), net.size()));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, e.what());
  }
}

void check_format_version(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw Error(ErrorCode::CorruptCheckpoint, "missing integer format_version");
  }
  const int v = j["format_version"].get<int>();
  if (v < kCheckpointFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "checkpoint format_version " + std::to_string(v) + " is older than " +
                    std::to_string(kCheckpointFormatVersion) +
                    "; retrain or re-export the model with this release to migrate it");
  }
  if (v > kCheckpointFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint format_version " + std::to_string(v) +
                                                " is newer than this build supports (" +
                                                std::to_string(kCheckpointFormatVersion) + "); upgrade priceband");
  }
}

nlohmann::json to_envelope(const Network<double>& net) {
  auto j = network_to_json(net);
  j["format_version"] = kCheckpointFormatVersion;
  return j;
}

Network<double> from_envelope(const nlohmann::json& j) {
  check_format_version(j);
  return network_from_json(j);
}

}  // namespace priceband::seqnet
