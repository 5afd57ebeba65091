#pragma once

#include <json.hpp>

#include "priceband/seqnet/network.hpp"

namespace priceband::seqnet {

inline constexpr int kCheckpointFormatVersion = 1;

/// `[{kind: "lstm", input_dim, hidden_dim}..., {kind: "dense", input_dim, output_dim, activation}]`
nlohmann::json layer_specs_to_json(const NetworkSpec& spec);
NetworkSpec layer_specs_from_json(const nlohmann::json& j);

/// `{layer_specs, flat_weights}`. Weights are written as shortest round-trip
/// decimals, so a reload is bit-exact.
nlohmann::json network_to_json(const Network<double>& net);
/// Throws CorruptCheckpoint on missing fields or a weight count that does not
/// match the layer specs.
Network<double> network_from_json(const nlohmann::json& j);

/// Single-network envelope `{format_version, layer_specs, flat_weights}`.
nlohmann::json to_envelope(const Network<double>& net);
Network<double> from_envelope(const nlohmann::json& j);

/// Throws VersionMismatch (with a migration hint) or CorruptCheckpoint.
void check_format_version(const nlohmann::json& j);

}  // namespace priceband::seqnet
