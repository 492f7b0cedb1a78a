#pragma once

#include <string>

#include "mergeopf/model.hpp"
#include "mergeopf/powerflow.hpp"

namespace mergeopf {

// Interchange document, version 1. Top-level keys: version, s_base_mva,
// areas[], buses[], generators[], loads[], branches[], interconnections[].
// Units at the boundary: kV, MW, Mvar; branch impedances per-unit.
// Throws SchemaError / ReferenceError / InvariantError.
Network parse_network(const std::string& text);
std::string serialize_network(const Network& net);

// State document: per-bus v_kv / theta_rad, per-load dp_mw / dq_mvar,
// per-PV-generator q_mvar.
NetworkState parse_state(const Network& net, const std::string& text);
std::string serialize_state(const Network& net, const NetworkState& state);

Network read_network_file(const std::string& path);
NetworkState read_state_file(const Network& net, const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace mergeopf
