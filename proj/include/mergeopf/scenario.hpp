#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mergeopf/model.hpp"
#include "mergeopf/powerflow.hpp"

namespace mergeopf {

// Synthetic multi-area scenario: a ring of meshed areas with tie-lines,
// solved to an exact ground truth, then desynchronized per-area.
struct ScenarioSpec {
  int n_areas = 4;
  int buses_per_area = 15;
  std::vector<int> dacf_areas;  // 0-based positions of the DACF areas
  uint64_t seed = 1;
  double desync_load_sigma = 0.01;  // relative, SN load targets
  double dacf_error_sigma = 0.05;   // relative, DACF load/voltage corruption
  double target_skew = 4.0;         // MW scale of inter-target inconsistency
  bool alter_topology_on_degrade = false;
};

struct Scenario {
  Network network;
  // Residual-free state realizing the pre-noise data; its slacks are the
  // true-minus-target gaps once noise is applied.
  NetworkState ground_truth;
};

// Deterministic in spec.seed. Throws GenerationFailure when the constructed
// case has no load-flow solution.
Scenario generate(const ScenarioSpec& spec);

// Returns a copy of net where the named SN area is downgraded to DACF and
// its targets are re-corrupted at the DACF noise level. Throws UnknownArea.
Network degrade_area(const Network& net, const NetworkState& truth, const std::string& area_id,
                     const ScenarioSpec& spec);

}  // namespace mergeopf
