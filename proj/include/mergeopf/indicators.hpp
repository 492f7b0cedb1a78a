#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "mergeopf/model.hpp"
#include "mergeopf/powerflow.hpp"

namespace mergeopf {

// Significance thresholds below which a deviation is not counted.
struct IndicatorThresholds {
  double flow_mw = 5.0;
  double v_kv = 0.1;
  double p_mw = 1.0;
  double q_mvar = 1.0;
  double v_secondary_kv = 0.01;  // extra voltage count reported for comparability
};

struct CountPair {
  int violating = 0;
  int population = 0;
};

struct IndicatorReport {
  CountPair interco_sn_sn;    // flow outside the two-target interval
  CountPair interco_sn_dacf;  // flow away from the SN-side target
  CountPair v_sn, v_dacf;     // PV buses off their voltage target
  CountPair loads_act_sn, loads_rea_sn;
  CountPair v_sn_secondary, v_dacf_secondary;

  // largest deviation per category, physical units
  double max_dev_interco_sn_sn_mw = 0.0;
  double max_dev_interco_sn_dacf_mw = 0.0;
  double max_dev_v_sn_kv = 0.0;
  double max_dev_v_dacf_kv = 0.0;
  double max_dev_load_p_mw = 0.0;
  double max_dev_load_q_mvar = 0.0;

  IndicatorThresholds thresholds;

  int total_violations() const {
    return interco_sn_sn.violating + interco_sn_dacf.violating + v_sn.violating +
           v_dacf.violating + loads_act_sn.violating + loads_rea_sn.violating;
  }
};

// Pure function of (net, state, thresholds). With an area filter, buses and
// loads count only in listed areas and interconnections only when both
// endpoint areas are listed.
IndicatorReport compute_indicators(
    const Network& net, const NetworkState& state, const IndicatorThresholds& thresholds = {},
    const std::optional<std::unordered_set<std::string>>& area_filter = std::nullopt);

struct InterconnectionProfileRow {
  std::string branch_id;
  double flow_mw = 0.0;
  double target_from_mw = 0.0, target_to_mw = 0.0;
  double deviation_mw = 0.0;  // distance outside the two-target interval
  std::string category;       // SN_SN / SN_DACF / DACF_DACF
};

struct VoltageProfileRow {
  std::string bus_id;
  double v_kv = 0.0, v_target_kv = 0.0, deviation_kv = 0.0;
  std::string reliability;
};

struct LoadProfileRow {
  std::string load_id;
  double dp_mw = 0.0, dq_mvar = 0.0;
  std::string reliability;
};

// Tabular deviation records for external plotting: interconnections ordered
// by target value, loads by deviation magnitude descending.
struct DeviationProfiles {
  std::vector<InterconnectionProfileRow> interconnections;
  std::vector<VoltageProfileRow> voltages;  // PV buses
  std::vector<LoadProfileRow> loads;
};

DeviationProfiles deviation_profiles(const Network& net, const NetworkState& state);

}  // namespace mergeopf
