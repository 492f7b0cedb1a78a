#include "mergeopf/indicators.hpp"

#include <algorithm>
#include <cmath>

namespace mergeopf {

namespace {

// Distance of x outside [lo, hi]; zero inside.
inline double interval_distance(double x, double lo, double hi) {
  if (x < lo) return lo - x;
  if (x > hi) return x - hi;
  return 0.0;
}

}  // namespace

IndicatorReport compute_indicators(const Network& net, const NetworkState& state,
                                   const IndicatorThresholds& th,
                                   const std::optional<std::unordered_set<std::string>>& filter) {
  IndicatorReport rep;
  rep.thresholds = th;
  const auto& idx = net.idx;

  auto area_included = [&](int area_idx) {
    return !filter || filter->count(net.areas[area_idx].id) > 0;
  };

  for (int i = 0; i < net.n_interconnections(); ++i) {
    const int k = idx.ic_branch[i];
    const int fa = idx.bus_area[idx.br_from[k]];
    const int ta = idx.bus_area[idx.br_to[k]];
    if (!area_included(fa) || !area_included(ta)) continue;
    const Interconnection& ic = net.interconnections[i];
    const double flow_mw = branch_flows(net, state, k).p_from * net.s_base_mva;
    const bool from_sn = ic.from_reliability == Reliability::SN;
    const bool to_sn = ic.to_reliability == Reliability::SN;
    if (from_sn && to_sn) {
      rep.interco_sn_sn.population++;
      const double lo = std::min(ic.target_from_side, ic.target_to_side);
      const double hi = std::max(ic.target_from_side, ic.target_to_side);
      const double dev = interval_distance(flow_mw, lo, hi);
      rep.max_dev_interco_sn_sn_mw = std::max(rep.max_dev_interco_sn_sn_mw, dev);
      if (dev > th.flow_mw) rep.interco_sn_sn.violating++;
    } else if (from_sn != to_sn) {
      rep.interco_sn_dacf.population++;
      const double sn_target = from_sn ? ic.target_from_side : ic.target_to_side;
      const double dev = std::abs(flow_mw - sn_target);
      rep.max_dev_interco_sn_dacf_mw = std::max(rep.max_dev_interco_sn_dacf_mw, dev);
      if (dev > th.flow_mw) rep.interco_sn_dacf.violating++;
    }
    // DACF_DACF interconnections carry no reliable target and are not counted.
  }

  for (int b = 0; b < net.n_buses(); ++b) {
    if (net.buses[b].kind != BusKind::PV) continue;
    const int a = idx.bus_area[b];
    if (!area_included(a)) continue;
    const double dev_kv = std::abs(state.v[b] * net.buses[b].v_base - net.buses[b].v_target);
    const bool sn = net.areas[a].reliability == Reliability::SN;
    CountPair& primary = sn ? rep.v_sn : rep.v_dacf;
    CountPair& secondary = sn ? rep.v_sn_secondary : rep.v_dacf_secondary;
    double& max_dev = sn ? rep.max_dev_v_sn_kv : rep.max_dev_v_dacf_kv;
    primary.population++;
    secondary.population++;
    max_dev = std::max(max_dev, dev_kv);
    if (dev_kv > th.v_kv) primary.violating++;
    if (dev_kv > th.v_secondary_kv) secondary.violating++;
  }

  for (int l = 0; l < net.n_loads(); ++l) {
    const int a = idx.bus_area[idx.load_bus[l]];
    if (!area_included(a)) continue;
    if (net.areas[a].reliability != Reliability::SN) continue;
    const double dp_mw = std::abs(state.dp[l]) * net.s_base_mva;
    const double dq_mvar = std::abs(state.dq[l]) * net.s_base_mva;
    rep.loads_act_sn.population++;
    rep.loads_rea_sn.population++;
    rep.max_dev_load_p_mw = std::max(rep.max_dev_load_p_mw, dp_mw);
    rep.max_dev_load_q_mvar = std::max(rep.max_dev_load_q_mvar, dq_mvar);
    if (dp_mw > th.p_mw) rep.loads_act_sn.violating++;
    if (dq_mvar > th.q_mvar) rep.loads_rea_sn.violating++;
  }

  return rep;
}

DeviationProfiles deviation_profiles(const Network& net, const NetworkState& state) {
  DeviationProfiles out;
  const auto& idx = net.idx;

  for (int i = 0; i < net.n_interconnections(); ++i) {
    const Interconnection& ic = net.interconnections[i];
    const int k = idx.ic_branch[i];
    InterconnectionProfileRow row;
    row.branch_id = ic.branch_id;
    row.flow_mw = branch_flows(net, state, k).p_from * net.s_base_mva;
    row.target_from_mw = ic.target_from_side;
    row.target_to_mw = ic.target_to_side;
    row.deviation_mw = interval_distance(row.flow_mw,
                                         std::min(ic.target_from_side, ic.target_to_side),
                                         std::max(ic.target_from_side, ic.target_to_side));
    const bool from_sn = ic.from_reliability == Reliability::SN;
    const bool to_sn = ic.to_reliability == Reliability::SN;
    row.category = from_sn && to_sn ? "SN_SN" : (from_sn != to_sn ? "SN_DACF" : "DACF_DACF");
    out.interconnections.push_back(std::move(row));
  }
  std::sort(out.interconnections.begin(), out.interconnections.end(),
            [](const auto& a, const auto& b) {
              if (a.target_from_mw != b.target_from_mw) return a.target_from_mw < b.target_from_mw;
              return a.branch_id < b.branch_id;
            });

  for (int b = 0; b < net.n_buses(); ++b) {
    if (net.buses[b].kind != BusKind::PV) continue;
    VoltageProfileRow row;
    row.bus_id = net.buses[b].id;
    row.v_kv = state.v[b] * net.buses[b].v_base;
    row.v_target_kv = net.buses[b].v_target;
    row.deviation_kv = std::abs(row.v_kv - row.v_target_kv);
    row.reliability = to_string(net.areas[idx.bus_area[b]].reliability);
    out.voltages.push_back(std::move(row));
  }
  std::sort(out.voltages.begin(), out.voltages.end(), [](const auto& a, const auto& b) {
    if (a.v_target_kv != b.v_target_kv) return a.v_target_kv < b.v_target_kv;
    return a.bus_id < b.bus_id;
  });

  for (int l = 0; l < net.n_loads(); ++l) {
    LoadProfileRow row;
    row.load_id = net.loads[l].id;
    row.dp_mw = state.dp[l] * net.s_base_mva;
    row.dq_mvar = state.dq[l] * net.s_base_mva;
    row.reliability = to_string(net.areas[idx.bus_area[idx.load_bus[l]]].reliability);
    out.loads.push_back(std::move(row));
  }
  std::sort(out.loads.begin(), out.loads.end(), [](const auto& a, const auto& b) {
    const double da = std::max(std::abs(a.dp_mw), std::abs(a.dq_mvar));
    const double db = std::max(std::abs(b.dp_mw), std::abs(b.dq_mvar));
    if (da != db) return da > db;
    return a.load_id < b.load_id;
  });

  return out;
}

}  // namespace mergeopf
