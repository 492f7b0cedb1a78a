#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mergeopf/indicators.hpp"
#include "mergeopf/io.hpp"
#include "mergeopf/scenario.hpp"
#include "test_util.hpp"

using namespace mergeopf;
using namespace mergeopf::testutil;

namespace {

Scenario zero_noise() {
  ScenarioSpec spec;
  spec.seed = 3;
  spec.dacf_areas = {2};
  spec.desync_load_sigma = 0.0;
  spec.dacf_error_sigma = 0.0;
  spec.target_skew = 0.0;
  return generate(spec);
}

}  // namespace

TEST_CASE("perfect state counts nothing") {
  const Scenario sc = zero_noise();
  const IndicatorReport rep = compute_indicators(sc.network, sc.ground_truth);
  CHECK(rep.total_violations() == 0);
  CHECK(rep.interco_sn_sn.population + rep.interco_sn_dacf.population ==
        sc.network.n_interconnections());
  CHECK(rep.loads_act_sn.population == rep.loads_rea_sn.population);
  CHECK(rep.max_dev_load_p_mw <= 1e-9);
}

TEST_CASE("threshold arithmetic around the two-target interval") {
  Scenario sc = zero_noise();
  Network& net = sc.network;
  const int i = 0;
  const int k = net.idx.ic_branch[i];
  REQUIRE(net.interconnections[i].from_reliability == Reliability::SN);
  REQUIRE(net.interconnections[i].to_reliability == Reliability::SN);
  const double flow_mw = branch_flows(net, sc.ground_truth, k).p_from * net.s_base_mva;

  SUBCASE("within target span plus tolerance") {
    // targets (flow-12, flow-2): the flow sits 2 MW outside, under the 5 MW bar
    net.interconnections[i].target_from_side = flow_mw - 12.0;
    net.interconnections[i].target_to_side = flow_mw - 2.0;
    net.finalize();
    const IndicatorReport rep = compute_indicators(net, sc.ground_truth);
    CHECK(rep.interco_sn_sn.violating == 0);
    CHECK(rep.max_dev_interco_sn_sn_mw == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("beyond the tolerance") {
    net.interconnections[i].target_from_side = flow_mw - 20.0;
    net.interconnections[i].target_to_side = flow_mw - 8.0;
    net.finalize();
    const IndicatorReport rep = compute_indicators(net, sc.ground_truth);
    CHECK(rep.interco_sn_sn.violating == 1);
    CHECK(rep.max_dev_interco_sn_sn_mw == doctest::Approx(8.0).epsilon(1e-9));
  }
}

TEST_CASE("SN_DACF compares the SN-side target only") {
  Scenario sc = zero_noise();
  Network& net = sc.network;
  int mixed = -1;
  for (int i = 0; i < net.n_interconnections(); ++i)
    if (net.interconnections[i].from_reliability != net.interconnections[i].to_reliability)
      mixed = i;
  REQUIRE(mixed >= 0);
  const int k = net.idx.ic_branch[mixed];
  const double flow_mw = branch_flows(net, sc.ground_truth, k).p_from * net.s_base_mva;
  Interconnection& ic = net.interconnections[mixed];
  const bool from_sn = ic.from_reliability == Reliability::SN;
  // corrupt the DACF-side target far away; only the SN side should matter
  (from_sn ? ic.target_to_side : ic.target_from_side) = flow_mw + 500.0;
  (from_sn ? ic.target_from_side : ic.target_to_side) = flow_mw + 3.0;
  net.finalize();
  const IndicatorReport rep = compute_indicators(net, sc.ground_truth);
  CHECK(rep.interco_sn_dacf.violating == 0);
  (from_sn ? ic.target_from_side : ic.target_to_side) = flow_mw + 9.0;
  net.finalize();
  const IndicatorReport rep2 = compute_indicators(net, sc.ground_truth);
  CHECK(rep2.interco_sn_dacf.violating == 1);
}

TEST_CASE("voltage and load thresholds with the secondary count") {
  Scenario sc = zero_noise();
  NetworkState st = sc.ground_truth;
  // push one SN PV bus 0.05 kV off target: counted at 0.01 kV, not at 0.1 kV
  int pv = -1;
  for (int b = 0; b < sc.network.n_buses(); ++b)
    if (sc.network.buses[b].kind == BusKind::PV &&
        sc.network.areas[sc.network.idx.bus_area[b]].reliability == Reliability::SN)
      pv = b;
  REQUIRE(pv >= 0);
  st.v[pv] += 0.05 / sc.network.buses[pv].v_base;
  // one SN load 1.5 MW over target
  int sn_load = -1;
  for (int l = 0; l < sc.network.n_loads(); ++l)
    if (sc.network.areas[sc.network.idx.bus_area[sc.network.idx.load_bus[l]]].reliability ==
        Reliability::SN)
      sn_load = l;
  REQUIRE(sn_load >= 0);
  st.dp[sn_load] = 1.5 / sc.network.s_base_mva;
  st.dq[sn_load] = 0.5 / sc.network.s_base_mva;

  const IndicatorReport rep = compute_indicators(sc.network, st);
  CHECK(rep.v_sn.violating == 0);
  CHECK(rep.v_sn_secondary.violating == 1);
  CHECK(rep.loads_act_sn.violating == 1);
  CHECK(rep.loads_rea_sn.violating == 0);
  CHECK(rep.max_dev_v_sn_kv == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("threshold monotonicity and state-independent populations") {
  ScenarioSpec spec;
  spec.seed = 12;
  spec.dacf_areas = {0};
  const Scenario sc = generate(spec);
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> noise(-0.02, 0.02);
  NetworkState st = sc.ground_truth;
  for (int l = 0; l < sc.network.n_loads(); ++l) {
    st.dp[l] += noise(rng);
    st.dq[l] += noise(rng);
  }
  for (int b = 0; b < sc.network.n_buses(); ++b) st.v[b] += noise(rng) * 0.05;

  IndicatorThresholds t1;
  const IndicatorReport r1 = compute_indicators(sc.network, st, t1);
  for (int step = 0; step < 5; ++step) {
    IndicatorThresholds t2 = t1;
    const double scale = 1.0 + 0.8 * step;
    t2.flow_mw *= scale;
    t2.v_kv *= scale;
    t2.p_mw *= scale;
    t2.q_mvar *= scale;
    const IndicatorReport r2 = compute_indicators(sc.network, st, t2);
    CHECK(r2.interco_sn_sn.violating <= r1.interco_sn_sn.violating);
    CHECK(r2.v_sn.violating <= r1.v_sn.violating);
    CHECK(r2.loads_act_sn.violating <= r1.loads_act_sn.violating);
    CHECK(r2.loads_rea_sn.violating <= r1.loads_rea_sn.violating);
  }
  // populations depend on the network alone
  const IndicatorReport r3 = compute_indicators(sc.network, sc.ground_truth, t1);
  CHECK(r3.interco_sn_sn.population == r1.interco_sn_sn.population);
  CHECK(r3.v_sn.population == r1.v_sn.population);
  CHECK(r3.v_dacf.population == r1.v_dacf.population);
  CHECK(r3.loads_act_sn.population == r1.loads_act_sn.population);
  // the secondary voltage count is at least as sensitive as the primary
  CHECK(r1.v_sn_secondary.violating >= r1.v_sn.violating);
}

TEST_CASE("area filter restricts scope") {
  const Scenario sc = zero_noise();
  std::unordered_set<std::string> only_a1{"A1"};
  const IndicatorReport rep = compute_indicators(sc.network, sc.ground_truth, {}, only_a1);
  int a1_loads = 0;
  for (int l = 0; l < sc.network.n_loads(); ++l)
    if (sc.network.idx.bus_area[sc.network.idx.load_bus[l]] == 0) ++a1_loads;
  CHECK(rep.loads_act_sn.population == a1_loads);
  CHECK(rep.interco_sn_sn.population == 0);  // every tie leaves A1
}

TEST_CASE("deviation profiles are sorted and sized") {
  const Scenario sc = zero_noise();
  const DeviationProfiles prof = deviation_profiles(sc.network, sc.ground_truth);
  CHECK(static_cast<int>(prof.interconnections.size()) == sc.network.n_interconnections());
  for (size_t i = 1; i < prof.interconnections.size(); ++i)
    CHECK(prof.interconnections[i - 1].target_from_mw <= prof.interconnections[i].target_from_mw);
  for (size_t i = 1; i < prof.loads.size(); ++i) {
    const auto dev = [](const LoadProfileRow& r) {
      return std::max(std::abs(r.dp_mw), std::abs(r.dq_mvar));
    };
    CHECK(dev(prof.loads[i - 1]) >= dev(prof.loads[i]));
  }
  for (const auto& row : prof.interconnections) CHECK(row.deviation_mw <= 1e-9);
  for (const auto& row : prof.voltages) CHECK(row.deviation_kv <= 1e-9);
}

TEST_CASE("empty network gives empty tables") {
  const char* doc = R"({
    "version": 1, "s_base_mva": 100.0,
    "areas": [{"id": "A1", "reliability": "SN"}],
    "buses": [{"id": "B1", "area_id": "A1", "kind": "PQ", "v_min": 360, "v_max": 440, "v_base": 400}],
    "generators": [], "loads": [], "branches": [], "interconnections": []
  })";
  const Network net = parse_network(doc);
  const DeviationProfiles prof = deviation_profiles(net, flat_start(net));
  CHECK(prof.interconnections.empty());
  CHECK(prof.voltages.empty());
  CHECK(prof.loads.empty());
}
