#pragma once

// Shared fixtures and oracle helpers for the test suites.

#include <cmath>
#include <random>
#include <string>

#include "mergeopf/io.hpp"
#include "mergeopf/model.hpp"
#include "mergeopf/powerflow.hpp"

namespace mergeopf::testutil {

// Smallest valid instance: one PV bus with a generator, one PQ bus with a
// load, one branch.
inline const char* kTwoBusDoc = R"({
  "version": 1,
  "s_base_mva": 100.0,
  "areas": [{"id": "A1", "reliability": "SN", "snapshot_age": 5.0}],
  "buses": [
    {"id": "B1", "area_id": "A1", "kind": "PV", "v_target": 400.0,
     "v_min": 360.0, "v_max": 440.0, "v_base": 400.0},
    {"id": "B2", "area_id": "A1", "kind": "PQ",
     "v_min": 360.0, "v_max": 440.0, "v_base": 400.0}
  ],
  "generators": [{"id": "G1", "bus_id": "B1", "p_fixed": 30.0, "q_min": -100.0, "q_max": 100.0}],
  "loads": [{"id": "D1", "bus_id": "B2", "p_target": 30.0, "q_target": 10.0}],
  "branches": [{"id": "L1", "from_bus": "B1", "to_bus": "B2",
                "r": 0.0, "x": 0.05, "b_shunt": 0.0, "tap": 1.0, "shift": 0.0,
                "is_interconnection": false}],
  "interconnections": []
})";

// Three areas {SN, SN, DACF}, six buses, two tie-lines.
inline const char* kSixBusDoc = R"({
  "version": 1,
  "s_base_mva": 100.0,
  "areas": [
    {"id": "A1", "reliability": "SN"},
    {"id": "A2", "reliability": "SN"},
    {"id": "A3", "reliability": "DACF"}
  ],
  "buses": [
    {"id": "B1", "area_id": "A1", "kind": "PV", "v_target": 404.0, "v_min": 360.0, "v_max": 440.0, "v_base": 400.0},
    {"id": "B2", "area_id": "A1", "kind": "PQ", "v_min": 360.0, "v_max": 440.0, "v_base": 400.0},
    {"id": "B3", "area_id": "A2", "kind": "PV", "v_target": 402.0, "v_min": 360.0, "v_max": 440.0, "v_base": 400.0},
    {"id": "B4", "area_id": "A2", "kind": "PQ", "v_min": 360.0, "v_max": 440.0, "v_base": 400.0},
    {"id": "B5", "area_id": "A3", "kind": "PV", "v_target": 400.0, "v_min": 360.0, "v_max": 440.0, "v_base": 400.0},
    {"id": "B6", "area_id": "A3", "kind": "PQ", "v_min": 360.0, "v_max": 440.0, "v_base": 400.0}
  ],
  "generators": [
    {"id": "G1", "bus_id": "B1", "p_fixed": 55.0, "q_min": -80.0, "q_max": 80.0},
    {"id": "G2", "bus_id": "B3", "p_fixed": 45.0, "q_min": -80.0, "q_max": 80.0},
    {"id": "G3", "bus_id": "B5", "p_fixed": 32.0, "q_min": -80.0, "q_max": 80.0}
  ],
  "loads": [
    {"id": "D1", "bus_id": "B2", "p_target": 40.0, "q_target": 12.0},
    {"id": "D2", "bus_id": "B4", "p_target": 50.0, "q_target": 15.0},
    {"id": "D3", "bus_id": "B6", "p_target": 40.0, "q_target": 10.0}
  ],
  "branches": [
    {"id": "L1", "from_bus": "B1", "to_bus": "B2", "r": 0.004, "x": 0.04, "b_shunt": 0.01},
    {"id": "L2", "from_bus": "B3", "to_bus": "B4", "r": 0.004, "x": 0.04, "b_shunt": 0.01},
    {"id": "L3", "from_bus": "B5", "to_bus": "B6", "r": 0.004, "x": 0.04, "b_shunt": 0.01},
    {"id": "T1", "from_bus": "B2", "to_bus": "B3", "r": 0.005, "x": 0.05, "b_shunt": 0.02,
     "is_interconnection": true},
    {"id": "T2", "from_bus": "B4", "to_bus": "B5", "r": 0.005, "x": 0.05, "b_shunt": 0.02,
     "is_interconnection": true}
  ],
  "interconnections": [
    {"branch_id": "T1", "target_from_side": 10.0, "target_to_side": 12.0,
     "from_reliability": "SN", "to_reliability": "SN"},
    {"branch_id": "T2", "target_from_side": -6.0, "target_to_side": -8.0,
     "from_reliability": "SN", "to_reliability": "DACF"}
  ]
})";

// Closed-form solution of the lossless two-bus case: PV bus at v1 (pu) feeds
// a PQ load (p_l, q_l in pu) over a pure reactance x. Derived from the pair
//   (v1 * b2) / x = -p_l,   (v2^2 - v1 * a) / x = -q_l
// with a = v2 cos(th2), b2 = v2 sin(th2).
struct TwoBusSolution {
  double v2, theta2;   // pu, rad
  double p_from, q_from;  // pu at the PV side
};

inline TwoBusSolution two_bus_closed_form(double v1, double x, double p_l, double q_l) {
  const double b2 = -p_l * x / v1;
  const double disc = v1 * v1 - 4.0 * (q_l * x + b2 * b2);
  const double a = 0.5 * (v1 + std::sqrt(disc));
  TwoBusSolution s;
  s.v2 = std::sqrt(a * a + b2 * b2);
  s.theta2 = std::atan2(b2, a);
  s.p_from = p_l;  // lossless
  s.q_from = (v1 * v1 - v1 * a) / x;
  return s;
}

// Balanced two-bus network whose exact state is the closed form above.
inline Network two_bus_network(double p_l_mw = 30.0, double q_l_mvar = 10.0, double x = 0.05) {
  Network net = parse_network(kTwoBusDoc);
  net.loads[0].p_target = p_l_mw;
  net.loads[0].q_target = q_l_mvar;
  net.branches[0].x = x;
  const TwoBusSolution s =
      two_bus_closed_form(1.0, x, p_l_mw / net.s_base_mva, q_l_mvar / net.s_base_mva);
  net.generators[0].p_fixed = s.p_from * net.s_base_mva;
  net.finalize();
  return net;
}

// Two areas, three buses, one interconnection; the PV bus voltage is pinned
// (v_min = v_max) so the load-flow manifold equals the stage problem's
// feasible set. Used by the brute-force and plateau oracles.
inline Network three_bus_network(double target_from_mw, double target_to_mw) {
  Network net;
  net.s_base_mva = 100.0;
  net.areas = {{"AA", Reliability::SN, 3.0}, {"AB", Reliability::SN, 4.0}};
  Bus b1;
  b1.id = "B1";
  b1.area_id = "AA";
  b1.kind = BusKind::PV;
  b1.v_target = 400.0;
  b1.v_min = 400.0;
  b1.v_max = 400.0;
  b1.v_base = 400.0;
  Bus b2;
  b2.id = "B2";
  b2.area_id = "AA";
  b2.kind = BusKind::PQ;
  b2.v_min = 340.0;
  b2.v_max = 460.0;
  b2.v_base = 400.0;
  Bus b3 = b2;
  b3.id = "B3";
  b3.area_id = "AB";
  net.buses = {b1, b2, b3};
  Generator g;
  g.id = "G1";
  g.bus_id = "B1";
  g.p_fixed = 51.0;
  g.q_min = -200.0;
  g.q_max = 200.0;
  net.generators = {g};
  net.loads = {{"D1", "B2", 30.0, 10.0}, {"D2", "B3", 20.0, 5.0}};
  Branch l1;
  l1.id = "L1";
  l1.from_bus = "B1";
  l1.to_bus = "B2";
  l1.r = 0.004;
  l1.x = 0.04;
  Branch t1;
  t1.id = "T1";
  t1.from_bus = "B2";
  t1.to_bus = "B3";
  t1.r = 0.005;
  t1.x = 0.05;
  t1.is_interconnection = true;
  net.branches = {l1, t1};
  Interconnection ic;
  ic.branch_id = "T1";
  ic.target_from_side = target_from_mw;
  ic.target_to_side = target_to_mw;
  net.interconnections = {ic};
  net.finalize();
  return net;
}

// Brute-force oracle shared by the unit and acceptance suites: sweep the two
// active slacks on a grid, solve the reduced load flow at each point, keep
// the points whose full residual (reference row included) closes to
// grid-scale accuracy, and track the best double-Huber value among them.
struct GridSearchResult {
  double best_obj = 1e300;
  double best_flow = 0.0;
  long feasible_points = 0;
};

template <typename ObjFn>
GridSearchResult slack_grid_search(const Network& net, double step, double feas_tol,
                                   ObjFn&& objective_of_state) {
  const double h1 =
      std::max(0.5 * std::abs(net.idx.p_load_pu[0]), 0.05);
  const double h2 =
      std::max(0.5 * std::abs(net.idx.p_load_pu[1]), 0.05);
  GridSearchResult out;
  NetworkState base = flat_start(net);
  LoadFlowOptions lf;
  lf.tol = 1e-10;
  const long n1 = std::lround(2.0 * h1 / step);
  const long n2 = std::lround(2.0 * h2 / step);
  for (long i = 0; i <= n1; ++i) {
    for (long j = 0; j <= n2; ++j) {
      NetworkState probe = base;
      probe.dp[0] = -h1 + step * static_cast<double>(i);
      probe.dp[1] = -h2 + step * static_cast<double>(j);
      try {
        Eigen::VectorXd mismatch;
        LoadFlowResult sol = newton_load_flow_slack(net, probe, mismatch, lf);
        if (mismatch.cwiseAbs().maxCoeff() > feas_tol) continue;
        ++out.feasible_points;
        const double flow = branch_flows(net, sol.state, net.idx.ic_branch[0]).p_from;
        const double obj = objective_of_state(sol.state, flow);
        if (obj < out.best_obj) {
          out.best_obj = obj;
          out.best_flow = flow;
        }
      } catch (const Error&) {
        // grid corner without a load-flow solution
      }
    }
  }
  return out;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace mergeopf::testutil
