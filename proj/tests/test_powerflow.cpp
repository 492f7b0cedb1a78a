#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <random>

#include "mergeopf/io.hpp"
#include "mergeopf/powerflow.hpp"
#include "mergeopf/scenario.hpp"
#include "test_util.hpp"

using namespace mergeopf;
using namespace mergeopf::testutil;

namespace {

// pi-model oracle in complex arithmetic, independent of the production path
BranchFlow complex_oracle(const Branch& br, double vf, double vt, double thf, double tht) {
  using cd = std::complex<double>;
  const cd y = 1.0 / cd(br.r, br.x);
  const cd ysh(0.0, 0.5 * br.b_shunt);
  const cd tap = std::polar(br.tap, br.shift);
  const cd Vf = std::polar(vf, thf), Vt = std::polar(vt, tht);
  const cd If = (y + ysh) / (tap * std::conj(tap)) * Vf - y / std::conj(tap) * Vt;
  const cd It = (y + ysh) * Vt - y / tap * Vf;
  const cd Sf = Vf * std::conj(If), St = Vt * std::conj(It);
  return {Sf.real(), Sf.imag(), St.real(), St.imag()};
}

NetworkState random_state(const Network& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dv(-0.06, 0.06), dth(-0.3, 0.3), ds(-0.2, 0.2);
  NetworkState st = flat_start(net);
  for (int b = 0; b < net.n_buses(); ++b) {
    st.v[b] = 1.0 + dv(rng);
    st.theta[b] = dth(rng);
  }
  for (int l = 0; l < net.n_loads(); ++l) {
    st.dp[l] = ds(rng);
    st.dq[l] = ds(rng);
  }
  for (int g = 0; g < net.n_pv_gens(); ++g) st.q_gen[g] = ds(rng);
  return st;
}

}  // namespace

TEST_CASE("flat line carries nothing") {
  Network net = parse_network(kTwoBusDoc);
  net.branches[0].r = 0.0;
  net.branches[0].x = 0.1;
  net.finalize();
  NetworkState st = flat_start(net);
  st.v[0] = st.v[1] = 1.0;
  st.theta[0] = st.theta[1] = 0.2;
  const BranchFlow f = branch_flows(net, st, 0);
  CHECK(f.p_from == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(f.q_from == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(f.p_to == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(f.q_to == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("reactive line transfers sin(dtheta)/x") {
  Network net = parse_network(kTwoBusDoc);
  net.branches[0].r = 0.0;
  net.branches[0].x = 0.1;
  net.finalize();
  NetworkState st = flat_start(net);
  st.v[0] = st.v[1] = 1.0;
  st.theta[0] = 0.1;
  st.theta[1] = 0.0;
  const BranchFlow f = branch_flows(net, st, 0);
  CHECK(f.p_from == doctest::Approx(std::sin(0.1) / 0.1).epsilon(1e-12));
  CHECK(f.p_to == doctest::Approx(-f.p_from).epsilon(1e-12));
}

TEST_CASE("terminal flows match the complex-arithmetic oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Network net = parse_network(kTwoBusDoc);
    Branch& br = net.branches[0];
    br.r = 0.02 * u(rng);
    br.x = 0.02 + 0.1 * u(rng);
    br.b_shunt = 0.05 * u(rng);
    br.tap = 0.9 + 0.2 * u(rng);
    br.shift = 0.2 * (u(rng) - 0.5);
    net.finalize();
    NetworkState st = flat_start(net);
    st.v[0] = 0.95 + 0.1 * u(rng);
    st.v[1] = 0.95 + 0.1 * u(rng);
    st.theta[0] = 0.4 * (u(rng) - 0.5);
    st.theta[1] = 0.4 * (u(rng) - 0.5);
    const BranchFlow got = branch_flows(net, st, 0);
    const BranchFlow want = complex_oracle(br, st.v[0], st.v[1], st.theta[0], st.theta[1]);
    CHECK(got.p_from == doctest::Approx(want.p_from).epsilon(1e-12));
    CHECK(got.q_from == doctest::Approx(want.q_from).epsilon(1e-12));
    CHECK(got.p_to == doctest::Approx(want.p_to).epsilon(1e-12));
    CHECK(got.q_to == doctest::Approx(want.q_to).epsilon(1e-12));
    // loss identity: nonnegative series loss for r >= 0
    CHECK(got.p_from + got.p_to >= -1e-12);
  }
}

TEST_CASE("residual vanishes on the analytic two-bus state") {
  const Network net = two_bus_network();
  const TwoBusSolution s = two_bus_closed_form(1.0, 0.05, 0.3, 0.1);
  NetworkState st = flat_start(net);
  st.v[1] = s.v2;
  st.theta[1] = s.theta2;
  st.q_gen[0] = s.q_from;
  Residual res;
  residual(net, st, res);
  CHECK(res.p.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(res.q.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("zero network balances exactly") {
  const char* doc = R"({
    "version": 1, "s_base_mva": 100.0,
    "areas": [{"id": "A1", "reliability": "SN"}],
    "buses": [{"id": "B1", "area_id": "A1", "kind": "PQ", "v_min": 360, "v_max": 440, "v_base": 400}],
    "generators": [{"id": "G1", "bus_id": "B1", "p_fixed": 25.0, "q_fixed": 5.0}],
    "loads": [{"id": "D1", "bus_id": "B1", "p_target": 25.0, "q_target": 5.0}],
    "branches": [], "interconnections": []
  })";
  const Network net = parse_network(doc);
  Residual res;
  residual(net, flat_start(net), res);
  CHECK(res.p.cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.q.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("slack perturbation shifts exactly one residual entry") {
  const Network net = parse_network(kSixBusDoc);
  NetworkState st = flat_start(net);
  Residual before, after;
  residual(net, st, before);
  st.dp[1] += 0.1;
  residual(net, st, after);
  const int bus = net.idx.load_bus[1];
  for (int b = 0; b < net.n_buses(); ++b) {
    if (b == bus)
      CHECK(after.p[b] - before.p[b] == doctest::Approx(-0.1).epsilon(1e-15));
    else
      CHECK(after.p[b] == before.p[b]);
    CHECK(after.q[b] == before.q[b]);
  }
}

TEST_CASE("jacobian matches central finite differences") {
  std::mt19937_64 rng(33);
  for (const char* raw : {kTwoBusDoc, kSixBusDoc}) {
    const Network net = parse_network(raw);
    const VarOffsets off = var_offsets(net);
    PowerJacobian jac;
    build_jacobian_pattern(net, jac);
    CHECK(jac.n_rows == 2 * net.n_buses());
    CHECK(jac.n_cols == off.total);
    for (int trial = 0; trial < 10; ++trial) {
      NetworkState st = random_state(net, rng);
      jacobian(net, st, jac);
      Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(jac.n_rows, jac.n_cols);
      for (size_t e = 0; e < jac.rows.size(); ++e) dense(jac.rows[e], jac.cols[e]) += jac.vals[e];

      const double h = 1e-6;
      auto perturb = [&](int col, double delta) {
        NetworkState p = st;
        if (col < off.theta) p.v[col] += delta;
        else if (col < off.dp) p.theta[col - off.theta] += delta;
        else if (col < off.dq) p.dp[col - off.dp] += delta;
        else if (col < off.q_gen) p.dq[col - off.dq] += delta;
        else p.q_gen[col - off.q_gen] += delta;
        return p;
      };
      Residual plus, minus;
      for (int col = 0; col < jac.n_cols; ++col) {
        residual(net, perturb(col, h), plus);
        residual(net, perturb(col, -h), minus);
        for (int r = 0; r < net.n_buses(); ++r) {
          const double fd_p = (plus.p[r] - minus.p[r]) / (2.0 * h);
          const double fd_q = (plus.q[r] - minus.q[r]) / (2.0 * h);
          CHECK(rel_err(dense(r, col), fd_p) <= 1e-6);
          CHECK(rel_err(dense(net.n_buses() + r, col), fd_q) <= 1e-6);
        }
      }
      // slack columns are exactly -1 on their bus row
      for (int l = 0; l < net.n_loads(); ++l)
        CHECK(dense(net.idx.load_bus[l], off.dp + l) == -1.0);
    }
  }
}

TEST_CASE("openmp kernels agree with the serial reference") {
  ScenarioSpec spec;
  spec.seed = 9;
  spec.n_areas = 5;
  spec.buses_per_area = 20;
  spec.dacf_areas = {1};
  const Scenario sc = generate(spec);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const NetworkState st = random_state(sc.network, rng);
    Residual par, ser;
    residual(sc.network, st, par);
    residual_serial(sc.network, st, ser);
    CHECK((par.p - ser.p).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((par.q - ser.q).cwiseAbs().maxCoeff() <= 1e-13);
    PowerJacobian jp, js;
    jacobian(sc.network, st, jp);
    jacobian_serial(sc.network, st, js);
    CHECK((jp.vals - js.vals).cwiseAbs().maxCoeff() == 0.0);
    std::vector<BranchFlow> all;
    branch_flows_all(sc.network, st, all);
    for (int k = 0; k < sc.network.n_branches(); k += 7) {
      const BranchFlow one = branch_flows(sc.network, st, k);
      CHECK(all[k].p_from == one.p_from);
      CHECK(all[k].q_to == one.q_to);
    }
  }
}

TEST_CASE("newton load flow reproduces the closed form") {
  const Network net = two_bus_network();
  const TwoBusSolution want = two_bus_closed_form(1.0, 0.05, 0.3, 0.1);
  const LoadFlowResult sol = newton_load_flow(net, flat_start(net));
  CHECK(std::abs(sol.state.v[1] - want.v2) <= 1e-8);
  CHECK(std::abs(sol.state.theta[1] - want.theta2) <= 1e-8);
  CHECK(std::abs(sol.state.q_gen[0] - want.q_from) <= 1e-8);
  CHECK(sol.max_residual <= 1e-8);
}

TEST_CASE("newton load flow is a fixed point on a feasible state") {
  ScenarioSpec spec;
  spec.seed = 2;
  spec.dacf_areas = {3};
  const Scenario sc = generate(spec);
  Residual res;
  residual(sc.network, sc.ground_truth, res);
  REQUIRE(std::max(res.p.cwiseAbs().maxCoeff(), res.q.cwiseAbs().maxCoeff()) <= 1e-8);
  const LoadFlowResult sol = newton_load_flow(sc.network, sc.ground_truth);
  CHECK(sol.iterations <= 2);
  CHECK((sol.state.v - sc.ground_truth.v).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("newton load flow reports divergence on absurd loading") {
  Network net = two_bus_network();
  net.loads[0].p_target = 3000.0;  // far beyond the line's transfer limit
  net.finalize();
  CHECK_THROWS_AS(newton_load_flow(net, flat_start(net)), NonConvergence);
}

TEST_CASE("loss positivity on balanced states") {
  for (uint64_t seed : {1ull, 5ull, 9ull}) {
    ScenarioSpec spec;
    spec.seed = seed;
    const Scenario sc = generate(spec);
    double gen = 0.0, load = 0.0;
    for (int g = 0; g < static_cast<int>(sc.network.generators.size()); ++g)
      gen += sc.network.idx.p_gen_pu[g];
    for (int l = 0; l < sc.network.n_loads(); ++l)
      load += sc.network.idx.p_load_pu[l] + sc.ground_truth.dp[l];
    CHECK(gen >= load - 1e-9);
  }
}
