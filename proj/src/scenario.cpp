#include "mergeopf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mergeopf {

namespace {

// splitmix64: deterministic across platforms, unlike <random> distributions
struct Rng {
  uint64_t s;
  explicit Rng(uint64_t seed) : s(seed) {}
  uint64_t next() {
    s += 0x9E3779B97F4A7C15ULL;
    uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int below(int n) { return static_cast<int>(next() % static_cast<uint64_t>(n)); }
  // Box-Muller, redrawn beyond +-4 sigma
  double normal(double sigma) {
    if (sigma == 0.0) return 0.0;
    for (;;) {
      const double u1 = uniform();
      if (u1 <= 1e-300) continue;
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * uniform());
      if (std::abs(z) <= 4.0) return sigma * z;
    }
  }
  double half_normal(double sigma) { return std::abs(normal(sigma)); }
};

std::string area_name(int a) { return "A" + std::to_string(a + 1); }

std::string two_digits(int n) {
  return n < 10 ? "0" + std::to_string(n) : std::to_string(n);
}

// Additive voltage corruption is scaled down from the relative load sigma:
// forecast voltages are far tighter than forecast loads.
double voltage_sigma_kv(double dacf_error_sigma, double v_base) {
  return dacf_error_sigma * v_base / 100.0;
}

constexpr double kVBase = 400.0;  // kV

}  // namespace

Scenario generate(const ScenarioSpec& spec) {
  if (spec.n_areas < 1 || spec.buses_per_area < 2)
    throw GenerationFailure("scenario spec needs at least 1 area with 2 buses");
  if (spec.desync_load_sigma < 0.0 || spec.dacf_error_sigma < 0.0 || spec.target_skew < 0.0)
    throw GenerationFailure("scenario sigmas must be nonnegative");
  for (int a : spec.dacf_areas)
    if (a < 0 || a >= spec.n_areas) throw GenerationFailure("dacf_areas position out of range");

  Rng rng(spec.seed);
  Network net;
  net.s_base_mva = 100.0;

  const int na = spec.n_areas;
  const int nb = spec.buses_per_area;
  std::vector<std::vector<double>> area_load_mw(na);
  std::vector<int> gen_area;  // area position per generator, in creation order

  for (int a = 0; a < na; ++a) {
    Area area;
    area.id = area_name(a);
    const bool dacf = std::find(spec.dacf_areas.begin(), spec.dacf_areas.end(), a) !=
                      spec.dacf_areas.end();
    area.reliability = dacf ? Reliability::DACF : Reliability::SN;
    area.snapshot_age = dacf ? rng.uniform(720.0, 1440.0) : rng.uniform(0.0, 25.0);
    net.areas.push_back(std::move(area));

    int n_loads_in_area = 0;
    for (int j = 0; j < nb; ++j) {
      Bus bus;
      bus.id = area_name(a) + "B" + two_digits(j + 1);
      bus.area_id = area_name(a);
      bus.kind = j % 5 == 0 ? BusKind::PV : BusKind::PQ;
      bus.v_base = kVBase;
      bus.v_min = 0.90 * kVBase;
      bus.v_max = 1.10 * kVBase;
      if (bus.kind == BusKind::PV) bus.v_target = rng.uniform(1.00, 1.04) * kVBase;
      net.buses.push_back(bus);

      if (bus.kind == BusKind::PV) {
        Generator gen;
        gen.id = area_name(a) + "G" + two_digits(j + 1);
        gen.bus_id = bus.id;
        gen.p_fixed = 0.0;  // sized after loads are known
        net.generators.push_back(std::move(gen));
        gen_area.push_back(a);
      } else if (rng.uniform() < 0.8 || n_loads_in_area == 0) {
        Load load;
        load.id = area_name(a) + "D" + two_digits(j + 1);
        load.bus_id = bus.id;
        load.p_target = rng.uniform(15.0, 60.0);
        load.q_target = load.p_target * rng.uniform(0.15, 0.45);
        area_load_mw[a].push_back(load.p_target);
        net.loads.push_back(std::move(load));
        ++n_loads_in_area;
      }
    }

    // internal topology: a chain with chords every third bus
    int line_count = 0;
    for (int j = 0; j + 1 < nb; ++j) {
      Branch br;
      br.id = area_name(a) + "L" + two_digits(++line_count);
      br.from_bus = area_name(a) + "B" + two_digits(j + 1);
      br.to_bus = area_name(a) + "B" + two_digits(j + 2);
      br.x = rng.uniform(0.02, 0.06);
      br.r = 0.1 * br.x;
      br.b_shunt = rng.uniform(0.005, 0.02);
      net.branches.push_back(std::move(br));
    }
    int chord_count = 0;
    for (int j = 0; j + 2 < nb; j += 3) {
      Branch br;
      br.id = area_name(a) + "C" + two_digits(++chord_count);
      br.from_bus = area_name(a) + "B" + two_digits(j + 1);
      br.to_bus = area_name(a) + "B" + two_digits(j + 3);
      br.x = rng.uniform(0.02, 0.06);
      br.r = 0.1 * br.x;
      br.b_shunt = rng.uniform(0.005, 0.02);
      net.branches.push_back(std::move(br));
    }
  }

  // ring of areas, 1-3 tie-lines per adjacent pair
  int tie_count = 0;
  for (int a = 0; a < na && na > 1; ++a) {
    const int b = (a + 1) % na;
    if (na == 2 && a == 1) break;  // single pair
    const double u = rng.uniform();
    const int n_ties = 1 + (u < 0.45 ? 1 : 0) + (u < 0.12 ? 1 : 0);
    for (int t = 0; t < n_ties; ++t) {
      Branch br;
      br.id = "T" + two_digits(++tie_count);
      br.from_bus = area_name(a) + "B" + two_digits(rng.below(nb) + 1);
      br.to_bus = area_name(b) + "B" + two_digits(rng.below(nb) + 1);
      br.x = rng.uniform(0.03, 0.08);
      br.r = 0.1 * br.x;
      br.b_shunt = rng.uniform(0.01, 0.03);
      br.is_interconnection = true;
      net.branches.push_back(br);

      Interconnection ic;
      ic.branch_id = br.id;
      ic.target_from_side = 0.0;  // filled from the solved truth below
      ic.target_to_side = 0.0;
      ic.from_reliability = net.areas[a].reliability;
      ic.to_reliability = net.areas[b].reliability;
      net.interconnections.push_back(std::move(ic));
    }
  }

  // size generation: per-area imbalance drives tie flows, global margin
  // covers losses; the reference generator is trued up after the load flow
  {
    std::vector<double> area_gen_target(na);
    double total_load = 0.0, total_gen = 0.0;
    for (int a = 0; a < na; ++a) {
      const double area_load =
          std::accumulate(area_load_mw[a].begin(), area_load_mw[a].end(), 0.0);
      area_gen_target[a] = area_load * (1.0 + rng.uniform(-0.15, 0.20));
      total_load += area_load;
      total_gen += area_gen_target[a];
    }
    const double scale = total_gen > 0.0 ? total_load * 1.015 / total_gen : 1.0;
    std::vector<int> gens_in_area(na, 0);
    for (int a : gen_area) gens_in_area[a]++;
    for (size_t g = 0; g < net.generators.size(); ++g) {
      const int a = gen_area[g];
      Generator& gen = net.generators[g];
      gen.p_fixed = area_gen_target[a] * scale / gens_in_area[a];
      gen.q_min = -(0.6 * gen.p_fixed + 20.0);
      gen.q_max = 0.8 * gen.p_fixed + 30.0;
    }
  }

  net.finalize();

  // exact ground truth: solve, then absorb the residual imbalance into the
  // reference generators so every balance row closes
  Scenario out;
  try {
    Eigen::VectorXd ref_mismatch;
    LoadFlowOptions lf;
    lf.tol = 1e-10;
    LoadFlowResult sol = newton_load_flow_slack(net, flat_start(net), ref_mismatch, lf);
    for (int c = 0; c < net.idx.n_components; ++c) {
      const int ref = net.idx.ref_bus[c];
      const int g = net.idx.bus_gen[net.idx.bus_gen_start[ref]];
      net.generators[g].p_fixed -= ref_mismatch[c] * net.s_base_mva;
    }
    out.ground_truth = std::move(sol.state);
  } catch (const Error& e) {
    throw GenerationFailure(std::string("scenario load flow failed: ") + e.what());
  }

  // desynchronize targets around the truth
  for (int l = 0; l < net.n_loads(); ++l) {
    const int a = net.idx.bus_area[net.idx.load_bus[l]];
    const double sigma = net.areas[a].reliability == Reliability::SN ? spec.desync_load_sigma
                                                                     : spec.dacf_error_sigma;
    Load& load = net.loads[l];
    const double p_true = load.p_target, q_true = load.q_target;
    load.p_target = p_true * (1.0 + rng.normal(sigma));
    load.q_target = q_true * (1.0 + rng.normal(sigma));
    out.ground_truth.dp[l] = (p_true - load.p_target) / net.s_base_mva;
    out.ground_truth.dq[l] = (q_true - load.q_target) / net.s_base_mva;
  }
  for (int b = 0; b < net.n_buses(); ++b) {
    if (net.buses[b].kind != BusKind::PV) continue;
    if (net.areas[net.idx.bus_area[b]].reliability != Reliability::DACF) continue;
    Bus& bus = net.buses[b];
    const double noisy =
        bus.v_target + rng.normal(voltage_sigma_kv(spec.dacf_error_sigma, bus.v_base));
    bus.v_target = std::clamp(noisy, bus.v_min, bus.v_max);
  }
  for (int i = 0; i < net.n_interconnections(); ++i) {
    Interconnection& ic = net.interconnections[i];
    const int k = net.idx.ic_branch[i];
    const double true_flow = branch_flows(net, out.ground_truth, k).p_from * net.s_base_mva;
    const double skew_from =
        spec.target_skew * (ic.from_reliability == Reliability::DACF ? 2.5 : 1.0);
    const double skew_to = spec.target_skew * (ic.to_reliability == Reliability::DACF ? 2.5 : 1.0);
    ic.target_from_side = true_flow + rng.half_normal(skew_from);
    ic.target_to_side = true_flow - rng.half_normal(skew_to);
  }

  net.finalize();  // refresh per-unit caches after the edits
  out.network = std::move(net);
  return out;
}

Network degrade_area(const Network& net, const NetworkState& truth, const std::string& area_id,
                     const ScenarioSpec& spec) {
  auto it = net.idx.area.find(area_id);
  if (it == net.idx.area.end()) throw UnknownArea(area_id, "unknown area '" + area_id + "'");
  const int a = it->second;
  if (net.areas[a].reliability != Reliability::SN)
    throw InvariantError(area_id, "area '" + area_id + "' is not SN");

  Rng rng(spec.seed ^ (0xD1B54A32D192ED03ULL * static_cast<uint64_t>(a + 1)));
  Network out = net;
  out.areas[a].reliability = Reliability::DACF;
  out.areas[a].snapshot_age = 1440.0;

  // DACF-grade corruption around the true values
  for (int l = 0; l < net.n_loads(); ++l) {
    if (net.idx.bus_area[net.idx.load_bus[l]] != a) continue;
    Load& load = out.loads[l];
    const double p_true = net.loads[l].p_target + truth.dp[l] * net.s_base_mva;
    const double q_true = net.loads[l].q_target + truth.dq[l] * net.s_base_mva;
    load.p_target = p_true * (1.0 + rng.normal(spec.dacf_error_sigma));
    load.q_target = q_true * (1.0 + rng.normal(spec.dacf_error_sigma));
  }
  for (int b = 0; b < net.n_buses(); ++b) {
    if (net.idx.bus_area[b] != a || net.buses[b].kind != BusKind::PV) continue;
    Bus& bus = out.buses[b];
    const double v_true = truth.v[b] * bus.v_base;
    const double noisy =
        v_true + rng.normal(voltage_sigma_kv(spec.dacf_error_sigma, bus.v_base));
    bus.v_target = std::clamp(noisy, bus.v_min, bus.v_max);
  }
  for (int i = 0; i < net.n_interconnections(); ++i) {
    const int k = net.idx.ic_branch[i];
    const bool from_here = net.idx.bus_area[net.idx.br_from[k]] == a;
    const bool to_here = net.idx.bus_area[net.idx.br_to[k]] == a;
    if (!from_here && !to_here) continue;
    Interconnection& ic = out.interconnections[i];
    const double true_flow = branch_flows(net, truth, k).p_from * net.s_base_mva;
    if (from_here) {
      ic.from_reliability = Reliability::DACF;
      ic.target_from_side = true_flow + rng.half_normal(2.5 * spec.target_skew);
    }
    if (to_here) {
      ic.to_reliability = Reliability::DACF;
      ic.target_to_side = true_flow - rng.half_normal(2.5 * spec.target_skew);
    }
  }

  if (spec.alter_topology_on_degrade) {
    // drop the area's last chord; the chain keeps the area connected
    for (int k = net.n_branches() - 1; k >= 0; --k) {
      const Branch& br = net.branches[k];
      if (br.is_interconnection) continue;
      if (net.idx.bus_area[net.idx.br_from[k]] != a) continue;
      if (br.id.find('C') == std::string::npos) continue;
      out.branches.erase(out.branches.begin() + k);
      break;
    }
  }

  out.finalize();
  return out;
}

}  // namespace mergeopf
