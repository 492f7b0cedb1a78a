#include "mergeopf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mergeopf {

const char* to_string(Reliability r) { return r == Reliability::SN ? "SN" : "DACF"; }
const char* to_string(BusKind k) { return k == BusKind::PV ? "PV" : "PQ"; }

Reliability reliability_from_string(const std::string& s) {
  if (s == "SN") return Reliability::SN;
  if (s == "DACF") return Reliability::DACF;
  throw SchemaError("unknown reliability level '" + s + "' (expected SN or DACF)");
}

BusKind bus_kind_from_string(const std::string& s) {
  if (s == "PV") return BusKind::PV;
  if (s == "PQ") return BusKind::PQ;
  throw SchemaError("unknown bus kind '" + s + "' (expected PV or PQ)");
}

namespace {

// Disjoint-set over bus indices, used for connected components.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

template <typename T>
void index_by_id(const std::vector<T>& items, std::unordered_map<std::string, int>& out,
                 const char* kind) {
  out.clear();
  out.reserve(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    auto [it, inserted] = out.emplace(items[i].id, static_cast<int>(i));
    if (!inserted)
      throw InvariantError(items[i].id, std::string("duplicate ") + kind + " id '" + items[i].id + "'");
  }
}

}  // namespace

void Network::finalize() {
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  if (!(s_base_mva > 0.0)) throw InvariantError("s_base_mva", "s_base_mva must be positive");

  const int nb = n_buses();
  const int nl = n_loads();
  const int ng = static_cast<int>(generators.size());
  const int nbr = n_branches();
  const int nic = n_interconnections();

  index_by_id(areas, idx.area, "area");
  index_by_id(buses, idx.bus, "bus");
  index_by_id(generators, idx.gen, "generator");
  index_by_id(loads, idx.load, "load");
  index_by_id(branches, idx.branch, "branch");

  idx.interco.clear();
  for (int i = 0; i < nic; ++i) {
    auto [it, inserted] = idx.interco.emplace(interconnections[i].branch_id, i);
    if (!inserted)
      throw InvariantError(interconnections[i].branch_id,
                           "duplicate interconnection record for branch '" +
                               interconnections[i].branch_id + "'");
  }

  // buses
  idx.bus_area.assign(nb, -1);
  idx.v_min_pu.resize(nb);
  idx.v_max_pu.resize(nb);
  idx.v_target_pu.resize(nb);
  for (int b = 0; b < nb; ++b) {
    const Bus& bus = buses[b];
    auto it = idx.area.find(bus.area_id);
    if (it == idx.area.end())
      throw ReferenceError(bus.area_id,
                           "bus '" + bus.id + "' references missing area '" + bus.area_id + "'");
    idx.bus_area[b] = it->second;
    if (!(bus.v_base > 0.0)) throw InvariantError(bus.id, "bus '" + bus.id + "': v_base must be positive");
    if (!(bus.v_min > 0.0) || !(bus.v_min <= bus.v_max))
      throw InvariantError(bus.id, "bus '" + bus.id + "': requires 0 < v_min <= v_max");
    if (bus.kind == BusKind::PV && !(bus.v_min <= bus.v_target && bus.v_target <= bus.v_max))
      throw InvariantError(bus.id, "bus '" + bus.id + "': v_target outside [v_min, v_max]");
    idx.v_min_pu[b] = bus.v_min / bus.v_base;
    idx.v_max_pu[b] = bus.v_max / bus.v_base;
    idx.v_target_pu[b] = bus.kind == BusKind::PV ? bus.v_target / bus.v_base : kNaN;
  }

  // generators
  idx.gen_bus.assign(ng, -1);
  idx.pv_gens.clear();
  idx.gen_qvar.assign(ng, -1);
  idx.p_gen_pu.resize(ng);
  idx.q_gen_fixed_pu.resize(ng);
  idx.q_min_pu.resize(ng);
  idx.q_max_pu.resize(ng);
  for (int g = 0; g < ng; ++g) {
    const Generator& gen = generators[g];
    auto it = idx.bus.find(gen.bus_id);
    if (it == idx.bus.end())
      throw ReferenceError(gen.bus_id,
                           "generator '" + gen.id + "' references missing bus '" + gen.bus_id + "'");
    idx.gen_bus[g] = it->second;
    idx.p_gen_pu[g] = gen.p_fixed / s_base_mva;
    if (buses[it->second].kind == BusKind::PV) {
      if (!(gen.q_min <= gen.q_max))
        throw InvariantError(gen.id, "generator '" + gen.id + "': q_min > q_max");
      idx.gen_qvar[g] = static_cast<int>(idx.pv_gens.size());
      idx.pv_gens.push_back(g);
      idx.q_min_pu[g] = gen.q_min / s_base_mva;
      idx.q_max_pu[g] = gen.q_max / s_base_mva;
      idx.q_gen_fixed_pu[g] = kNaN;
    } else {
      idx.q_gen_fixed_pu[g] = gen.q_fixed / s_base_mva;
      idx.q_min_pu[g] = kNaN;
      idx.q_max_pu[g] = kNaN;
    }
  }

  // loads
  idx.load_bus.assign(nl, -1);
  idx.p_load_pu.resize(nl);
  idx.q_load_pu.resize(nl);
  for (int l = 0; l < nl; ++l) {
    const Load& load = loads[l];
    auto it = idx.bus.find(load.bus_id);
    if (it == idx.bus.end())
      throw ReferenceError(load.bus_id,
                           "load '" + load.id + "' references missing bus '" + load.bus_id + "'");
    idx.load_bus[l] = it->second;
    idx.p_load_pu[l] = load.p_target / s_base_mva;
    idx.q_load_pu[l] = load.q_target / s_base_mva;
  }

  // branches
  idx.br_from.assign(nbr, -1);
  idx.br_to.assign(nbr, -1);
  idx.br_g.resize(nbr);
  idx.br_b.resize(nbr);
  idx.br_bsh2.resize(nbr);
  idx.br_tap.resize(nbr);
  idx.br_shift.resize(nbr);
  idx.branch_ic.assign(nbr, -1);
  for (int k = 0; k < nbr; ++k) {
    const Branch& br = branches[k];
    auto fit = idx.bus.find(br.from_bus);
    if (fit == idx.bus.end())
      throw ReferenceError(br.from_bus,
                           "branch '" + br.id + "' references missing bus '" + br.from_bus + "'");
    auto tit = idx.bus.find(br.to_bus);
    if (tit == idx.bus.end())
      throw ReferenceError(br.to_bus,
                           "branch '" + br.id + "' references missing bus '" + br.to_bus + "'");
    if (fit->second == tit->second)
      throw InvariantError(br.id, "branch '" + br.id + "': from_bus equals to_bus");
    if (br.x == 0.0) throw InvariantError(br.id, "branch '" + br.id + "': x must be nonzero");
    if (!(br.tap > 0.0)) throw InvariantError(br.id, "branch '" + br.id + "': tap must be positive");
    idx.br_from[k] = fit->second;
    idx.br_to[k] = tit->second;
    const double z2 = br.r * br.r + br.x * br.x;
    idx.br_g[k] = br.r / z2;
    idx.br_b[k] = -br.x / z2;
    idx.br_bsh2[k] = 0.5 * br.b_shunt;
    idx.br_tap[k] = br.tap;
    idx.br_shift[k] = br.shift;
    const bool crosses = idx.bus_area[fit->second] != idx.bus_area[tit->second];
    if (br.is_interconnection != crosses)
      throw InvariantError(br.id, "branch '" + br.id + "': is_interconnection flag (" +
                                      (br.is_interconnection ? "true" : "false") +
                                      ") does not match area assignment");
  }

  // interconnections
  idx.ic_branch.assign(nic, -1);
  idx.ic_from_pu.resize(nic);
  idx.ic_to_pu.resize(nic);
  for (int i = 0; i < nic; ++i) {
    const Interconnection& ic = interconnections[i];
    auto it = idx.branch.find(ic.branch_id);
    if (it == idx.branch.end())
      throw ReferenceError(ic.branch_id,
                           "interconnection references missing branch '" + ic.branch_id + "'");
    const int k = it->second;
    if (!branches[k].is_interconnection)
      throw InvariantError(ic.branch_id,
                           "interconnection on branch '" + ic.branch_id + "' that stays inside one area");
    idx.ic_branch[i] = k;
    idx.branch_ic[k] = i;
    const Reliability from_rel = areas[idx.bus_area[idx.br_from[k]]].reliability;
    const Reliability to_rel = areas[idx.bus_area[idx.br_to[k]]].reliability;
    if (ic.from_reliability != from_rel || ic.to_reliability != to_rel)
      throw InvariantError(ic.branch_id, "interconnection '" + ic.branch_id +
                                             "': reliability labels do not match endpoint areas");
    idx.ic_from_pu[i] = ic.target_from_side / s_base_mva;
    idx.ic_to_pu[i] = ic.target_to_side / s_base_mva;
  }

  // PV buses must carry a generator: their reactive balance has no other free source.
  {
    std::vector<char> has_gen(nb, 0);
    for (int g = 0; g < ng; ++g) has_gen[idx.gen_bus[g]] = 1;
    for (int b = 0; b < nb; ++b)
      if (buses[b].kind == BusKind::PV && !has_gen[b])
        throw InvariantError(buses[b].id, "PV bus '" + buses[b].id + "' has no generator");
  }

  // CSR adjacency, fixed deterministic order
  auto build_csr = [nb](const std::vector<int>& owner, std::vector<int>& start,
                        std::vector<int>& items) {
    start.assign(nb + 1, 0);
    for (int o : owner) start[o + 1]++;
    for (int b = 0; b < nb; ++b) start[b + 1] += start[b];
    items.assign(owner.size(), -1);
    std::vector<int> cursor(start.begin(), start.end() - 1);
    for (size_t i = 0; i < owner.size(); ++i) items[cursor[owner[i]]++] = static_cast<int>(i);
  };
  build_csr(idx.gen_bus, idx.bus_gen_start, idx.bus_gen);
  build_csr(idx.load_bus, idx.bus_load_start, idx.bus_load);

  idx.bus_br_start.assign(nb + 1, 0);
  for (int k = 0; k < nbr; ++k) {
    idx.bus_br_start[idx.br_from[k] + 1]++;
    idx.bus_br_start[idx.br_to[k] + 1]++;
  }
  for (int b = 0; b < nb; ++b) idx.bus_br_start[b + 1] += idx.bus_br_start[b];
  idx.bus_br.assign(2 * nbr, -1);
  idx.bus_br_side.assign(2 * nbr, 0);
  {
    std::vector<int> cursor(idx.bus_br_start.begin(), idx.bus_br_start.end() - 1);
    for (int k = 0; k < nbr; ++k) {
      int cf = cursor[idx.br_from[k]]++;
      idx.bus_br[cf] = k;
      idx.bus_br_side[cf] = 0;
      int ct = cursor[idx.br_to[k]]++;
      idx.bus_br[ct] = k;
      idx.bus_br_side[ct] = 1;
    }
  }

  // connected components and reference buses
  UnionFind uf(nb);
  for (int k = 0; k < nbr; ++k) uf.unite(idx.br_from[k], idx.br_to[k]);
  idx.bus_comp.assign(nb, -1);
  std::unordered_map<int, int> root_to_comp;
  idx.n_components = 0;
  for (int b = 0; b < nb; ++b) {
    int root = uf.find(b);
    auto [it, inserted] = root_to_comp.emplace(root, idx.n_components);
    if (inserted) idx.n_components++;
    idx.bus_comp[b] = it->second;
  }
  // per component: lowest-id PV bus, falling back to lowest-id bus
  idx.ref_bus.assign(idx.n_components, -1);
  std::vector<int> best_any(idx.n_components, -1);
  for (int b = 0; b < nb; ++b) {
    const int c = idx.bus_comp[b];
    auto better = [this](int cand, int cur) {
      return cur < 0 || buses[cand].id < buses[cur].id;
    };
    if (buses[b].kind == BusKind::PV && better(b, idx.ref_bus[c])) idx.ref_bus[c] = b;
    if (better(b, best_any[c])) best_any[c] = b;
  }
  for (int c = 0; c < idx.n_components; ++c)
    if (idx.ref_bus[c] < 0) idx.ref_bus[c] = best_any[c];
  idx.is_ref.assign(nb, 0);
  for (int c = 0; c < idx.n_components; ++c) idx.is_ref[idx.ref_bus[c]] = 1;
}

ValidationReport validate_network(const Network& net) {
  ValidationReport rep;
  const auto& idx = net.idx;
  rep.n_components = idx.n_components;
  rep.components.resize(idx.n_components);
  for (int b = 0; b < net.n_buses(); ++b)
    rep.components[idx.bus_comp[b]].push_back(net.buses[b].id);
  rep.reference_buses.resize(idx.n_components);
  for (int c = 0; c < idx.n_components; ++c)
    rep.reference_buses[c] = net.buses[idx.ref_bus[c]].id;
  for (int b = 0; b < net.n_buses(); ++b) {
    const bool has_gen = idx.bus_gen_start[b + 1] > idx.bus_gen_start[b];
    const bool has_load = idx.bus_load_start[b + 1] > idx.bus_load_start[b];
    if (!has_gen && !has_load) rep.buses_without_injection.push_back(net.buses[b].id);
  }
  for (const auto& ic : net.interconnections)
    if (std::isnan(ic.target_from_side) || std::isnan(ic.target_to_side))
      rep.interconnections_missing_target.push_back(ic.branch_id);
  return rep;
}

}  // namespace mergeopf
