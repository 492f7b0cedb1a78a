#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mergeopf/errors.hpp"

namespace mergeopf {

enum class Reliability : uint8_t { SN, DACF };
enum class BusKind : uint8_t { PV, PQ };

const char* to_string(Reliability r);
const char* to_string(BusKind k);
Reliability reliability_from_string(const std::string& s);
BusKind bus_kind_from_string(const std::string& s);

struct Area {
  std::string id;
  Reliability reliability = Reliability::SN;
  double snapshot_age = 0.0;  // minutes, informational
};

struct Bus {
  std::string id;
  std::string area_id;
  BusKind kind = BusKind::PQ;
  double v_target = 0.0;  // kV, PV buses only
  double v_min = 0.0;     // kV
  double v_max = 0.0;     // kV
  double v_base = 0.0;    // kV, nominal
};

struct Generator {
  std::string id;
  std::string bus_id;
  double p_fixed = 0.0;  // MW
  double q_fixed = 0.0;  // Mvar, generators at PQ buses
  double q_min = 0.0;    // Mvar, generators at PV buses
  double q_max = 0.0;    // Mvar
};

struct Load {
  std::string id;
  std::string bus_id;
  double p_target = 0.0;  // MW
  double q_target = 0.0;  // Mvar
};

struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double r = 0.0;        // per-unit
  double x = 0.0;        // per-unit, nonzero
  double b_shunt = 0.0;  // per-unit total line charging
  double tap = 1.0;      // from-side ratio
  double shift = 0.0;    // radians
  bool is_interconnection = false;
};

struct Interconnection {
  std::string branch_id;
  double target_from_side = 0.0;  // MW, from the exporting TSO
  double target_to_side = 0.0;    // MW, from the importing TSO
  Reliability from_reliability = Reliability::SN;
  Reliability to_reliability = Reliability::SN;
};

// Static grid description. Immutable after finalize(); safe to share
// read-only across concurrent workers.
struct Network {
  double s_base_mva = 100.0;
  std::vector<Area> areas;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<Branch> branches;
  std::vector<Interconnection> interconnections;

  // Derived lookup tables and per-unit caches, built by finalize().
  struct Index {
    std::unordered_map<std::string, int> area, bus, branch, load, gen, interco;

    std::vector<int> bus_area;             // per bus: area index
    std::vector<int> load_bus, gen_bus;    // per load/gen: bus index
    std::vector<int> pv_gens;              // generators at PV buses, in generator order
    std::vector<int> gen_qvar;             // per gen: slot in pv_gens, -1 otherwise
    std::vector<int> ic_branch;            // per interconnection: branch index
    std::vector<int> branch_ic;            // per branch: interconnection index, -1 otherwise

    // bus -> incident branches (CSR); side 0 = from terminal, 1 = to terminal
    std::vector<int> bus_br_start, bus_br;
    std::vector<uint8_t> bus_br_side;
    // bus -> generators / loads (CSR)
    std::vector<int> bus_gen_start, bus_gen;
    std::vector<int> bus_load_start, bus_load;

    int n_components = 0;
    std::vector<int> bus_comp;   // per bus
    std::vector<int> ref_bus;    // per component: angle-reference bus
    std::vector<uint8_t> is_ref; // per bus

    // per-unit caches
    Eigen::VectorXd v_min_pu, v_max_pu, v_target_pu;  // per bus (v_target_pu = NaN at PQ)
    Eigen::VectorXd p_load_pu, q_load_pu;             // per load
    Eigen::VectorXd p_gen_pu, q_gen_fixed_pu;         // per gen
    Eigen::VectorXd q_min_pu, q_max_pu;               // per gen (PV side)
    Eigen::VectorXd ic_from_pu, ic_to_pu;             // per interconnection
    // branch series admittance g + jb = 1/(r + jx), half charging, tap, shift
    Eigen::VectorXd br_g, br_b, br_bsh2, br_tap, br_shift;
    std::vector<int> br_from, br_to;
  };
  Index idx;

  int n_buses() const { return static_cast<int>(buses.size()); }
  int n_loads() const { return static_cast<int>(loads.size()); }
  int n_branches() const { return static_cast<int>(branches.size()); }
  int n_interconnections() const { return static_cast<int>(interconnections.size()); }
  int n_pv_gens() const { return static_cast<int>(idx.pv_gens.size()); }

  // Checks all invariants, resolves references and builds idx.
  // Throws ReferenceError / InvariantError naming the offending entity.
  void finalize();
};

struct ValidationReport {
  int n_components = 0;
  std::vector<std::vector<std::string>> components;     // bus ids per component
  std::vector<std::string> reference_buses;             // per component
  std::vector<std::string> buses_without_injection;     // no generator and no load
  std::vector<std::string> interconnections_missing_target;  // branch ids
};

// Report-only structural checks; never throws.
ValidationReport validate_network(const Network& net);

}  // namespace mergeopf
