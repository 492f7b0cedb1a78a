#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mergeopf/indicators.hpp"
#include "mergeopf/model.hpp"
#include "mergeopf/nlp.hpp"
#include "mergeopf/powerflow.hpp"

namespace mergeopf {

enum class StageName { Interco, Voltage, SnLoad, DacfLoad };
enum class ObjectiveId { Interco, Voltage, SnLoad, SnLoadL2, DacfLoad };

const char* to_string(StageName s);
const char* to_string(ObjectiveId o);

// One stage of the hierarchical schedule. The freeze rule is implied by the
// name; tolerance units follow the frozen quantity (MW for flows, kV for
// voltages, MW and Mvar for loads).
struct StageSpec {
  StageName name = StageName::Interco;
  ObjectiveId objective = ObjectiveId::Interco;
  double tolerance = 0.0;
  double tolerance_q = 0.0;  // Mvar, load stage only
};

struct MergeTolerances {
  double eps_flow_mw = 1.0;
  double eps_v_kv = 0.01;
  double eps_load_mw = 0.1;
  double eps_load_mvar = 0.1;
};

// Flow targets and the deviation-flow on interconnections, voltage targets of
// PV buses, SN load deviations, DACF load deviations: the default priority
// order, highest first.
std::vector<StageSpec> default_schedule(const MergeTolerances& tol = {});

struct MergeOptions {
  MergeTolerances tol;
  double huber_delta_mw = 5.0;
  bool dacf_pv_in_voltage_objective = true;
  // load slacks are boxed at frac * |target| (at least the floor) to keep
  // unpenalized loads physical
  double slack_box_frac = 0.5;
  double slack_box_floor_pu = 0.05;
  IndicatorThresholds thresholds;
  NlpOptions nlp;
  bool lf_warm_start = true;
  // strictly convex tie-break on split L1 slacks (solver aid; reported
  // objectives stay exact L1)
  double l1_tiebreak = 0.05;
};

// Accumulated freeze intervals; NaN entries are unfrozen. Aligned with
// net.interconnections / net.buses / net.loads.
struct FreezeSet {
  Eigen::VectorXd flow_lo, flow_hi;
  Eigen::VectorXd v_lo, v_hi;
  Eigen::VectorXd dp_lo, dp_hi, dq_lo, dq_hi;
  static FreezeSet none(const Network& net);
};

struct FreezeRecord {
  enum class Kind { Flow, Voltage, LoadP, LoadQ };
  Kind kind;
  int entity;  // interconnection / bus / load index
  double lo, hi;
  double at;  // the stage-optimal value the interval is built around
};

void apply_freezes(FreezeSet& acc, const std::vector<FreezeRecord>& records);

// Stage problem in flattened variables
// x = [v | theta | dp | dq | q_gen | interconnection flows].
struct StageVarLayout {
  int n_bus = 0, n_load = 0, n_pvgen = 0, n_ic = 0;
  int v0 = 0, th0 = 0, dp0 = 0, dq0 = 0, qg0 = 0, f0 = 0, n = 0;
};

struct StageProblem {
  NlpProblem problem;  // smooth objective part; constraints are the AC
                       // equations plus the flow-definition rows
  std::vector<L1Term> l1_terms;
  StageVarLayout layout;
};

struct ObjectiveWeights {
  double interco = 0.0, voltage = 0.0, sn_l1 = 0.0, sn_l2 = 0.0, dacf = 0.0;
};
ObjectiveWeights weights_for(ObjectiveId id);

StageProblem build_stage_problem(const Network& net, const ObjectiveWeights& w,
                                 const FreezeSet& freezes, const NetworkState& start,
                                 const MergeOptions& opts);

NetworkState state_from_x(const Network& net, const StageVarLayout& layout,
                          const Eigen::VectorXd& x);
Eigen::VectorXd x_from_state(const Network& net, const StageVarLayout& layout,
                             const NetworkState& state);

// True objective value (exact L1, flows recomputed from the state).
double evaluate_objective(const Network& net, ObjectiveId id, const NetworkState& state,
                          const MergeOptions& opts);

struct StageOutcome {
  NetworkState state;
  NlpSolution solution;
  std::vector<FreezeRecord> new_freezes;
};

// Solves one stage subject to the accumulated freezes and derives the
// freezes this stage imposes on later ones. A zero tolerance collapses the
// freeze interval to the stage optimum. Throws StageFailure when the solver
// does not reach a first-order optimum.
StageOutcome run_stage(const Network& net, const StageSpec& spec, const NetworkState& incoming,
                       const FreezeSet& accumulated, const MergeOptions& opts);

struct StageRecord {
  std::string label;
  ObjectiveId objective = ObjectiveId::Interco;
  NlpStatus status = NlpStatus::IterationCap;
  int outer_iterations = 0, inner_iterations = 0;
  double objective_at_optimum = 0.0;
  double objective_at_final = 0.0;   // re-evaluated on the final merged state
  double monotonicity_bound = 0.0;   // worst-case excess the freezes allow
  double constraint_violation = 0.0;
  double kkt_stationarity = 0.0;
  std::vector<FreezeRecord> freezes;
};

struct StageFailure : Error {
  StageFailure(const std::string& stage_label, NlpStatus solver_status, const std::string& what)
      : Error(what), stage(stage_label), status(solver_status) {}
  std::string stage;
  NlpStatus status;
  std::vector<StageRecord> completed;  // audit trail of finished stages
};

struct MergeResult {
  NetworkState final_state;
  std::vector<StageRecord> per_stage;
  IndicatorReport indicators;
};

MergeResult merge(const Network& net, const std::vector<StageSpec>& schedule,
                  const MergeOptions& opts = {});

// Weighted single-objective baseline: minimize the weighted sum of the four
// deviation objectives in one solve. Weight order: interconnection flows,
// voltages, SN loads, DACF loads.
MergeResult merge_weighted(const Network& net, const std::array<double, 4>& weights,
                           const MergeOptions& opts = {});

}  // namespace mergeopf
