#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "mergeopf/model.hpp"

namespace mergeopf {

// Decision variables, all per-unit (angles in radians).
struct NetworkState {
  Eigen::VectorXd v;      // per bus
  Eigen::VectorXd theta;  // per bus
  Eigen::VectorXd dp;     // per load, active deviation slack
  Eigen::VectorXd dq;     // per load, reactive deviation slack
  Eigen::VectorXd q_gen;  // per PV generator (order: Network::Index::pv_gens)
};

// v = 1 (v_target at PV buses), theta = 0, slacks = 0, q_gen at midpoint.
NetworkState flat_start(const Network& net);

struct Residual {
  Eigen::VectorXd p;  // per bus, active mismatch
  Eigen::VectorXd q;  // per bus, reactive mismatch
};

struct BranchFlow {
  double p_from, q_from, p_to, q_to;
};

// Pi-model terminal flows with from-side tap and shift.
BranchFlow branch_flows(const Network& net, const NetworkState& state, int branch);

// From-side active flow with its partials; d/dtheta_to = -d_theta.
struct FromFlowPartials {
  double p_from;
  double d_vf, d_vt, d_theta;
};
FromFlowPartials from_flow_partials(const Network& net, const NetworkState& state, int branch);

// Second derivatives of one terminal quantity over (v_f, v_t, u) with
// u = theta_f - theta_t - shift; the theta block follows by the chain rule.
struct FlowHessian {
  double vfvf, vfvt, vfu, vtvt, vtu, uu;
};

// Hessians of the four terminal flows (p_from, q_from, p_to, q_to).
std::array<FlowHessian, 4> branch_flow_hessians(const Network& net, const NetworkState& state,
                                                int branch);

// All branches at once. OpenMP over branches; entries independent.
void branch_flows_all(const Network& net, const NetworkState& state, std::vector<BranchFlow>& out);

// Nodal balance: generation - (load target + slack) - outgoing flows, per bus,
// P and Q separately. residual() is the OpenMP kernel (two-pass, per-bus gather
// in fixed order, deterministic for any thread count); residual_serial() is the
// plain scatter reference kept for testing.
void residual(const Network& net, const NetworkState& state, Residual& out);
void residual(const Network& net, const NetworkState& state, Residual& out,
              std::vector<BranchFlow>& flow_scratch);
void residual_serial(const Network& net, const NetworkState& state, Residual& out);

// Sparse Jacobian of the stacked residual [P; Q] with respect to
// x = [v | theta | dp | dq | q_gen], fixed coordinate pattern.
struct PowerJacobian {
  int n_rows = 0, n_cols = 0;
  std::vector<int> rows, cols;  // pattern, fixed after build
  Eigen::VectorXd vals;
};

// Variable offsets into the powerflow variable vector.
struct VarOffsets {
  int v = 0, theta = 0, dp = 0, dq = 0, q_gen = 0, total = 0;
};
VarOffsets var_offsets(const Network& net);

void build_jacobian_pattern(const Network& net, PowerJacobian& jac);
void jacobian(const Network& net, const NetworkState& state, PowerJacobian& jac);
void jacobian_serial(const Network& net, const NetworkState& state, PowerJacobian& jac);

struct LoadFlowOptions {
  double tol = 1e-8;
  int max_iter = 50;
  int max_halvings = 10;
};

struct LoadFlowResult {
  NetworkState state;
  int iterations = 0;
  double max_residual = 0.0;  // over the full residual, reference rows included
};

// Newton-Raphson load flow used as the feasibility validator. Loads
// (targets + slacks) and PV-bus voltages are frozen from fixed_state; free
// variables are v at PQ buses, theta off the reference, q_gen at PV buses.
// Reference-bus active rows are excluded from the solve and checked after:
// the full residual must meet tol or NonConvergence is thrown.
LoadFlowResult newton_load_flow(const Network& net, const NetworkState& fixed_state,
                                const LoadFlowOptions& opts = {});

// Same Newton solve without the final full-residual check; returns the
// per-component reference-bus active mismatch so callers can re-balance.
LoadFlowResult newton_load_flow_slack(const Network& net, const NetworkState& fixed_state,
                                      Eigen::VectorXd& ref_mismatch,
                                      const LoadFlowOptions& opts = {});

}  // namespace mergeopf
