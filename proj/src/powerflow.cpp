#include "mergeopf/powerflow.hpp"

#include <cmath>

namespace mergeopf {

namespace {

// Parallelizing tiny fixtures costs more than it saves.
constexpr int kOmpThreshold = 192;

// Terminal flows and their partials for one branch, pi-model with from-side
// tap ratio t and phase shift phi:
//   p_from = (v_f/t)^2 g - (v_f v_t/t)(g cos u + b sin u),  u = th_f - th_t - phi
//   q_from = -(v_f/t)^2 (b + bsh/2) - (v_f v_t/t)(g sin u - b cos u)
//   p_to   = v_t^2 g - (v_f v_t/t)(g cos u - b sin u)
//   q_to   = -v_t^2 (b + bsh/2) + (v_f v_t/t)(g sin u + b cos u)
struct FlowEval {
  double pf, qf, pt, qt;
  // partials w.r.t. (v_f, v_t, th_f, th_t); d*/dth_t = -d*/dth_f
  double dpf_dvf, dpf_dvt, dpf_dth;
  double dqf_dvf, dqf_dvt, dqf_dth;
  double dpt_dvf, dpt_dvt, dpt_dth;
  double dqt_dvf, dqt_dvt, dqt_dth;
};

inline FlowEval eval_branch(const Network::Index& idx, const Eigen::VectorXd& v,
                            const Eigen::VectorXd& theta, int k) {
  const int f = idx.br_from[k];
  const int t = idx.br_to[k];
  const double g = idx.br_g[k];
  const double b = idx.br_b[k];
  const double h = idx.br_bsh2[k];
  const double tap = idx.br_tap[k];
  const double vf = v[f] / tap;
  const double vt = v[t];
  const double u = theta[f] - theta[t] - idx.br_shift[k];
  const double c = std::cos(u);
  const double s = std::sin(u);
  const double gc_bs = g * c + b * s;
  const double gs_bc = g * s - b * c;
  const double gc_mbs = g * c - b * s;
  const double gs_pbc = g * s + b * c;
  const double a = vf * vt;

  FlowEval e;
  e.pf = vf * vf * g - a * gc_bs;
  e.qf = -vf * vf * (b + h) - a * gs_bc;
  e.pt = vt * vt * g - a * gc_mbs;
  e.qt = -vt * vt * (b + h) + a * gs_pbc;

  e.dpf_dvf = (2.0 * vf * g - vt * gc_bs) / tap;
  e.dpf_dvt = -vf * gc_bs;
  e.dpf_dth = a * gs_bc;

  e.dqf_dvf = (-2.0 * vf * (b + h) - vt * gs_bc) / tap;
  e.dqf_dvt = -vf * gs_bc;
  e.dqf_dth = -a * gc_bs;

  e.dpt_dvf = -vt * gc_mbs / tap;
  e.dpt_dvt = 2.0 * vt * g - vf * gc_mbs;
  e.dpt_dth = a * gs_pbc;

  e.dqt_dvf = vt * gs_pbc / tap;
  e.dqt_dvt = -2.0 * vt * (b + h) + vf * gs_pbc;
  e.dqt_dth = a * gc_mbs;
  return e;
}

}  // namespace

NetworkState flat_start(const Network& net) {
  NetworkState st;
  st.v.resize(net.n_buses());
  st.theta = Eigen::VectorXd::Zero(net.n_buses());
  st.dp = Eigen::VectorXd::Zero(net.n_loads());
  st.dq = Eigen::VectorXd::Zero(net.n_loads());
  st.q_gen.resize(net.n_pv_gens());
  for (int b = 0; b < net.n_buses(); ++b)
    st.v[b] = net.buses[b].kind == BusKind::PV ? net.idx.v_target_pu[b] : 1.0;
  for (int slot = 0; slot < net.n_pv_gens(); ++slot) {
    const int g = net.idx.pv_gens[slot];
    st.q_gen[slot] = 0.5 * (net.idx.q_min_pu[g] + net.idx.q_max_pu[g]);
  }
  return st;
}

BranchFlow branch_flows(const Network& net, const NetworkState& state, int branch) {
  const FlowEval e = eval_branch(net.idx, state.v, state.theta, branch);
  return {e.pf, e.qf, e.pt, e.qt};
}

FromFlowPartials from_flow_partials(const Network& net, const NetworkState& state, int branch) {
  const FlowEval e = eval_branch(net.idx, state.v, state.theta, branch);
  return {e.pf, e.dpf_dvf, e.dpf_dvt, e.dpf_dth};
}

std::array<FlowHessian, 4> branch_flow_hessians(const Network& net, const NetworkState& state,
                                                int branch) {
  const auto& idx = net.idx;
  const int f = idx.br_from[branch];
  const int t = idx.br_to[branch];
  const double g = idx.br_g[branch];
  const double b = idx.br_b[branch];
  const double h = idx.br_bsh2[branch];
  const double tap = idx.br_tap[branch];
  const double vf = state.v[f] / tap;
  const double vt = state.v[t];
  const double u = state.theta[f] - state.theta[t] - idx.br_shift[branch];
  const double c = std::cos(u);
  const double s = std::sin(u);
  const double G1 = g * c + b * s;   // dG1/du = -G2
  const double G2 = g * s - b * c;   // dG2/du =  G1
  const double G3 = g * c - b * s;   // dG3/du = -G4
  const double G4 = g * s + b * c;   // dG4/du =  G3
  const double A = vf * vt;

  // derivatives are taken w.r.t. the raw v_f, so each vf-slot carries 1/tap
  std::array<FlowHessian, 4> out;
  // p_from = g vf^2 - A G1
  out[0] = {2.0 * g / (tap * tap), -G1 / tap, vt * G2 / tap, 0.0, vf * G2, A * G1};
  // q_from = -(b+h) vf^2 - A G2
  out[1] = {-2.0 * (b + h) / (tap * tap), -G2 / tap, -vt * G1 / tap, 0.0, -vf * G1, A * G2};
  // p_to = g vt^2 - A G3
  out[2] = {0.0, -G3 / tap, vt * G4 / tap, 2.0 * g, vf * G4, A * G3};
  // q_to = -(b+h) vt^2 + A G4
  out[3] = {0.0, G4 / tap, vt * G3 / tap, -2.0 * (b + h), vf * G3, -A * G4};
  return out;
}

void branch_flows_all(const Network& net, const NetworkState& state, std::vector<BranchFlow>& out) {
  const int nbr = net.n_branches();
  out.resize(nbr);
#pragma omp parallel for schedule(static) if (nbr > kOmpThreshold)
  for (int k = 0; k < nbr; ++k) {
    const FlowEval e = eval_branch(net.idx, state.v, state.theta, k);
    out[k] = {e.pf, e.qf, e.pt, e.qt};
  }
}

namespace {

inline void injections_at_bus(const Network& net, const NetworkState& state, int b, double& p,
                              double& q) {
  const auto& idx = net.idx;
  p = 0.0;
  q = 0.0;
  for (int i = idx.bus_gen_start[b]; i < idx.bus_gen_start[b + 1]; ++i) {
    const int g = idx.bus_gen[i];
    p += idx.p_gen_pu[g];
    q += idx.gen_qvar[g] >= 0 ? state.q_gen[idx.gen_qvar[g]] : idx.q_gen_fixed_pu[g];
  }
  for (int i = idx.bus_load_start[b]; i < idx.bus_load_start[b + 1]; ++i) {
    const int l = idx.bus_load[i];
    p -= idx.p_load_pu[l] + state.dp[l];
    q -= idx.q_load_pu[l] + state.dq[l];
  }
}

}  // namespace

void residual(const Network& net, const NetworkState& state, Residual& out) {
  std::vector<BranchFlow> scratch;
  residual(net, state, out, scratch);
}

void residual(const Network& net, const NetworkState& state, Residual& out,
              std::vector<BranchFlow>& flow_scratch) {
  const auto& idx = net.idx;
  const int nb = net.n_buses();
  const int nbr = net.n_branches();
  out.p.resize(nb);
  out.q.resize(nb);

  // Pass 1: per-branch terminal flows. Pass 2: per-bus gather in CSR order.
  // Summation order is fixed, so results do not depend on the thread count.
  std::vector<BranchFlow>& flows = flow_scratch;
  flows.resize(nbr);
#pragma omp parallel for schedule(static) if (nbr > kOmpThreshold)
  for (int k = 0; k < nbr; ++k) {
    const FlowEval e = eval_branch(idx, state.v, state.theta, k);
    flows[k] = {e.pf, e.qf, e.pt, e.qt};
  }

#pragma omp parallel for schedule(static) if (nb > kOmpThreshold)
  for (int b = 0; b < nb; ++b) {
    double p, q;
    injections_at_bus(net, state, b, p, q);
    for (int i = idx.bus_br_start[b]; i < idx.bus_br_start[b + 1]; ++i) {
      const BranchFlow& fl = flows[idx.bus_br[i]];
      if (idx.bus_br_side[i] == 0) {
        p -= fl.p_from;
        q -= fl.q_from;
      } else {
        p -= fl.p_to;
        q -= fl.q_to;
      }
    }
    out.p[b] = p;
    out.q[b] = q;
  }
}

void residual_serial(const Network& net, const NetworkState& state, Residual& out) {
  const auto& idx = net.idx;
  const int nb = net.n_buses();
  out.p.resize(nb);
  out.q.resize(nb);
  for (int b = 0; b < nb; ++b) injections_at_bus(net, state, b, out.p[b], out.q[b]);
  for (int k = 0; k < net.n_branches(); ++k) {
    const FlowEval e = eval_branch(idx, state.v, state.theta, k);
    out.p[idx.br_from[k]] -= e.pf;
    out.q[idx.br_from[k]] -= e.qf;
    out.p[idx.br_to[k]] -= e.pt;
    out.q[idx.br_to[k]] -= e.qt;
  }
}

VarOffsets var_offsets(const Network& net) {
  VarOffsets o;
  o.v = 0;
  o.theta = net.n_buses();
  o.dp = 2 * net.n_buses();
  o.dq = 2 * net.n_buses() + net.n_loads();
  o.q_gen = 2 * net.n_buses() + 2 * net.n_loads();
  o.total = o.q_gen + net.n_pv_gens();
  return o;
}

void build_jacobian_pattern(const Network& net, PowerJacobian& jac) {
  const auto& idx = net.idx;
  const VarOffsets o = var_offsets(net);
  const int nb = net.n_buses();
  jac.n_rows = 2 * nb;
  jac.n_cols = o.total;
  jac.rows.clear();
  jac.cols.clear();
  // 16 slots per branch, then 2 per load, then 1 per PV generator. The fill
  // kernels rely on this exact layout.
  auto entry = [&jac](int r, int c) {
    jac.rows.push_back(r);
    jac.cols.push_back(c);
  };
  for (int k = 0; k < net.n_branches(); ++k) {
    const int f = idx.br_from[k];
    const int t = idx.br_to[k];
    const int rows[2] = {f, t};          // P rows; Q rows are +nb
    for (int side = 0; side < 2; ++side) {
      const int r = rows[side];
      entry(r, o.v + f);
      entry(r, o.v + t);
      entry(r, o.theta + f);
      entry(r, o.theta + t);
      entry(nb + r, o.v + f);
      entry(nb + r, o.v + t);
      entry(nb + r, o.theta + f);
      entry(nb + r, o.theta + t);
    }
  }
  for (int l = 0; l < net.n_loads(); ++l) {
    const int b = idx.load_bus[l];
    entry(b, o.dp + l);
    entry(nb + b, o.dq + l);
  }
  for (int slot = 0; slot < net.n_pv_gens(); ++slot) {
    const int b = idx.gen_bus[idx.pv_gens[slot]];
    entry(nb + b, o.q_gen + slot);
  }
  jac.vals.resize(static_cast<Eigen::Index>(jac.rows.size()));
}

namespace {

// Residual rows are gen - load - flows, so flow partials enter negated.
inline void fill_branch_block(const Network::Index& idx, const Eigen::VectorXd& v,
                              const Eigen::VectorXd& theta, int k, double* slot) {
  const FlowEval e = eval_branch(idx, v, theta, k);
  // from-side P row: d(-pf)/d(vf, vt, thf, tht)
  slot[0] = -e.dpf_dvf;
  slot[1] = -e.dpf_dvt;
  slot[2] = -e.dpf_dth;
  slot[3] = e.dpf_dth;
  // from-side Q row
  slot[4] = -e.dqf_dvf;
  slot[5] = -e.dqf_dvt;
  slot[6] = -e.dqf_dth;
  slot[7] = e.dqf_dth;
  // to-side P row
  slot[8] = -e.dpt_dvf;
  slot[9] = -e.dpt_dvt;
  slot[10] = -e.dpt_dth;
  slot[11] = e.dpt_dth;
  // to-side Q row
  slot[12] = -e.dqt_dvf;
  slot[13] = -e.dqt_dvt;
  slot[14] = -e.dqt_dth;
  slot[15] = e.dqt_dth;
}

}  // namespace

void jacobian(const Network& net, const NetworkState& state, PowerJacobian& jac) {
  if (jac.rows.empty() && jac.n_rows == 0) build_jacobian_pattern(net, jac);
  const int nbr = net.n_branches();
  double* vals = jac.vals.data();
#pragma omp parallel for schedule(static) if (nbr > kOmpThreshold)
  for (int k = 0; k < nbr; ++k)
    fill_branch_block(net.idx, state.v, state.theta, k, vals + 16 * k);
  const Eigen::Index tail = 16 * static_cast<Eigen::Index>(nbr);
  const Eigen::Index n_load_slots = 2 * net.n_loads();
  for (Eigen::Index i = 0; i < n_load_slots; ++i) vals[tail + i] = -1.0;
  for (int slot = 0; slot < net.n_pv_gens(); ++slot) vals[tail + n_load_slots + slot] = 1.0;
}

void jacobian_serial(const Network& net, const NetworkState& state, PowerJacobian& jac) {
  if (jac.rows.empty() && jac.n_rows == 0) build_jacobian_pattern(net, jac);
  double* vals = jac.vals.data();
  for (int k = 0; k < net.n_branches(); ++k)
    fill_branch_block(net.idx, state.v, state.theta, k, vals + 16 * k);
  const Eigen::Index tail = 16 * static_cast<Eigen::Index>(net.n_branches());
  const Eigen::Index n_load_slots = 2 * net.n_loads();
  for (Eigen::Index i = 0; i < n_load_slots; ++i) vals[tail + i] = -1.0;
  for (int slot = 0; slot < net.n_pv_gens(); ++slot) vals[tail + n_load_slots + slot] = 1.0;
}

}  // namespace mergeopf
