#include "mergeopf/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mergeopf/penalty.hpp"

namespace mergeopf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

const char* to_string(StageName s) {
  switch (s) {
    case StageName::Interco: return "interco";
    case StageName::Voltage: return "voltage";
    case StageName::SnLoad: return "sn_load";
    case StageName::DacfLoad: return "dacf_load";
  }
  return "?";
}

const char* to_string(ObjectiveId o) {
  switch (o) {
    case ObjectiveId::Interco: return "interco";
    case ObjectiveId::Voltage: return "voltage";
    case ObjectiveId::SnLoad: return "sn_load";
    case ObjectiveId::SnLoadL2: return "sn_load_l2";
    case ObjectiveId::DacfLoad: return "dacf_load";
  }
  return "?";
}

std::vector<StageSpec> default_schedule(const MergeTolerances& tol) {
  return {
      {StageName::Interco, ObjectiveId::Interco, tol.eps_flow_mw, 0.0},
      {StageName::Voltage, ObjectiveId::Voltage, tol.eps_v_kv, 0.0},
      {StageName::SnLoad, ObjectiveId::SnLoad, tol.eps_load_mw, tol.eps_load_mvar},
      {StageName::DacfLoad, ObjectiveId::DacfLoad, 0.0, 0.0},
  };
}

ObjectiveWeights weights_for(ObjectiveId id) {
  ObjectiveWeights w;
  switch (id) {
    case ObjectiveId::Interco: w.interco = 1.0; break;
    case ObjectiveId::Voltage: w.voltage = 1.0; break;
    case ObjectiveId::SnLoad: w.sn_l1 = 1.0; break;
    case ObjectiveId::SnLoadL2: w.sn_l2 = 1.0; break;
    case ObjectiveId::DacfLoad: w.dacf = 1.0; break;
  }
  return w;
}

FreezeSet FreezeSet::none(const Network& net) {
  FreezeSet f;
  f.flow_lo = Eigen::VectorXd::Constant(net.n_interconnections(), kNaN);
  f.flow_hi = f.flow_lo;
  f.v_lo = Eigen::VectorXd::Constant(net.n_buses(), kNaN);
  f.v_hi = f.v_lo;
  f.dp_lo = Eigen::VectorXd::Constant(net.n_loads(), kNaN);
  f.dp_hi = f.dp_lo;
  f.dq_lo = f.dp_lo;
  f.dq_hi = f.dp_lo;
  return f;
}

void apply_freezes(FreezeSet& acc, const std::vector<FreezeRecord>& records) {
  auto tighten = [](double& lo, double& hi, double new_lo, double new_hi) {
    lo = std::isnan(lo) ? new_lo : std::max(lo, new_lo);
    hi = std::isnan(hi) ? new_hi : std::min(hi, new_hi);
  };
  for (const FreezeRecord& r : records) {
    switch (r.kind) {
      case FreezeRecord::Kind::Flow:
        tighten(acc.flow_lo[r.entity], acc.flow_hi[r.entity], r.lo, r.hi);
        break;
      case FreezeRecord::Kind::Voltage:
        tighten(acc.v_lo[r.entity], acc.v_hi[r.entity], r.lo, r.hi);
        break;
      case FreezeRecord::Kind::LoadP:
        tighten(acc.dp_lo[r.entity], acc.dp_hi[r.entity], r.lo, r.hi);
        break;
      case FreezeRecord::Kind::LoadQ:
        tighten(acc.dq_lo[r.entity], acc.dq_hi[r.entity], r.lo, r.hi);
        break;
    }
  }
}

namespace {

struct ObjectiveSelection {
  std::vector<int> v_buses;                // PV buses entering the voltage objective
  std::vector<int> sn_loads, dacf_loads;   // load indices by area reliability
};

ObjectiveSelection select_entities(const Network& net, bool dacf_pv_in_obj_v) {
  ObjectiveSelection sel;
  for (int b = 0; b < net.n_buses(); ++b) {
    if (net.buses[b].kind != BusKind::PV) continue;
    const bool sn = net.areas[net.idx.bus_area[b]].reliability == Reliability::SN;
    if (sn || dacf_pv_in_obj_v) sel.v_buses.push_back(b);
  }
  for (int l = 0; l < net.n_loads(); ++l) {
    const bool sn =
        net.areas[net.idx.bus_area[net.idx.load_bus[l]]].reliability == Reliability::SN;
    (sn ? sel.sn_loads : sel.dacf_loads).push_back(l);
  }
  return sel;
}

// Shared evaluation state behind the stage problem callbacks. One instance
// per problem; a solve uses it sequentially.
struct StageEvaluator {
  const Network* net;
  StageVarLayout lay;
  ObjectiveWeights w;
  HuberParams delta;
  ObjectiveSelection sel;

  NetworkState st;
  Residual res;
  std::vector<BranchFlow> flow_scratch;
  PowerJacobian pf_jac;
  size_t pf_nnz = 0;

  void unpack(const Eigen::VectorXd& x) {
    st.v = x.segment(lay.v0, lay.n_bus);
    st.theta = x.segment(lay.th0, lay.n_bus);
    st.dp = x.segment(lay.dp0, lay.n_load);
    st.dq = x.segment(lay.dq0, lay.n_load);
    st.q_gen = x.segment(lay.qg0, lay.n_pvgen);
  }

  double objective(const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const auto& idx = net->idx;
    if (grad) grad->setZero();
    double f = 0.0;
    if (w.interco > 0.0) {
      for (int i = 0; i < lay.n_ic; ++i) {
        const double fl = x[lay.f0 + i];
        f += w.interco * double_huber(fl, idx.ic_from_pu[i], idx.ic_to_pu[i], delta);
        if (grad)
          (*grad)[lay.f0 + i] +=
              w.interco * double_huber_grad(fl, idx.ic_from_pu[i], idx.ic_to_pu[i], delta);
      }
    }
    if (w.voltage > 0.0) {
      for (int b : sel.v_buses) {
        const double dv = x[lay.v0 + b] - idx.v_target_pu[b];
        f += w.voltage * dv * dv;
        if (grad) (*grad)[lay.v0 + b] += w.voltage * 2.0 * dv;
      }
    }
    if (w.sn_l2 > 0.0) {
      for (int l : sel.sn_loads) {
        f += w.sn_l2 * (x[lay.dp0 + l] * x[lay.dp0 + l] + x[lay.dq0 + l] * x[lay.dq0 + l]);
        if (grad) {
          (*grad)[lay.dp0 + l] += w.sn_l2 * 2.0 * x[lay.dp0 + l];
          (*grad)[lay.dq0 + l] += w.sn_l2 * 2.0 * x[lay.dq0 + l];
        }
      }
    }
    if (w.dacf > 0.0) {
      for (int l : sel.dacf_loads) {
        f += w.dacf * (x[lay.dp0 + l] * x[lay.dp0 + l] + x[lay.dq0 + l] * x[lay.dq0 + l]);
        if (grad) {
          (*grad)[lay.dp0 + l] += w.dacf * 2.0 * x[lay.dp0 + l];
          (*grad)[lay.dq0 + l] += w.dacf * 2.0 * x[lay.dq0 + l];
        }
      }
    }
    // sn_l1 terms are handled by slack splitting, never here
    return f;
  }

  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) {
    unpack(x);
    residual(*net, st, res, flow_scratch);
    const int nb = lay.n_bus;
    c.segment(0, nb) = res.p;
    c.segment(nb, nb) = res.q;
    for (int i = 0; i < lay.n_ic; ++i) {
      const int k = net->idx.ic_branch[i];
      c[2 * nb + i] = flow_scratch[k].p_from - x[lay.f0 + i];
    }
  }

  void jac(const Eigen::VectorXd& x, Eigen::VectorXd& vals) {
    unpack(x);
    jacobian(*net, st, pf_jac);
    vals.head(static_cast<Eigen::Index>(pf_nnz)) = pf_jac.vals;
    Eigen::Index at = static_cast<Eigen::Index>(pf_nnz);
    for (int i = 0; i < lay.n_ic; ++i) {
      const int k = net->idx.ic_branch[i];
      const FromFlowPartials d = from_flow_partials(*net, st, k);
      vals[at++] = d.d_vf;
      vals[at++] = d.d_vt;
      vals[at++] = d.d_theta;
      vals[at++] = -d.d_theta;
      vals[at++] = -1.0;
    }
  }

  // Hessian of w' c(x): only the branch-flow terms are nonlinear, so the
  // pattern is one symmetric 4x4 block per branch over (v_f, v_t, th_f,
  // th_t). Residual rows enter negated; flow-definition rows add p_from
  // curvature on interconnection branches.
  void chess_pattern(std::vector<int>& rows, std::vector<int>& cols) const {
    const auto& idx = net->idx;
    rows.clear();
    cols.clear();
    for (int k = 0; k < net->n_branches(); ++k) {
      const int vars[4] = {lay.v0 + idx.br_from[k], lay.v0 + idx.br_to[k],
                           lay.th0 + idx.br_from[k], lay.th0 + idx.br_to[k]};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          rows.push_back(vars[a]);
          cols.push_back(vars[b]);
        }
    }
  }

  void chess(const Eigen::VectorXd& x, const Eigen::VectorXd& wrow, Eigen::VectorXd& vals) {
    unpack(x);
    const auto& idx = net->idx;
    const int nb = lay.n_bus;
    Eigen::Index at = 0;
    for (int k = 0; k < net->n_branches(); ++k) {
      const std::array<FlowHessian, 4> hq = branch_flow_hessians(*net, st, k);
      double wq[4] = {-wrow[idx.br_from[k]], -wrow[nb + idx.br_from[k]], -wrow[idx.br_to[k]],
                      -wrow[nb + idx.br_to[k]]};
      const int ic = idx.branch_ic[k];
      if (ic >= 0) wq[0] += wrow[2 * nb + ic];
      FlowHessian hsum{0, 0, 0, 0, 0, 0};
      for (int q = 0; q < 4; ++q) {
        hsum.vfvf += wq[q] * hq[q].vfvf;
        hsum.vfvt += wq[q] * hq[q].vfvt;
        hsum.vfu += wq[q] * hq[q].vfu;
        hsum.vtvt += wq[q] * hq[q].vtvt;
        hsum.vtu += wq[q] * hq[q].vtu;
        hsum.uu += wq[q] * hq[q].uu;
      }
      // (vf, vt, thf, tht) x (vf, vt, thf, tht); u = thf - tht - shift
      const double block[16] = {
          hsum.vfvf, hsum.vfvt, hsum.vfu,  -hsum.vfu,
          hsum.vfvt, hsum.vtvt, hsum.vtu,  -hsum.vtu,
          hsum.vfu,  hsum.vtu,  hsum.uu,   -hsum.uu,
          -hsum.vfu, -hsum.vtu, -hsum.uu,  hsum.uu,
      };
      for (int e = 0; e < 16; ++e) vals[at++] = block[e];
    }
  }

  // exact diagonal curvature of the separable objective
  void hess_diag(const Eigen::VectorXd& x, Eigen::VectorXd& diag) {
    const auto& idx = net->idx;
    diag.setZero(lay.n);
    if (w.interco > 0.0) {
      for (int i = 0; i < lay.n_ic; ++i) {
        const double da = std::abs(x[lay.f0 + i] - idx.ic_from_pu[i]) <= delta.delta ? 1.0 : 0.0;
        const double db = std::abs(x[lay.f0 + i] - idx.ic_to_pu[i]) <= delta.delta ? 1.0 : 0.0;
        diag[lay.f0 + i] = w.interco * (da + db);
      }
    }
    if (w.voltage > 0.0)
      for (int b : sel.v_buses) diag[lay.v0 + b] = 2.0 * w.voltage;
    if (w.sn_l2 > 0.0) {
      for (int l : sel.sn_loads) {
        diag[lay.dp0 + l] = 2.0 * w.sn_l2;
        diag[lay.dq0 + l] = 2.0 * w.sn_l2;
      }
    }
    if (w.dacf > 0.0) {
      for (int l : sel.dacf_loads) {
        diag[lay.dp0 + l] = 2.0 * w.dacf;
        diag[lay.dq0 + l] = 2.0 * w.dacf;
      }
    }
  }
};

double load_box_halfwidth(double target_pu, const MergeOptions& opts) {
  return std::max(opts.slack_box_frac * std::abs(target_pu), opts.slack_box_floor_pu);
}

}  // namespace

StageProblem build_stage_problem(const Network& net, const ObjectiveWeights& w,
                                 const FreezeSet& freezes, const NetworkState& start,
                                 const MergeOptions& opts) {
  StageProblem sp;
  StageVarLayout& lay = sp.layout;
  lay.n_bus = net.n_buses();
  lay.n_load = net.n_loads();
  lay.n_pvgen = net.n_pv_gens();
  lay.n_ic = net.n_interconnections();
  lay.v0 = 0;
  lay.th0 = lay.n_bus;
  lay.dp0 = 2 * lay.n_bus;
  lay.dq0 = 2 * lay.n_bus + lay.n_load;
  lay.qg0 = 2 * lay.n_bus + 2 * lay.n_load;
  lay.f0 = lay.qg0 + lay.n_pvgen;
  lay.n = lay.f0 + lay.n_ic;

  auto ev = std::make_shared<StageEvaluator>();
  ev->net = &net;
  ev->lay = lay;
  ev->w = w;
  ev->delta = HuberParams{opts.huber_delta_mw / net.s_base_mva};
  ev->sel = select_entities(net, opts.dacf_pv_in_voltage_objective);
  build_jacobian_pattern(net, ev->pf_jac);
  ev->pf_nnz = ev->pf_jac.rows.size();

  NlpProblem& p = sp.problem;
  p.n = lay.n;
  p.m = 2 * lay.n_bus + lay.n_ic;

  // bounds
  p.lb.resize(p.n);
  p.ub.resize(p.n);
  const auto& idx = net.idx;
  auto frz = [](double phys_lo, double phys_hi, double f_lo, double f_hi, double& lo, double& hi) {
    lo = std::isnan(f_lo) ? phys_lo : std::max(phys_lo, f_lo);
    hi = std::isnan(f_hi) ? phys_hi : std::min(phys_hi, f_hi);
  };
  for (int b = 0; b < lay.n_bus; ++b) {
    frz(idx.v_min_pu[b], idx.v_max_pu[b], freezes.v_lo[b], freezes.v_hi[b], p.lb[lay.v0 + b],
        p.ub[lay.v0 + b]);
    if (idx.is_ref[b]) {
      p.lb[lay.th0 + b] = 0.0;
      p.ub[lay.th0 + b] = 0.0;
    } else {
      p.lb[lay.th0 + b] = -kInf;
      p.ub[lay.th0 + b] = kInf;
    }
  }
  for (int l = 0; l < lay.n_load; ++l) {
    const double hp = load_box_halfwidth(idx.p_load_pu[l], opts);
    const double hq = load_box_halfwidth(idx.q_load_pu[l], opts);
    frz(-hp, hp, freezes.dp_lo[l], freezes.dp_hi[l], p.lb[lay.dp0 + l], p.ub[lay.dp0 + l]);
    frz(-hq, hq, freezes.dq_lo[l], freezes.dq_hi[l], p.lb[lay.dq0 + l], p.ub[lay.dq0 + l]);
  }
  for (int slot = 0; slot < lay.n_pvgen; ++slot) {
    const int g = idx.pv_gens[slot];
    p.lb[lay.qg0 + slot] = idx.q_min_pu[g];
    p.ub[lay.qg0 + slot] = idx.q_max_pu[g];
  }
  for (int i = 0; i < lay.n_ic; ++i)
    frz(-kInf, kInf, freezes.flow_lo[i], freezes.flow_hi[i], p.lb[lay.f0 + i], p.ub[lay.f0 + i]);

  p.x0 = x_from_state(net, lay, start);

  // constraint Jacobian pattern: powerflow entries, then flow-definition rows
  p.jac_rows = ev->pf_jac.rows;
  p.jac_cols = ev->pf_jac.cols;
  for (int i = 0; i < lay.n_ic; ++i) {
    const int k = idx.ic_branch[i];
    const int row = 2 * lay.n_bus + i;
    p.jac_rows.insert(p.jac_rows.end(), {row, row, row, row, row});
    p.jac_cols.insert(p.jac_cols.end(),
                      {lay.v0 + idx.br_from[k], lay.v0 + idx.br_to[k], lay.th0 + idx.br_from[k],
                       lay.th0 + idx.br_to[k], lay.f0 + i});
  }

  p.objective = [ev](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    return ev->objective(x, grad);
  };
  p.constraints = [ev](const Eigen::VectorXd& x, Eigen::VectorXd& c) { ev->constraints(x, c); };
  p.jacobian = [ev](const Eigen::VectorXd& x, Eigen::VectorXd& vals) { ev->jac(x, vals); };
  p.objective_hess_diag = [ev](const Eigen::VectorXd& x, Eigen::VectorXd& diag) {
    ev->hess_diag(x, diag);
  };
  ev->chess_pattern(p.chess_rows, p.chess_cols);
  p.constraint_hessian = [ev](const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                              Eigen::VectorXd& vals) { ev->chess(x, w, vals); };

  if (w.sn_l1 > 0.0) {
    for (int l : ev->sel.sn_loads) {
      sp.l1_terms.push_back({lay.dp0 + l, w.sn_l1});
      sp.l1_terms.push_back({lay.dq0 + l, w.sn_l1});
    }
  }
  return sp;
}

NetworkState state_from_x(const Network& net, const StageVarLayout& lay, const Eigen::VectorXd& x) {
  NetworkState st;
  st.v = x.segment(lay.v0, lay.n_bus);
  st.theta = x.segment(lay.th0, lay.n_bus);
  st.dp = x.segment(lay.dp0, lay.n_load);
  st.dq = x.segment(lay.dq0, lay.n_load);
  st.q_gen = x.segment(lay.qg0, lay.n_pvgen);
  (void)net;
  return st;
}

Eigen::VectorXd x_from_state(const Network& net, const StageVarLayout& lay,
                             const NetworkState& state) {
  Eigen::VectorXd x(lay.n);
  x.segment(lay.v0, lay.n_bus) = state.v;
  x.segment(lay.th0, lay.n_bus) = state.theta;
  x.segment(lay.dp0, lay.n_load) = state.dp;
  x.segment(lay.dq0, lay.n_load) = state.dq;
  x.segment(lay.qg0, lay.n_pvgen) = state.q_gen;
  for (int i = 0; i < lay.n_ic; ++i)
    x[lay.f0 + i] = branch_flows(net, state, net.idx.ic_branch[i]).p_from;
  return x;
}

double evaluate_objective(const Network& net, ObjectiveId id, const NetworkState& state,
                          const MergeOptions& opts) {
  const auto& idx = net.idx;
  const HuberParams delta{opts.huber_delta_mw / net.s_base_mva};
  const ObjectiveSelection sel = select_entities(net, opts.dacf_pv_in_voltage_objective);
  double f = 0.0;
  switch (id) {
    case ObjectiveId::Interco:
      for (int i = 0; i < net.n_interconnections(); ++i) {
        const double fl = branch_flows(net, state, idx.ic_branch[i]).p_from;
        f += double_huber(fl, idx.ic_from_pu[i], idx.ic_to_pu[i], delta);
      }
      break;
    case ObjectiveId::Voltage:
      for (int b : sel.v_buses) f += l2(state.v[b] - idx.v_target_pu[b]);
      break;
    case ObjectiveId::SnLoad:
      for (int l : sel.sn_loads) f += l1(state.dp[l]) + l1(state.dq[l]);
      break;
    case ObjectiveId::SnLoadL2:
      for (int l : sel.sn_loads) f += l2(state.dp[l]) + l2(state.dq[l]);
      break;
    case ObjectiveId::DacfLoad:
      for (int l : sel.dacf_loads) f += l2(state.dp[l]) + l2(state.dq[l]);
      break;
  }
  return f;
}

StageOutcome run_stage(const Network& net, const StageSpec& spec, const NetworkState& incoming,
                       const FreezeSet& accumulated, const MergeOptions& opts) {
  StageProblem sp =
      build_stage_problem(net, weights_for(spec.objective), accumulated, incoming, opts);

  StageOutcome out;
  if (sp.l1_terms.empty()) {
    out.solution = solve(sp.problem, opts.nlp);
    out.state = state_from_x(net, sp.layout, out.solution.x);
  } else {
    L1Split split = split_l1(sp.problem, sp.l1_terms, opts.l1_tiebreak);
    out.solution = solve(split.problem, opts.nlp);
    out.solution.x = split.recover(out.solution.x);
    out.state = state_from_x(net, sp.layout, out.solution.x);
  }
  if (out.solution.status != NlpStatus::Optimal)
    throw StageFailure(to_string(spec.name), out.solution.status,
                       std::string("stage '") + to_string(spec.name) + "' failed: solver status " +
                           to_string(out.solution.status) + ", violation " +
                           std::to_string(out.solution.constraint_violation));

  const auto& idx = net.idx;
  const StageVarLayout& lay = sp.layout;
  switch (spec.name) {
    case StageName::Interco: {
      // The achieved flow is frozen with the tolerance, like the voltage and
      // load freezes: binding the whole inter-target interval instead lets
      // later stages trade away the flow objective they were meant to keep.
      const double eps = spec.tolerance / net.s_base_mva;
      for (int i = 0; i < lay.n_ic; ++i) {
        const double f_opt = out.solution.x[lay.f0 + i];
        out.new_freezes.push_back({FreezeRecord::Kind::Flow, i, f_opt - eps, f_opt + eps, f_opt});
      }
      break;
    }
    case StageName::Voltage: {
      for (int b = 0; b < net.n_buses(); ++b) {
        if (net.buses[b].kind != BusKind::PV) continue;
        const double eps = spec.tolerance / net.buses[b].v_base;
        const double v_opt = out.state.v[b];
        out.new_freezes.push_back({FreezeRecord::Kind::Voltage, b, v_opt - eps, v_opt + eps, v_opt});
      }
      break;
    }
    case StageName::SnLoad: {
      const double eps_p = spec.tolerance / net.s_base_mva;
      const double eps_q = spec.tolerance_q / net.s_base_mva;
      for (int l = 0; l < net.n_loads(); ++l) {
        const bool sn = net.areas[idx.bus_area[idx.load_bus[l]]].reliability == Reliability::SN;
        if (!sn) continue;
        out.new_freezes.push_back(
            {FreezeRecord::Kind::LoadP, l, out.state.dp[l] - eps_p, out.state.dp[l] + eps_p,
             out.state.dp[l]});
        out.new_freezes.push_back(
            {FreezeRecord::Kind::LoadQ, l, out.state.dq[l] - eps_q, out.state.dq[l] + eps_q,
             out.state.dq[l]});
      }
      break;
    }
    case StageName::DacfLoad:
      break;
  }
  return out;
}

namespace {

void require_targets(const Network& net) {
  for (const Interconnection& ic : net.interconnections)
    if (std::isnan(ic.target_from_side) || std::isnan(ic.target_to_side))
      throw InvariantError(ic.branch_id,
                           "interconnection '" + ic.branch_id + "' is missing a flow target");
}

NetworkState initial_state(const Network& net, const MergeOptions& opts) {
  NetworkState st = flat_start(net);
  if (!opts.lf_warm_start) return st;
  try {
    Eigen::VectorXd ref_mismatch;
    return newton_load_flow_slack(net, st, ref_mismatch).state;
  } catch (const Error&) {
    return st;  // stressed case: start flat and let the solver work
  }
}

// Worst objective increase the freeze intervals of one stage allow, summed
// per frozen quantity. Convex terms peak at interval endpoints.
double monotonicity_bound(const Network& net, const StageRecord& rec, const MergeOptions& opts,
                          bool is_last) {
  if (is_last) return 0.0;
  if (rec.freezes.empty()) return kInf;
  const auto& idx = net.idx;
  const HuberParams delta{opts.huber_delta_mw / net.s_base_mva};
  const ObjectiveSelection sel = select_entities(net, opts.dacf_pv_in_voltage_objective);
  double bound = 0.0;
  for (const FreezeRecord& r : rec.freezes) {
    switch (rec.objective) {
      case ObjectiveId::Interco: {
        if (r.kind != FreezeRecord::Kind::Flow) continue;
        const double a = idx.ic_from_pu[r.entity];
        const double b = idx.ic_to_pu[r.entity];
        bound += double_huber_interval_max(a, b, delta, r.lo, r.hi) -
                 double_huber(r.at, a, b, delta);
        break;
      }
      case ObjectiveId::Voltage: {
        if (r.kind != FreezeRecord::Kind::Voltage) continue;
        if (std::find(sel.v_buses.begin(), sel.v_buses.end(), r.entity) == sel.v_buses.end())
          continue;
        const double vt = idx.v_target_pu[r.entity];
        bound += std::max(l2(r.lo - vt), l2(r.hi - vt)) - l2(r.at - vt);
        break;
      }
      case ObjectiveId::SnLoad:
        bound += std::max(l1(r.lo), l1(r.hi)) - l1(r.at);
        break;
      case ObjectiveId::SnLoadL2:
        bound += std::max(l2(r.lo), l2(r.hi)) - l2(r.at);
        break;
      case ObjectiveId::DacfLoad:
        break;
    }
  }
  return bound;
}

StageRecord make_record(const Network& net, const StageSpec& spec, const StageOutcome& outcome,
                        const MergeOptions& opts) {
  StageRecord rec;
  rec.label = to_string(spec.name);
  rec.objective = spec.objective;
  rec.status = outcome.solution.status;
  rec.outer_iterations = outcome.solution.iterations;
  rec.inner_iterations = outcome.solution.inner_iterations;
  rec.objective_at_optimum = evaluate_objective(net, spec.objective, outcome.state, opts);
  rec.constraint_violation = outcome.solution.constraint_violation;
  rec.kkt_stationarity = outcome.solution.kkt_stationarity;
  rec.freezes = outcome.new_freezes;
  return rec;
}

}  // namespace

MergeResult merge(const Network& net, const std::vector<StageSpec>& schedule,
                  const MergeOptions& opts) {
  if (schedule.empty()) throw InvariantError("schedule", "merge schedule is empty");
  require_targets(net);

  MergeResult result;
  NetworkState state = initial_state(net, opts);
  FreezeSet freezes = FreezeSet::none(net);

  for (const StageSpec& spec : schedule) {
    try {
      StageOutcome outcome = run_stage(net, spec, state, freezes, opts);
      result.per_stage.push_back(make_record(net, spec, outcome, opts));
      apply_freezes(freezes, outcome.new_freezes);
      state = std::move(outcome.state);
    } catch (StageFailure& failure) {
      failure.completed = result.per_stage;
      throw;
    }
  }

  result.final_state = state;
  for (size_t k = 0; k < result.per_stage.size(); ++k) {
    StageRecord& rec = result.per_stage[k];
    rec.objective_at_final = evaluate_objective(net, rec.objective, state, opts);
    rec.monotonicity_bound =
        monotonicity_bound(net, rec, opts, k + 1 == result.per_stage.size());
  }
  result.indicators = compute_indicators(net, state, opts.thresholds);
  return result;
}

MergeResult merge_weighted(const Network& net, const std::array<double, 4>& weights,
                           const MergeOptions& opts) {
  for (double w : weights)
    if (w < 0.0) throw InvariantError("weights", "weights must be nonnegative");
  if (weights[0] + weights[1] + weights[2] + weights[3] <= 0.0)
    throw InvariantError("weights", "at least one weight must be positive");
  require_targets(net);

  ObjectiveWeights w;
  w.interco = weights[0];
  w.voltage = weights[1];
  w.sn_l1 = weights[2];
  w.dacf = weights[3];

  NetworkState start = initial_state(net, opts);
  StageProblem sp = build_stage_problem(net, w, FreezeSet::none(net), start, opts);

  NlpSolution solution;
  if (sp.l1_terms.empty()) {
    solution = solve(sp.problem, opts.nlp);
  } else {
    L1Split split = split_l1(sp.problem, sp.l1_terms, opts.l1_tiebreak);
    solution = solve(split.problem, opts.nlp);
    solution.x = split.recover(solution.x);
  }
  if (solution.status != NlpStatus::Optimal)
    throw StageFailure("weighted", solution.status,
                       std::string("weighted merge failed: solver status ") +
                           to_string(solution.status) + ", violation " +
                           std::to_string(solution.constraint_violation));

  MergeResult result;
  result.final_state = state_from_x(net, sp.layout, solution.x);

  StageRecord rec;
  rec.label = "weighted";
  rec.status = solution.status;
  rec.outer_iterations = solution.iterations;
  rec.inner_iterations = solution.inner_iterations;
  rec.objective_at_optimum = solution.f;
  rec.objective_at_final = solution.f;
  rec.monotonicity_bound = 0.0;
  rec.constraint_violation = solution.constraint_violation;
  rec.kkt_stationarity = solution.kkt_stationarity;
  result.per_stage.push_back(std::move(rec));

  result.indicators = compute_indicators(net, result.final_state, opts.thresholds);
  return result;
}

}  // namespace mergeopf
