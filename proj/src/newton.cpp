#include <cmath>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "mergeopf/powerflow.hpp"

namespace mergeopf {

namespace {

struct ReducedSystem {
  // reduced row/col index per full row/col, -1 when excluded
  std::vector<int> row_of;  // 2*nb
  std::vector<int> col_of;  // var_offsets total
  int n = 0;                // square size
  std::vector<int> pv_bus_first_slot;  // per bus: q_gen slot used as the bus unknown, -1
};

ReducedSystem build_reduced(const Network& net) {
  const auto& idx = net.idx;
  const VarOffsets o = var_offsets(net);
  const int nb = net.n_buses();
  ReducedSystem rs;
  rs.row_of.assign(2 * nb, -1);
  rs.col_of.assign(o.total, -1);
  rs.pv_bus_first_slot.assign(nb, -1);
  int r = 0;
  for (int b = 0; b < nb; ++b)
    if (!idx.is_ref[b]) rs.row_of[b] = r++;          // P rows, reference dropped
  for (int b = 0; b < nb; ++b) rs.row_of[nb + b] = r++;  // Q rows
  int c = 0;
  for (int b = 0; b < nb; ++b)
    if (net.buses[b].kind == BusKind::PQ) rs.col_of[o.v + b] = c++;
  for (int b = 0; b < nb; ++b)
    if (!idx.is_ref[b]) rs.col_of[o.theta + b] = c++;
  for (int slot = 0; slot < net.n_pv_gens(); ++slot) {
    const int b = idx.gen_bus[idx.pv_gens[slot]];
    if (rs.pv_bus_first_slot[b] < 0) {
      rs.pv_bus_first_slot[b] = slot;
      rs.col_of[o.q_gen + slot] = c++;
    }
  }
  rs.n = c;
  if (r != c)
    throw SingularJacobian("load flow system is not square (" + std::to_string(r) + " equations, " +
                           std::to_string(c) + " unknowns)");
  return rs;
}

double reduced_norm(const Residual& res, const Network& net) {
  double m = 0.0;
  for (int b = 0; b < net.n_buses(); ++b) {
    if (!net.idx.is_ref[b]) m = std::max(m, std::abs(res.p[b]));
    m = std::max(m, std::abs(res.q[b]));
  }
  return m;
}

LoadFlowResult solve_newton(const Network& net, const NetworkState& fixed_state,
                            const LoadFlowOptions& opts) {
  const auto& idx = net.idx;
  const int nb = net.n_buses();
  const ReducedSystem rs = build_reduced(net);
  const VarOffsets o = var_offsets(net);

  LoadFlowResult result;
  result.state = fixed_state;
  NetworkState& st = result.state;

  PowerJacobian jac;
  build_jacobian_pattern(net, jac);
  Residual res;
  std::vector<BranchFlow> scratch;
  residual(net, st, res, scratch);
  double norm = reduced_norm(res, net);

  Eigen::SparseMatrix<double> A(rs.n, rs.n);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs(rs.n), delta(rs.n);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;

  int it = 0;
  for (; it < opts.max_iter && norm > opts.tol; ++it) {
    if (!std::isfinite(norm)) throw NonConvergence("load flow residual became non-finite");
    jacobian(net, st, jac);
    trips.clear();
    for (size_t e = 0; e < jac.rows.size(); ++e) {
      const int rr = rs.row_of[jac.rows[e]];
      const int cc = rs.col_of[jac.cols[e]];
      if (rr >= 0 && cc >= 0) trips.emplace_back(rr, cc, jac.vals[e]);
    }
    A.setFromTriplets(trips.begin(), trips.end());
    for (int b = 0; b < nb; ++b) {
      if (rs.row_of[b] >= 0) rhs[rs.row_of[b]] = -res.p[b];
      rhs[rs.row_of[nb + b]] = -res.q[b];
    }
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw SingularJacobian("singular load flow Jacobian");
    delta = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw SingularJacobian("load flow linear solve failed");

    // step with halving until the residual norm decreases
    const NetworkState saved = st;
    double step = 1.0;
    double new_norm = norm;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      st = saved;
      for (int b = 0; b < nb; ++b) {
        if (rs.col_of[o.v + b] >= 0) st.v[b] += step * delta[rs.col_of[o.v + b]];
        if (rs.col_of[o.theta + b] >= 0) st.theta[b] += step * delta[rs.col_of[o.theta + b]];
        const int slot = rs.pv_bus_first_slot[b];
        if (slot >= 0) {
          // distribute the bus-level reactive update over the bus's
          // generators, widest bound range first
          const double dq = step * delta[rs.col_of[o.q_gen + slot]];
          double total_width = 0.0;
          int n_gens = 0;
          for (int i = idx.bus_gen_start[b]; i < idx.bus_gen_start[b + 1]; ++i) {
            const int g = idx.bus_gen[i];
            if (idx.gen_qvar[g] >= 0) {
              total_width += idx.q_max_pu[g] - idx.q_min_pu[g];
              ++n_gens;
            }
          }
          for (int i = idx.bus_gen_start[b]; i < idx.bus_gen_start[b + 1]; ++i) {
            const int g = idx.bus_gen[i];
            if (idx.gen_qvar[g] < 0) continue;
            const double w = total_width > 0.0
                                 ? (idx.q_max_pu[g] - idx.q_min_pu[g]) / total_width
                                 : 1.0 / n_gens;
            st.q_gen[idx.gen_qvar[g]] += dq * w;
          }
        }
      }
      residual(net, st, res, scratch);
      new_norm = reduced_norm(res, net);
      if (new_norm < norm || new_norm <= opts.tol) break;
      step *= 0.5;
    }
    if (new_norm >= norm && new_norm > opts.tol)
      throw NonConvergence("load flow stalled at residual " + std::to_string(new_norm) + " after " +
                           std::to_string(it + 1) + " iterations");
    norm = new_norm;
  }
  if (norm > opts.tol)
    throw NonConvergence("load flow hit the iteration cap at residual " + std::to_string(norm));

  result.iterations = it;
  result.max_residual = std::max(res.p.cwiseAbs().maxCoeff(), res.q.cwiseAbs().maxCoeff());
  return result;
}

}  // namespace

LoadFlowResult newton_load_flow(const Network& net, const NetworkState& fixed_state,
                                const LoadFlowOptions& opts) {
  LoadFlowResult r = solve_newton(net, fixed_state, opts);
  if (r.max_residual > opts.tol)
    throw NonConvergence("load flow converged but the reference-bus active mismatch is " +
                         std::to_string(r.max_residual) + " pu; the case is not balanced");
  return r;
}

LoadFlowResult newton_load_flow_slack(const Network& net, const NetworkState& fixed_state,
                                      Eigen::VectorXd& ref_mismatch, const LoadFlowOptions& opts) {
  LoadFlowResult r = solve_newton(net, fixed_state, opts);
  Residual res;
  residual(net, r.state, res);
  ref_mismatch.resize(net.idx.n_components);
  for (int c = 0; c < net.idx.n_components; ++c) ref_mismatch[c] = res.p[net.idx.ref_bus[c]];
  return r;
}

}  // namespace mergeopf
