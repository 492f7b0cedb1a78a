#include "mergeopf/nlp.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace mergeopf {

const char* to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::Optimal: return "optimal";
    case NlpStatus::IterationCap: return "iteration_cap";
    case NlpStatus::Stalled: return "stalled";
  }
  return "?";
}

namespace {

void check_finite(const Eigen::VectorXd& v, const char* what) {
  for (int i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw CallbackError(i, std::string(what) + " produced a non-finite value at index " +
                                 std::to_string(i));
}

// Evaluation cache for the augmented Lagrangian
//   L(x) = f(x) + lambda' c(x) + (mu/2) |c(x)|^2.
struct AugLag {
  const NlpProblem& p;
  Eigen::VectorXd lambda;
  double mu;

  Eigen::VectorXd c, c_probe, jac_vals, grad_f, grad_L, chess_w, chess_vals;
  long n_evals = 0;

  explicit AugLag(const NlpProblem& prob) : p(prob), mu(0.0) {
    lambda = Eigen::VectorXd::Zero(p.m);
    c.resize(p.m);
    c_probe.resize(p.m);
    jac_vals.resize(static_cast<Eigen::Index>(p.jac_rows.size()));
    chess_vals.resize(static_cast<Eigen::Index>(p.chess_rows.size()));
  }

  bool has_chess() const { return static_cast<bool>(p.constraint_hessian); }

  // c stays at the last value_grad point; the probe buffer keeps line-search
  // evaluations from clobbering it
  double value(const Eigen::VectorXd& x) {
    ++n_evals;
    const double f = p.objective(x, nullptr);
    if (!std::isfinite(f)) throw CallbackError(-1, "objective produced a non-finite value");
    if (p.m == 0) return f;
    p.constraints(x, c_probe);
    check_finite(c_probe, "constraints");
    return f + lambda.dot(c_probe) + 0.5 * mu * c_probe.squaredNorm();
  }

  // exact curvature of lambda'c + (mu/2)|c|^2 at the current point
  void eval_chess(const Eigen::VectorXd& x) {
    chess_w = lambda + mu * c;
    p.constraint_hessian(x, chess_w, chess_vals);
    check_finite(chess_vals, "constraint Hessian");
  }

  // value + gradient; c is left at x
  double value_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    ++n_evals;
    grad_f.resize(p.n);
    const double f = p.objective(x, &grad_f);
    if (!std::isfinite(f)) throw CallbackError(-1, "objective produced a non-finite value");
    check_finite(grad_f, "objective gradient");
    grad = grad_f;
    if (p.m == 0) return f;
    p.constraints(x, c);
    check_finite(c, "constraints");
    p.jacobian(x, jac_vals);
    check_finite(jac_vals, "constraint Jacobian");
    // grad += J' (lambda + mu c)
    for (size_t k = 0; k < p.jac_rows.size(); ++k) {
      const int r = p.jac_rows[k];
      grad[p.jac_cols[k]] += jac_vals[k] * (lambda[r] + mu * c[r]);
    }
    return f + lambda.dot(c) + 0.5 * mu * c.squaredNorm();
  }

  // Diagonal Hessian estimate 1 + mu * diag(J'J), evaluated at x. The unit
  // floor stands in for the per-unit objective curvature; the J'J part
  // captures the stiff constraint directions that dominate the spectrum.
  void hess_diag(const Eigen::VectorXd& x, Eigen::VectorXd& d) {
    d.setConstant(p.n, 1.0);
    if (p.m == 0 || mu == 0.0) return;
    p.jacobian(x, jac_vals);
    for (size_t k = 0; k < p.jac_rows.size(); ++k)
      d[p.jac_cols[k]] += mu * jac_vals[k] * jac_vals[k];
  }
};

inline void project(const NlpProblem& p, Eigen::VectorXd& x) {
  for (int i = 0; i < p.n; ++i) x[i] = std::min(std::max(x[i], p.lb[i]), p.ub[i]);
}

double projected_grad_norm(const NlpProblem& p, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& g) {
  double m = 0.0;
  for (int i = 0; i < p.n; ++i) {
    const double step = std::min(std::max(x[i] - g[i], p.lb[i]), p.ub[i]) - x[i];
    m = std::max(m, std::abs(step));
  }
  return m;
}

// Inner solver for the box-constrained subproblem: a projected Newton
// method in the TRON mold. Each iteration builds the Gauss-Newton model
//   q(s) = g's + s'(diag(curvature + sigma) + mu J'J)s / 2,
// walks the projected-gradient path through its breakpoints to a Cauchy
// point (identifying a whole working face at once), refines with a sparse
// LDLT solve on that face, and safeguards the result with an Armijo test on
// the true augmented Lagrangian. The Levenberg-Marquardt term sigma absorbs
// the curvature the model omits (mu c d2c) while the iterate is infeasible.
struct InnerResult {
  int iterations = 0;
  bool converged = false;
  double achieved_pg = 1e300;
};

InnerResult inner_solve(AugLag& al, Eigen::VectorXd& x, double inner_tol, int max_iter,
                        const NlpOptions& opts) {
  const NlpProblem& p = al.p;
  const size_t nnz = p.jac_rows.size();
  Eigen::VectorXd g(p.n), g_new(p.n), x_new(p.n), obj_diag(p.n), dscale(p.n);
  Eigen::VectorXd w(p.n), s(p.n), Bs(p.n), pdir(p.n), Bp(p.n), step(p.n);
  Eigen::VectorXd jv(p.m), jtu(p.n);
  std::vector<int> face_of(p.n);
  std::vector<std::pair<double, int>> breaks;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::SparseMatrix<double> B;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;

  const size_t hnnz = p.chess_rows.size();
  // B v = (obj_diag + sigma) v + mu J'(J v) + H v, using the values at x
  auto b_product = [&](const Eigen::VectorXd& v, double sigma, Eigen::VectorXd& out) {
    out = (obj_diag.array() + sigma) * v.array();
    if (p.m == 0 || al.mu == 0.0) return;
    jv.setZero(p.m);
    for (size_t k = 0; k < nnz; ++k) jv[p.jac_rows[k]] += al.jac_vals[k] * v[p.jac_cols[k]];
    jtu.setZero(p.n);
    for (size_t k = 0; k < nnz; ++k) jtu[p.jac_cols[k]] += al.jac_vals[k] * jv[p.jac_rows[k]];
    out += al.mu * jtu;
    if (al.has_chess())
      for (size_t k = 0; k < hnnz; ++k)
        out[p.chess_rows[k]] += al.chess_vals[k] * v[p.chess_cols[k]];
  };

  double L = al.value_grad(x, g);  // leaves jac_vals at x
  double sigma = 0.0;
  double window_L = L;
  double window_pg = 1e300;

  InnerResult res;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (projected_grad_norm(p, x, g) <= inner_tol) {
      res.converged = true;
      break;
    }

    if (p.objective_hess_diag) {
      p.objective_hess_diag(x, obj_diag);
      for (int i = 0; i < p.n; ++i)
        obj_diag[i] = std::max(obj_diag[i], opts.curvature_floor);
    } else {
      obj_diag.setConstant(p.n, std::max(1.0, opts.curvature_floor));
    }
    if (al.has_chess() && p.m > 0) al.eval_chess(x);

    // scaling for the projected-gradient path: model diagonal
    dscale = obj_diag.array() + sigma;
    if (p.m > 0 && al.mu > 0.0)
      for (size_t k = 0; k < nnz; ++k)
        dscale[p.jac_cols[k]] += al.mu * al.jac_vals[k] * al.jac_vals[k];
    if (al.has_chess() && p.m > 0)
      for (size_t k = 0; k < hnnz; ++k)
        if (p.chess_rows[k] == p.chess_cols[k]) dscale[p.chess_rows[k]] += al.chess_vals[k];
    dscale = dscale.cwiseMax(1e-4);

    // --- Cauchy phase: walk x(t) = P(x - t g/dscale) through its breakpoints
    // while the model keeps decreasing
    w = -(g.array() / dscale.array());
    breaks.clear();
    for (int i = 0; i < p.n; ++i) {
      if (w[i] > 0.0) {
        const double t = (p.ub[i] - x[i]) / w[i];
        if (std::isfinite(t)) breaks.emplace_back(t, i);
      } else if (w[i] < 0.0) {
        const double t = (p.lb[i] - x[i]) / w[i];
        if (std::isfinite(t)) breaks.emplace_back(t, i);
      } else {
        w[i] = 0.0;
      }
    }
    std::sort(breaks.begin(), breaks.end());
    size_t bk = 0;
    // coordinates that break immediately are pinned from the start
    pdir = w;
    while (bk < breaks.size() && breaks[bk].first <= 0.0) pdir[breaks[bk++].second] = 0.0;

    s.setZero(p.n);
    Bs.setZero(p.n);
    double t_cur = 0.0;
    for (int seg = 0; seg < 60 && pdir.cwiseAbs().maxCoeff() > 0.0; ++seg) {
      const double slope = (g + Bs).dot(pdir);
      if (slope >= 0.0) break;  // past the model minimum
      b_product(pdir, sigma, Bp);
      const double curv = pdir.dot(Bp);
      const double t_next = bk < breaks.size() ? breaks[bk].first : t_cur + 1e30;
      const double seg_len = t_next - t_cur;
      const double t_star = curv > 0.0 ? -slope / curv : 1e30;
      if (t_star <= seg_len || seg_len > 1e29) {
        const double dt = std::min(t_star, seg_len);
        s += dt * pdir;
        t_cur += dt;
        break;  // interior model minimum along the path
      }
      s += seg_len * pdir;
      Bs += seg_len * Bp;
      t_cur = t_next;
      while (bk < breaks.size() && breaks[bk].first <= t_cur) pdir[breaks[bk++].second] = 0.0;
    }
    // land exactly on the box
    for (int i = 0; i < p.n; ++i)
      s[i] = std::min(std::max(x[i] + s[i], p.lb[i]), p.ub[i]) - x[i];

    // --- subspace phase: Newton correction on the face the path settled on
    int n_free = 0;
    for (int i = 0; i < p.n; ++i) {
      const double xi = x[i] + s[i];
      const double span = 1e-12 * (1.0 + std::abs(xi));
      const bool on_lo = xi - p.lb[i] <= span;
      const bool on_hi = p.ub[i] - xi <= span;
      face_of[i] = on_lo || on_hi ? -1 : n_free++;
    }
    bool have_newton = false;
    if (n_free > 0) {
      b_product(s, sigma, Bs);
      trips.clear();
      for (int i = 0; i < p.n; ++i)
        if (face_of[i] >= 0) trips.emplace_back(face_of[i], face_of[i], obj_diag[i] + sigma);
      Eigen::VectorXd rhs(n_free);
      for (int i = 0; i < p.n; ++i)
        if (face_of[i] >= 0) rhs[face_of[i]] = -(g[i] + Bs[i]);
      if (p.m > 0 && al.mu > 0.0) {
        Eigen::SparseMatrix<double> Jf(p.m, n_free);
        std::vector<Eigen::Triplet<double>> jt;
        jt.reserve(nnz);
        for (size_t k = 0; k < nnz; ++k) {
          const int fc = face_of[p.jac_cols[k]];
          if (fc >= 0) jt.emplace_back(p.jac_rows[k], fc, al.jac_vals[k]);
        }
        Jf.setFromTriplets(jt.begin(), jt.end());
        B = Eigen::SparseMatrix<double>(Jf.transpose() * Jf) * al.mu;
        if (al.has_chess())
          for (size_t k = 0; k < hnnz; ++k) {
            const int fr = face_of[p.chess_rows[k]];
            const int fc = face_of[p.chess_cols[k]];
            if (fr >= 0 && fc >= 0) trips.emplace_back(fr, fc, al.chess_vals[k]);
          }
        Eigen::SparseMatrix<double> Dg(n_free, n_free);
        Dg.setFromTriplets(trips.begin(), trips.end());
        B += Dg;
      } else {
        B.resize(n_free, n_free);
        B.setFromTriplets(trips.begin(), trips.end());
      }
      // inertia correction: the constraint-curvature term can make the model
      // indefinite; bump the proximal shift until the factorization is SPD
      bool spd = false;
      for (int tries = 0; tries < 25 && !spd; ++tries) {
        ldlt.compute(B);
        spd = ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0;
        if (!spd) {
          const double bump = std::max(1e-3, 10.0 * sigma) - sigma;
          sigma += bump;
          Eigen::SparseMatrix<double> bump_eye(n_free, n_free);
          bump_eye.setIdentity();
          B += bump_eye * bump;
        }
      }
      if (spd) {
        const Eigen::VectorXd df = ldlt.solve(rhs);
        if (ldlt.info() == Eigen::Success) {
          have_newton = true;
          for (int i = 0; i < p.n; ++i)
            step[i] = s[i] + (face_of[i] >= 0 ? df[face_of[i]] : 0.0);
        }
      }
    }

    // --- acceptance: Newton-corrected step, then its backtracks, then the
    // Cauchy point itself
    bool accepted = false;
    double alpha_used = 1.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1 || !have_newton) step = s;
      double alpha = 1.0;
      const int max_ls = 30;
      for (int ls = 0; ls < max_ls; ++ls) {
        x_new = x + alpha * step;
        project(p, x_new);
        const double pred = g.dot(x_new - x);
        if (pred >= 0.0) break;
        const double L_new = al.value(x_new);
        if (L_new <= L + 1e-4 * pred) {
          x = x_new;
          L = al.value_grad(x, g_new);
          g = g_new;
          accepted = true;
          alpha_used = alpha;
          break;
        }
        alpha *= 0.5;
      }
      if (!have_newton) break;
    }
    if (accepted) {
      if (alpha_used >= 0.99)
        sigma = sigma < 1e-8 ? 0.0 : 0.25 * sigma;
      else if (alpha_used <= 0.125)
        sigma = 4.0 * sigma + 1e-4;
    } else {
      if (sigma > 1e8) break;  // wedged at machine precision
      sigma = 10.0 * sigma + 1e-3;
    }
    // Stagnation window: active-set flip-flops can cycle with microscopic
    // Armijo-legal decreases. Hand control back to the outer loop, whose
    // multiplier and penalty updates reshape the subproblem, instead of
    // burning the budget here.
    if (it % 60 == 59) {
      const double pg_now = projected_grad_norm(p, x, g);
      const bool L_stuck = window_L - L <= std::max(1e-13, 1e-10 * std::abs(L));
      const bool pg_stuck = pg_now >= 0.95 * window_pg;
      if (L_stuck || pg_stuck) break;
      window_L = L;
      window_pg = pg_now;
    }
    if (std::getenv("MERGEOPF_INNER_TRACE") && it % 25 == 0)
      std::fprintf(stderr,
                   "    it %4d L=%.10e pg=%.3e |s|=%.3e nfree=%d acc=%d alpha=%.2e sigma=%.1e\n",
                   it, L, projected_grad_norm(p, x, g), s.cwiseAbs().maxCoeff(), n_free,
                   accepted ? 1 : 0, alpha_used, sigma);
  }
  res.achieved_pg = projected_grad_norm(p, x, g);
  res.converged = res.achieved_pg <= inner_tol;
  res.iterations = it;
  return res;
}

}  // namespace

NlpSolution solve(const NlpProblem& p, const NlpOptions& opts) {
  for (int i = 0; i < p.n; ++i)
    if (!(p.lb[i] <= p.ub[i]))
      throw InvariantError(std::to_string(i),
                           "variable " + std::to_string(i) + ": lb > ub");

  AugLag al(p);
  al.mu = p.m > 0 ? opts.mu0 : 0.0;

  Eigen::VectorXd x = p.x0;
  project(p, x);

  NlpSolution sol;
  sol.multipliers = Eigen::VectorXd::Zero(p.m);

  double viol_last = std::numeric_limits<double>::infinity();
  double f_last = std::numeric_limits<double>::infinity();
  int no_progress = 0;
  // inner tolerance and multiplier-update gate, both tightened as outer
  // iterations succeed
  double omega = p.m == 0 ? opts.tol_opt : 1e-2;
  double eta = 0.1;

  Eigen::VectorXd grad_scratch_outer(p.n);
  int outer = 0;
  for (; outer < opts.max_outer; ++outer) {
    const InnerResult inner =
        inner_solve(al, x, std::max(omega, opts.tol_opt), opts.max_inner, opts);
    sol.inner_iterations += inner.iterations;

    double viol = 0.0;
    if (p.m > 0) {
      p.constraints(x, al.c);
      viol = al.c.cwiseAbs().maxCoeff();
    }
    const double f = p.objective(x, nullptr);

    // Least-squares multiplier certificate, run on a trial copy: polish the
    // iterate onto the constraint manifold with minimum-norm Gauss-Newton
    // corrections, solve for the multipliers that best explain the objective
    // gradient on the free variables, and finish if they prove first-order
    // optimality. Degenerate optima (exact-L1 corners) leave the iterated
    // multipliers circling a dual face long after the primal has converged;
    // the certificate ends the run as soon as optimality is provable. The
    // main iterate is never touched on failure.
    if (p.m > 0 && viol <= 1e3 * opts.tol_feas) {
      Eigen::VectorXd xc = x;
      Eigen::VectorXd cc = al.c;
      Eigen::VectorXd jv(static_cast<Eigen::Index>(p.jac_rows.size()));
      jv = al.jac_vals;
      double viol_c = viol;
      for (int gn = 0; gn < 3 && viol_c > opts.tol_feas; ++gn) {
        std::vector<Eigen::Triplet<double>> jt;
        jt.reserve(p.jac_rows.size());
        for (size_t k = 0; k < p.jac_rows.size(); ++k) {
          const int col = p.jac_cols[k];
          if (p.ub[col] - p.lb[col] > 1e-12) jt.emplace_back(p.jac_rows[k], col, jv[k]);
        }
        Eigen::SparseMatrix<double> Jm(p.m, p.n);
        Jm.setFromTriplets(jt.begin(), jt.end());
        Eigen::SparseMatrix<double> JJt = Eigen::SparseMatrix<double>(Jm * Jm.transpose());
        Eigen::SparseMatrix<double> eye(p.m, p.m);
        eye.setIdentity();
        JJt += eye * 1e-12;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> lu;
        lu.compute(JJt);
        if (lu.info() != Eigen::Success) break;
        const Eigen::VectorXd y = lu.solve(-cc);
        if (lu.info() != Eigen::Success) break;
        Eigen::VectorXd xn = xc;
        for (size_t k = 0; k < p.jac_rows.size(); ++k) {
          const int col = p.jac_cols[k];
          if (p.ub[col] - p.lb[col] > 1e-12) xn[col] += jv[k] * y[p.jac_rows[k]];
        }
        project(p, xn);
        Eigen::VectorXd cn(p.m);
        p.constraints(xn, cn);
        const double vn = cn.cwiseAbs().maxCoeff();
        if (vn >= viol_c) break;
        xc = xn;
        cc = cn;
        viol_c = vn;
        p.jacobian(xc, jv);
      }
      if (viol_c <= opts.tol_feas) {
        Eigen::VectorXd grad_f(p.n);
        p.objective(xc, &grad_f);
        std::vector<char> is_free(p.n, 0);
        for (int i = 0; i < p.n; ++i) {
          const double span = 1e-10 * (1.0 + std::abs(xc[i]));
          is_free[i] = xc[i] - p.lb[i] > span && p.ub[i] - xc[i] > span;
        }
        std::vector<Eigen::Triplet<double>> jt;
        jt.reserve(p.jac_rows.size());
        for (size_t k = 0; k < p.jac_rows.size(); ++k)
          if (is_free[p.jac_cols[k]])
            jt.emplace_back(p.jac_rows[k], p.jac_cols[k], jv[k]);
        Eigen::SparseMatrix<double> Jfree(p.m, p.n);
        Jfree.setFromTriplets(jt.begin(), jt.end());
        Eigen::SparseMatrix<double> A = Eigen::SparseMatrix<double>(Jfree * Jfree.transpose());
        Eigen::SparseMatrix<double> eye(p.m, p.m);
        eye.setIdentity();
        A += eye * 1e-10;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p.m);
        for (size_t k = 0; k < p.jac_rows.size(); ++k)
          if (is_free[p.jac_cols[k]])
            rhs[p.jac_rows[k]] -= jv[k] * grad_f[p.jac_cols[k]];
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> cert;
        cert.compute(A);
        if (cert.info() == Eigen::Success) {
          const Eigen::VectorXd lambda_lsq = cert.solve(rhs);
          Eigen::VectorXd grad_cert = grad_f;
          for (size_t k = 0; k < p.jac_rows.size(); ++k)
            grad_cert[p.jac_cols[k]] += jv[k] * lambda_lsq[p.jac_rows[k]];
          const double stat_cert = projected_grad_norm(p, xc, grad_cert);
          if (opts.trace)
            std::fprintf(stderr, "  outer %2d: certificate stat=%.3e (viol=%.3e)\n", outer,
                         stat_cert, viol_c);
          if (stat_cert <= opts.tol_opt) {
            sol.x = xc;
            sol.f = p.objective(xc, nullptr);
            sol.kkt_stationarity = stat_cert;
            sol.constraint_violation = viol_c;
            sol.multipliers = lambda_lsq;
            sol.status = NlpStatus::Optimal;
            sol.iterations = outer + 1;
            // snap noise-level near-bound values onto the bounds
            Eigen::VectorXd x_snap = xc;
            bool any = false;
            for (int i = 0; i < p.n; ++i) {
              if (x_snap[i] != p.lb[i] && x_snap[i] - p.lb[i] <= 1e-9) {
                x_snap[i] = p.lb[i];
                any = true;
              } else if (x_snap[i] != p.ub[i] && p.ub[i] - x_snap[i] <= 1e-9) {
                x_snap[i] = p.ub[i];
                any = true;
              }
            }
            if (any) {
              Eigen::VectorXd c_snap(p.m);
              p.constraints(x_snap, c_snap);
              const double snap_viol = c_snap.cwiseAbs().maxCoeff();
              if (snap_viol <= opts.tol_feas) {
                sol.x = x_snap;
                sol.f = p.objective(x_snap, nullptr);
                sol.constraint_violation = snap_viol;
              }
            }
            return sol;
          }
        }
      }
    }

    bool mu_changed = false;
    // A subproblem solved to its target, or at least into its neighborhood,
    // carries trustworthy residual information; a wildly unconverged one
    // would only pollute the multipliers.
    const bool inner_quality =
        inner.converged ||
        inner.achieved_pg <= std::max(1e3 * std::max(omega, opts.tol_opt), 1e-2);
    if (p.m > 0 && inner_quality) {
      if (viol <= std::max(eta, opts.tol_feas)) {
        // first-order multiplier estimate
        al.lambda += al.mu * al.c;
        eta = std::max(opts.tol_feas, eta * 0.2);
        omega = std::max(opts.tol_opt, omega * 0.2);
      } else {
        omega = std::max(opts.tol_opt, omega * 0.5);
      }
      // Penalty growth when the violation fails to shrink by 4x per outer.
      // Violations already at the tolerance scale are noise, not a reason
      // to stiffen the subproblem.
      if (viol > opts.required_feas_decrease * viol_last && viol > 10.0 * opts.tol_feas) {
        al.mu = std::min(al.mu * opts.mu_growth, opts.mu_max);
        mu_changed = true;
      }
    }

    // stationarity of the plain Lagrangian at the current multipliers
    Eigen::VectorXd grad_lag(p.n);
    {
      const double mu_saved = al.mu;
      al.mu = 0.0;
      al.value_grad(x, grad_lag);
      al.mu = mu_saved;
    }
    const double stat = projected_grad_norm(p, x, grad_lag);

    sol.x = x;
    sol.f = f;
    sol.kkt_stationarity = stat;
    sol.constraint_violation = viol;
    sol.multipliers = al.lambda;

    if (opts.trace)
      std::fprintf(stderr, "  outer %2d: f=%.8e viol=%.3e stat=%.3e mu=%.1e omega=%.1e inner=%d\n",
                   outer, f, viol, stat, al.mu, omega, sol.inner_iterations);

    if (viol <= opts.tol_feas && stat <= opts.tol_opt) {
      // Snap variables sitting within noise of a bound onto it when the
      // constraints allow: exact-L1 optima live on bounds, and later stages
      // read exact zeros from them instead of feasibility-polish dust.
      Eigen::VectorXd x_snap = x;
      bool any = false;
      for (int i = 0; i < p.n; ++i) {
        if (x_snap[i] != p.lb[i] && x_snap[i] - p.lb[i] <= 1e-9) {
          x_snap[i] = p.lb[i];
          any = true;
        } else if (x_snap[i] != p.ub[i] && p.ub[i] - x_snap[i] <= 1e-9) {
          x_snap[i] = p.ub[i];
          any = true;
        }
      }
      if (any && p.m > 0) {
        p.constraints(x_snap, al.c);
        const double snap_viol = al.c.cwiseAbs().maxCoeff();
        if (snap_viol <= opts.tol_feas) {
          sol.x = x_snap;
          sol.f = p.objective(x_snap, nullptr);
          sol.constraint_violation = snap_viol;
        }
      } else if (any) {
        sol.x = x_snap;
        sol.f = p.objective(x_snap, nullptr);
      }
      sol.status = NlpStatus::Optimal;
      sol.iterations = outer + 1;
      return sol;
    }

    // Once feasibility is met, a large penalty only hurts: it stiffens the
    // subproblem and quantizes the multiplier updates. Trade the margin for
    // conditioning until the stationarity target is reached.
    if (p.m > 0 && viol <= opts.tol_feas && stat > opts.tol_opt && al.mu > opts.mu0) {
      al.mu = std::max(opts.mu0, al.mu * 0.1);
      mu_changed = true;
    }

    const bool feas_progress = viol < viol_last - opts.stall_tol;
    const bool obj_progress = std::abs(f - f_last) > opts.stall_tol;
    const bool still_working = !inner.converged && inner.iterations > 0;
    no_progress = (feas_progress || obj_progress || mu_changed || still_working)
                      ? 0
                      : no_progress + 1;
    if (no_progress >= 2) {
      // wedged; declare a stall only once every remedy is exhausted
      if (viol > opts.tol_feas && al.mu < opts.mu_max) {
        al.mu = std::min(al.mu * opts.mu_growth, opts.mu_max);
        omega = std::max(opts.tol_opt, omega * 0.2);
        no_progress = 0;
      } else if (omega > opts.tol_opt) {
        omega = opts.tol_opt;
        no_progress = 0;
      } else {
        sol.status = NlpStatus::Stalled;
        sol.iterations = outer + 1;
        return sol;
      }
    }

    viol_last = viol;
    f_last = f;
  }

  sol.status = NlpStatus::IterationCap;
  sol.iterations = outer;
  return sol;
}

Eigen::VectorXd L1Split::recover(const Eigen::VectorXd& y) const {
  Eigen::VectorXd x = y.head(n_orig);
  for (size_t k = 0; k < terms.size(); ++k)
    x[terms[k].index] = y[terms[k].index] - y[n_orig + static_cast<int>(k)];
  return x;
}

double L1Split::complementarity(const Eigen::VectorXd& y) const {
  double worst = 0.0;
  for (size_t k = 0; k < terms.size(); ++k)
    worst = std::max(worst,
                     std::min(y[terms[k].index], y[n_orig + static_cast<int>(k)]));
  return worst;
}

L1Split split_l1(const NlpProblem& base, std::vector<L1Term> terms, double tiebreak) {
  L1Split out;
  out.n_orig = base.n;
  out.terms = std::move(terms);
  const int k = static_cast<int>(out.terms.size());

  NlpProblem& p = out.problem;
  p.n = base.n + k;
  p.m = base.m;

  p.lb.resize(p.n);
  p.ub.resize(p.n);
  p.x0.resize(p.n);
  p.lb.head(base.n) = base.lb;
  p.ub.head(base.n) = base.ub;
  p.x0.head(base.n) = base.x0;
  for (int j = 0; j < k; ++j) {
    const int i = out.terms[j].index;
    // [lb, ub] maps exactly onto x+ in [max(0,lb), max(0,ub)],
    // x- in [max(0,-ub), max(0,-lb)]
    p.lb[i] = std::max(0.0, base.lb[i]);
    p.ub[i] = std::max(0.0, base.ub[i]);
    p.lb[base.n + j] = std::max(0.0, -base.ub[i]);
    p.ub[base.n + j] = std::max(0.0, -base.lb[i]);
    p.x0[i] = std::max(0.0, base.x0[i]);
    p.x0[base.n + j] = std::max(0.0, -base.x0[i]);
  }

  // shared scratch for re-assembled original points
  auto scratch = std::make_shared<Eigen::VectorXd>(base.n);
  auto grad_scratch = std::make_shared<Eigen::VectorXd>(base.n);
  const int n_orig = base.n;
  const std::vector<L1Term> term_list = out.terms;

  auto assemble = [n_orig, term_list, scratch](const Eigen::VectorXd& y) -> const Eigen::VectorXd& {
    *scratch = y.head(n_orig);
    for (size_t j = 0; j < term_list.size(); ++j)
      (*scratch)[term_list[j].index] = y[term_list[j].index] - y[n_orig + static_cast<int>(j)];
    return *scratch;
  };

  p.objective = [base_obj = base.objective, assemble, term_list, n_orig, grad_scratch,
                 tiebreak](const Eigen::VectorXd& y, Eigen::VectorXd* grad) -> double {
    const Eigen::VectorXd& x = assemble(y);
    double f;
    if (grad) {
      grad_scratch->resize(n_orig);
      f = base_obj(x, grad_scratch.get());
      grad->head(n_orig) = *grad_scratch;
      for (size_t j = 0; j < term_list.size(); ++j) {
        const int i = term_list[j].index;
        const int jj = n_orig + static_cast<int>(j);
        const double gi = (*grad_scratch)[i];
        (*grad)[i] = gi + term_list[j].weight + 2.0 * tiebreak * y[i];
        (*grad)[jj] = -gi + term_list[j].weight + 2.0 * tiebreak * y[jj];
      }
    } else {
      f = base_obj(x, nullptr);
    }
    for (size_t j = 0; j < term_list.size(); ++j) {
      const int i = term_list[j].index;
      const int jj = n_orig + static_cast<int>(j);
      f += term_list[j].weight * (y[i] + y[jj]) + tiebreak * (y[i] * y[i] + y[jj] * y[jj]);
    }
    return f;
  };

  p.constraints = [base_cons = base.constraints, assemble](const Eigen::VectorXd& y,
                                                           Eigen::VectorXd& c) {
    base_cons(assemble(y), c);
  };

  if (base.constraint_hessian) {
    p.chess_rows = base.chess_rows;
    p.chess_cols = base.chess_cols;
    p.constraint_hessian = [base_chess = base.constraint_hessian, assemble](
                               const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                               Eigen::VectorXd& vals) { base_chess(assemble(y), w, vals); };
  }

  if (base.objective_hess_diag) {
    auto diag_scratch = std::make_shared<Eigen::VectorXd>(n_orig);
    p.objective_hess_diag = [base_diag = base.objective_hess_diag, assemble, term_list, n_orig,
                             diag_scratch, tiebreak](const Eigen::VectorXd& y,
                                                     Eigen::VectorXd& diag) {
      base_diag(assemble(y), *diag_scratch);
      diag.head(n_orig) = *diag_scratch;
      for (size_t j = 0; j < term_list.size(); ++j) {
        const int i = term_list[j].index;
        diag[i] = (*diag_scratch)[i] + 2.0 * tiebreak;
        diag[n_orig + static_cast<int>(j)] = (*diag_scratch)[i] + 2.0 * tiebreak;
      }
    };
  }

  // Jacobian: original entries plus a negated copy of each split column.
  p.jac_rows = base.jac_rows;
  p.jac_cols = base.jac_cols;
  std::vector<int> extra;  // indices into the base pattern to mirror
  for (size_t e = 0; e < base.jac_cols.size(); ++e) {
    for (size_t j = 0; j < term_list.size(); ++j) {
      if (base.jac_cols[e] == term_list[j].index) {
        p.jac_rows.push_back(base.jac_rows[e]);
        p.jac_cols.push_back(n_orig + static_cast<int>(j));
        extra.push_back(static_cast<int>(e));
        break;
      }
    }
  }
  const size_t base_nnz = base.jac_rows.size();
  auto jac_scratch = std::make_shared<Eigen::VectorXd>(static_cast<Eigen::Index>(base_nnz));
  p.jacobian = [base_jac = base.jacobian, assemble, extra, base_nnz, jac_scratch](
                   const Eigen::VectorXd& y, Eigen::VectorXd& vals) {
    base_jac(assemble(y), *jac_scratch);
    vals.head(static_cast<Eigen::Index>(base_nnz)) = *jac_scratch;
    for (size_t j = 0; j < extra.size(); ++j)
      vals[static_cast<Eigen::Index>(base_nnz + j)] = -(*jac_scratch)[extra[j]];
  };

  return out;
}

}  // namespace mergeopf
