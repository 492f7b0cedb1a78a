#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mergeopf/errors.hpp"

namespace mergeopf {

// Smooth equality-constrained problem with box bounds:
//   minimize f(x)  subject to  c(x) = 0,  lb <= x <= ub.
// The constraint Jacobian has a fixed coordinate pattern (jac_rows/jac_cols);
// the jacobian callback refills the value array at each point.
struct NlpProblem {
  int n = 0;
  int m = 0;
  // returns f(x); fills *grad when non-null
  std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)> objective;
  std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& c)> constraints;
  std::vector<int> jac_rows, jac_cols;
  std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& vals)> jacobian;
  // optional: diagonal objective curvature, improves the inner model
  std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& diag)> objective_hess_diag;
  // optional: sparse Hessian of w'c(x) on a fixed symmetric pattern; gives
  // the inner solver the exact constraint curvature
  std::vector<int> chess_rows, chess_cols;
  std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& w, Eigen::VectorXd& vals)>
      constraint_hessian;
  Eigen::VectorXd lb, ub, x0;
};

enum class NlpStatus { Optimal, IterationCap, Stalled };

const char* to_string(NlpStatus s);

struct NlpSolution {
  Eigen::VectorXd x;
  double f = 0.0;
  double kkt_stationarity = 0.0;      // projected Lagrangian-gradient, inf-norm
  double constraint_violation = 0.0;  // inf-norm of c
  int iterations = 0;                 // outer iterations
  int inner_iterations = 0;           // total inner iterations
  NlpStatus status = NlpStatus::IterationCap;
  Eigen::VectorXd multipliers;
};

struct NlpOptions {
  double tol_feas = 1e-8;
  double tol_opt = 1e-6;
  int max_outer = 50;
  int max_inner = 500;  // per outer iteration
  double mu0 = 100.0;
  double mu_max = 1e10;
  double mu_growth = 10.0;
  // the penalty grows when the violation fails to shrink by this factor
  double required_feas_decrease = 0.25;
  double stall_tol = 1e-12;
  // proximal floor on the model curvature along objective-flat directions
  double curvature_floor = 0.01;
  bool trace = false;  // one line per outer iteration on stderr
};

// Augmented-Lagrangian outer loop. The box-constrained subproblems are
// minimized by a two-metric projected Gauss-Newton method: active bounds are
// held, the free block of  diag(curvature) + mu J'J  is factorized with a
// sparse LDLT and steps are safeguarded by a projected-arc line search.
// Deterministic: identical inputs give identical iterates. Throws
// CallbackError when a callback returns a non-finite value.
NlpSolution solve(const NlpProblem& p, const NlpOptions& opts = {});

// Exact reformulation of additive L1 objective terms  w * |x_i|  via
// nonnegative splitting x_i = x_i+ - x_i-. The base problem's objective must
// contain only the smooth part; the listed terms are added by the split.
struct L1Term {
  int index = 0;
  double weight = 1.0;
};

struct L1Split {
  NlpProblem problem;        // lifted: slot index holds x+, slot n_orig + k holds x-
  int n_orig = 0;
  std::vector<L1Term> terms;
  // maps a lifted point back to the original variables
  Eigen::VectorXd recover(const Eigen::VectorXd& y) const;
  // smallest min(x+, x-) complementarity residual over all terms
  double complementarity(const Eigen::VectorXd& y) const;
};

// tiebreak adds tiebreak*(x+^2 + x-^2) per term to the lifted objective:
// exact-L1 optima are massively degenerate corners that make active-set
// methods cycle; a small strictly convex term selects one of them. Pass 0
// for the pure reformulation.
L1Split split_l1(const NlpProblem& base, std::vector<L1Term> terms, double tiebreak = 0.0);

}  // namespace mergeopf
