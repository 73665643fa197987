#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace nhar {

// Smooth coordinate change used to turn box/positivity constraints into an
// unconstrained Newton problem.  Each parameter coordinate gets its own
// transform; `to_constrained` maps the unconstrained coordinate u back into
// the feasible interior.
enum class TransformKind {
  identity,        // x = u,           x unrestricted
  log_positive,    // x = exp(u),      x > 0
  logit_interval,  // x = lo + (hi-lo)·s(u),  lo < x < hi
};

struct CoordinateTransform {
  TransformKind kind = TransformKind::identity;
  double lo = 0.0;  // only used by logit_interval
  double hi = 1.0;

  static CoordinateTransform identity();
  static CoordinateTransform log_positive();
  static CoordinateTransform logit_interval(double lo, double hi);

  double to_unconstrained(double x) const;
  double to_constrained(double u) const;
  // First and second derivatives of the map u -> x, needed for the chain rule
  // on gradients and Hessians.
  double d_constrained(double u) const;
  double dd_constrained(double u) const;
};

struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Objective with analytic gradient and Hessian, evaluated in the original
// (constrained) coordinates.
using Objective = std::function<ObjectiveEval(const Eigen::VectorXd&)>;

struct OptimOptions {
  double tol_g = 1e-8;       // convergence: gradient norm in transformed coords
  int max_iter = 200;
  double ridge0 = 1e-8;      // initial symmetric-ridge Hessian modification
  double ridge_scale = 10.0; // escalation factor when a step is not a descent
  double armijo_c1 = 1e-4;
  double min_step = 1e-14;
};

struct OptimReport {
  Eigen::VectorXd argmin;
  double objective = 0.0;
  double gradient_norm = 0.0;  // in transformed coordinates
  int iterations = 0;
  bool converged = false;
  // Per coordinate: solution pushed against its constraint boundary.
  std::vector<bool> constraint_active;
};

// Newton minimization with symmetric-ridge modification and Armijo
// backtracking, run in transformed coordinates so every iterate stays
// feasible.  `transforms` must have one entry per coordinate of `init`.
// Non-finite objective at init raises invalid_argument; running out of
// iterations yields converged=false, not an exception.
OptimReport minimize(const Objective& objective, const Eigen::VectorXd& init,
                     const std::vector<CoordinateTransform>& transforms,
                     const OptimOptions& options = OptimOptions{});

struct LinearLSQProblem {
  Eigen::MatrixXd design;    // n × k
  Eigen::VectorXd response;  // n
  Eigen::VectorXd weights;   // n, nonnegative
};

// Weighted least squares minimizing Σ w_i (y_i − d_i·β)².  Rank-deficient
// designs raise SingularSystem.
Eigen::VectorXd solve_linear_lsq(const LinearLSQProblem& problem);

// Max over coordinates of the relative error between the analytic gradient
// and a central finite difference with step h.
double check_gradient(const Objective& objective, const Eigen::VectorXd& point,
                      double h = 1e-6);

}  // namespace nhar
