#include "nhar/optimize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nhar/errors.hpp"

namespace nhar {

namespace {

double sigmoid(double u) {
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace

CoordinateTransform CoordinateTransform::identity() {
  return CoordinateTransform{TransformKind::identity, 0.0, 1.0};
}

CoordinateTransform CoordinateTransform::log_positive() {
  return CoordinateTransform{TransformKind::log_positive, 0.0, 1.0};
}

CoordinateTransform CoordinateTransform::logit_interval(double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("logit_interval requires lo < hi");
  }
  return CoordinateTransform{TransformKind::logit_interval, lo, hi};
}

double CoordinateTransform::to_unconstrained(double x) const {
  switch (kind) {
    case TransformKind::identity:
      return x;
    case TransformKind::log_positive:
      if (!(x > 0.0)) {
        throw std::invalid_argument("log_positive transform requires x > 0");
      }
      return std::log(x);
    case TransformKind::logit_interval: {
      if (!(x > lo && x < hi)) {
        throw std::invalid_argument(
            "logit_interval transform requires lo < x < hi");
      }
      const double t = (x - lo) / (hi - lo);
      return std::log(t / (1.0 - t));
    }
  }
  return x;
}

double CoordinateTransform::to_constrained(double u) const {
  switch (kind) {
    case TransformKind::identity:
      return u;
    case TransformKind::log_positive:
      return std::exp(u);
    case TransformKind::logit_interval:
      return lo + (hi - lo) * sigmoid(u);
  }
  return u;
}

double CoordinateTransform::d_constrained(double u) const {
  switch (kind) {
    case TransformKind::identity:
      return 1.0;
    case TransformKind::log_positive:
      return std::exp(u);
    case TransformKind::logit_interval: {
      const double s = sigmoid(u);
      return (hi - lo) * s * (1.0 - s);
    }
  }
  return 1.0;
}

double CoordinateTransform::dd_constrained(double u) const {
  switch (kind) {
    case TransformKind::identity:
      return 0.0;
    case TransformKind::log_positive:
      return std::exp(u);
    case TransformKind::logit_interval: {
      const double s = sigmoid(u);
      return (hi - lo) * s * (1.0 - s) * (1.0 - 2.0 * s);
    }
  }
  return 0.0;
}

namespace {

struct TransformedEval {
  double value;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  Eigen::VectorXd x;  // constrained point
};

Eigen::VectorXd to_constrained_vec(
    const Eigen::VectorXd& u, const std::vector<CoordinateTransform>& tf) {
  Eigen::VectorXd x(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    x[k] = tf[static_cast<std::size_t>(k)].to_constrained(u[k]);
  }
  return x;
}

// Chain rule: F(u) = f(x(u)) with coordinatewise x_k(u_k).
//   ∂F/∂u_k      = g_k x'_k
//   ∂²F/∂u_k∂u_l = H_kl x'_k x'_l + δ_kl g_k x''_k
TransformedEval eval_transformed(const Objective& f, const Eigen::VectorXd& u,
                                 const std::vector<CoordinateTransform>& tf) {
  TransformedEval out;
  out.x = to_constrained_vec(u, tf);
  ObjectiveEval e = f(out.x);
  const Eigen::Index d = u.size();
  if (e.grad.size() != d || e.hess.rows() != d || e.hess.cols() != d) {
    throw std::invalid_argument("objective returned mismatched derivative dimensions");
  }
  Eigen::VectorXd dx(d), ddx(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    dx[k] = tf[static_cast<std::size_t>(k)].d_constrained(u[k]);
    ddx[k] = tf[static_cast<std::size_t>(k)].dd_constrained(u[k]);
  }
  out.value = e.value;
  out.grad = e.grad.cwiseProduct(dx);
  out.hess = dx.asDiagonal() * e.hess * dx.asDiagonal();
  out.hess.diagonal() += e.grad.cwiseProduct(ddx);
  return out;
}

bool boundary_active(const CoordinateTransform& tf, double x) {
  switch (tf.kind) {
    case TransformKind::identity:
      return false;
    case TransformKind::log_positive:
      return x <= 1e-8;
    case TransformKind::logit_interval: {
      const double span = tf.hi - tf.lo;
      return (x - tf.lo) <= 1e-6 * span || (tf.hi - x) <= 1e-6 * span;
    }
  }
  return false;
}

}  // namespace

OptimReport minimize(const Objective& objective, const Eigen::VectorXd& init,
                     const std::vector<CoordinateTransform>& transforms,
                     const OptimOptions& options) {
  const Eigen::Index d = init.size();
  if (static_cast<Eigen::Index>(transforms.size()) != d) {
    throw std::invalid_argument("one transform required per coordinate");
  }
  Eigen::VectorXd u(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    u[k] = transforms[static_cast<std::size_t>(k)].to_unconstrained(init[k]);
  }

  TransformedEval cur = eval_transformed(objective, u, transforms);
  if (!std::isfinite(cur.value)) {
    throw std::invalid_argument("objective non-finite at initial point");
  }

  OptimReport report;
  report.iterations = 0;
  report.converged = false;

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    report.gradient_norm = cur.grad.norm();
    if (report.gradient_norm <= options.tol_g) {
      report.converged = true;
      break;
    }

    // Newton direction with symmetric-ridge escalation until it is a
    // finite descent direction.
    Eigen::VectorXd p;
    double ridge = options.ridge0;
    bool have_direction = false;
    for (int attempt = 0; attempt < 64; ++attempt) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.hess + ridge * eye);
      if (ldlt.info() == Eigen::Success) {
        p = ldlt.solve(-cur.grad);
        if (p.allFinite() && cur.grad.dot(p) < 0.0) {
          have_direction = true;
          break;
        }
      }
      ridge = (ridge == 0.0 ? options.ridge0 : ridge) * options.ridge_scale;
    }
    if (!have_direction) {
      break;  // give up: report the best point seen with converged=false
    }

    // Armijo backtracking keeps the accepted iterates monotone. Once the
    // predicted decrease drops below the objective's floating-point
    // evaluation noise, sufficient decrease can no longer be measured; in
    // that quadratic tail, accept the (near-full) Newton step when it
    // shrinks the gradient instead, which is computable far below the
    // f-noise floor.
    const double slope = cur.grad.dot(p);
    const double f_noise = 64.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(cur.value) + 1.0);
    const bool polish = -options.armijo_c1 * slope <= f_noise;
    double step = 1.0;
    bool accepted = false;
    while (step >= (polish ? 0.25 : options.min_step)) {
      const Eigen::VectorXd u_try = u + step * p;
      TransformedEval trial = eval_transformed(objective, u_try, transforms);
      const bool armijo_ok =
          trial.value <= cur.value + options.armijo_c1 * step * slope;
      const bool polish_ok = polish && trial.value <= cur.value + f_noise &&
                             trial.grad.norm() <= 0.9 * cur.grad.norm();
      if (std::isfinite(trial.value) && (armijo_ok || polish_ok)) {
        u = u_try;
        cur = std::move(trial);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++report.iterations;
    if (!accepted) {
      break;
    }
  }

  report.gradient_norm = cur.grad.norm();
  if (report.gradient_norm <= options.tol_g) {
    report.converged = true;
  }
  report.argmin = cur.x;
  report.objective = cur.value;
  report.constraint_active.resize(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) {
    report.constraint_active[static_cast<std::size_t>(k)] =
        boundary_active(transforms[static_cast<std::size_t>(k)], cur.x[k]);
  }
  return report;
}

Eigen::VectorXd solve_linear_lsq(const LinearLSQProblem& problem) {
  const Eigen::Index n = problem.design.rows();
  const Eigen::Index k = problem.design.cols();
  if (problem.response.size() != n || problem.weights.size() != n) {
    throw std::invalid_argument("least-squares dimensions disagree");
  }
  if (!problem.weights.allFinite() || (problem.weights.array() < 0.0).any()) {
    throw std::invalid_argument("least-squares weights must be finite and nonnegative");
  }
  const Eigen::VectorXd sw = problem.weights.cwiseSqrt();
  const Eigen::MatrixXd scaled_design = sw.asDiagonal() * problem.design;
  const Eigen::VectorXd scaled_response = sw.cwiseProduct(problem.response);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled_design);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    throw SingularSystem("weighted least-squares design is rank deficient");
  }
  return qr.solve(scaled_response);
}

double check_gradient(const Objective& objective, const Eigen::VectorXd& point,
                      double h) {
  ObjectiveEval at = objective(point);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    Eigen::VectorXd hi = point;
    Eigen::VectorXd lo = point;
    hi[k] += h;
    lo[k] -= h;
    const double fd = (objective(hi).value - objective(lo).value) / (2.0 * h);
    const double denom = std::max(1.0, std::abs(at.grad[k]));
    worst = std::max(worst, std::abs(fd - at.grad[k]) / denom);
  }
  return worst;
}

}  // namespace nhar
