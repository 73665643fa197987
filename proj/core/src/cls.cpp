#include "nhar/cls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "nhar/errors.hpp"

namespace nhar {

namespace {

void check_rho_dim(const ModelSpec& spec, const Eigen::VectorXd& rho) {
  if (rho.size() != spec.mean_param_count()) {
    throw std::invalid_argument("rho has wrong dimension");
  }
}

// Inverse of a small (near-)symmetric information block, or
// SingularInformation. Zero-dimensional blocks invert to themselves.
Eigen::MatrixXd invert_information(const Eigen::MatrixXd& block, const char* name) {
  if (block.rows() == 0) {
    return block;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(block);
  if (!lu.isInvertible()) {
    throw SingularInformation(std::string(name) + " block is numerically singular");
  }
  return lu.inverse();
}

}  // namespace

double u_n(const Eigen::VectorXd& rho, const SeriesWindow& series,
           const ModelSpec& spec, const WeightSpec& weights) {
  check_rho_dim(spec, rho);
  series.require_lags(spec.lag_order());
  double total = 0.0;
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double lam = weights.lambda_at(z);
    const double r = series.x(i) - mean_value(spec.mean, rho, z);
    total += r * r * lam * lam;
  }
  return total;
}

Eigen::VectorXd u_n_gradient(const Eigen::VectorXd& rho, const SeriesWindow& series,
                             const ModelSpec& spec, const WeightSpec& weights) {
  check_rho_dim(spec, rho);
  series.require_lags(spec.lag_order());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(rho.size());
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double lam = weights.lambda_at(z);
    const double r = series.x(i) - mean_value(spec.mean, rho, z);
    grad.noalias() += (-2.0 * lam * lam * r) * mean_gradient(spec.mean, rho, z);
  }
  return grad;
}

Eigen::MatrixXd u_n_hessian(const Eigen::VectorXd& rho, const SeriesWindow& series,
                            const ModelSpec& spec, const WeightSpec& weights) {
  check_rho_dim(spec, rho);
  series.require_lags(spec.lag_order());
  const Eigen::Index d = rho.size();
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double lam = weights.lambda_at(z);
    const double w = 2.0 * lam * lam;
    const double r = series.x(i) - mean_value(spec.mean, rho, z);
    const Eigen::VectorXd g = mean_gradient(spec.mean, rho, z);
    hess.noalias() += w * (g * g.transpose());
    hess.noalias() -= (w * r) * mean_hessian(spec.mean, rho, z);
  }
  return hess;
}

double s_n(const ParamVector& psi, const SeriesWindow& series,
           const ModelSpec& spec, const WeightSpec& weights) {
  check_rho_dim(spec, psi.rho);
  series.require_lags(spec.lag_order());
  double total = 0.0;
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double gam = weights.gamma_at(z);
    const double r = series.x(i) - mean_value(spec.mean, psi.rho, z);
    const double sig = vol_value(spec.vol, psi.theta, z);
    const double d = r * r - sig * sig;
    total += d * d * gam * gam;
  }
  return total;
}

Eigen::VectorXd s_n_theta_gradient(const ParamVector& psi, const SeriesWindow& series,
                                   const ModelSpec& spec, const WeightSpec& weights) {
  check_rho_dim(spec, psi.rho);
  series.require_lags(spec.lag_order());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(psi.theta.size());
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double gam = weights.gamma_at(z);
    const double r = series.x(i) - mean_value(spec.mean, psi.rho, z);
    const double sig = vol_value(spec.vol, psi.theta, z);
    const double d = r * r - sig * sig;
    grad.noalias() +=
        (-4.0 * gam * gam * sig * d) * vol_gradient(spec.vol, psi.theta, z);
  }
  return grad;
}

Eigen::MatrixXd s_n_theta_hessian(const ParamVector& psi, const SeriesWindow& series,
                                  const ModelSpec& spec, const WeightSpec& weights) {
  check_rho_dim(spec, psi.rho);
  series.require_lags(spec.lag_order());
  const Eigen::Index d = psi.theta.size();
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double gam = weights.gamma_at(z);
    const double w = gam * gam;
    const double r = series.x(i) - mean_value(spec.mean, psi.rho, z);
    const double sig = vol_value(spec.vol, psi.theta, z);
    const double dev = r * r - sig * sig;
    const Eigen::VectorXd g = vol_gradient(spec.vol, psi.theta, z);
    const Eigen::MatrixXd outer = g * g.transpose();
    hess.noalias() += (8.0 * w * sig * sig) * outer;
    hess.noalias() -= (4.0 * w * dev) * outer;
    hess.noalias() -= (4.0 * w * dev * sig) * vol_hessian(spec.vol, psi.theta, z);
  }
  return hess;
}

namespace {

// The built-in mean families are linear in rho, so the step-1 design row for
// observation i is the (rho-independent) mean gradient.
Eigen::VectorXd fit_mean_closed_form(const SeriesWindow& series, const ModelSpec& spec,
                                     const WeightSpec& weights) {
  const int ic = spec.mean_param_count();
  const int n = series.n();
  LinearLSQProblem problem;
  problem.design.resize(n, ic);
  problem.response.resize(n);
  problem.weights.resize(n);
  const Eigen::VectorXd rho0 = Eigen::VectorXd::Zero(ic);
  for (int i = 1; i <= n; ++i) {
    const LagView z = series.z(i);
    problem.design.row(i - 1) = mean_gradient(spec.mean, rho0, z).transpose();
    problem.response[i - 1] = series.x(i);
    const double lam = weights.lambda_at(z);
    problem.weights[i - 1] = lam * lam;
  }
  return solve_linear_lsq(problem);
}

// Step-2 closed form: regress squared step-1 residuals on the gradient of
// sigma^2 in theta (constant: intercept only; arch: (1, z_1^2, ..., z_q^2)).
Eigen::VectorXd fit_vol_closed_form(const SeriesWindow& series, const ModelSpec& spec,
                                    const WeightSpec& weights,
                                    const Eigen::VectorXd& rho_hat) {
  const int jc = spec.vol_param_count();
  const int n = series.n();
  LinearLSQProblem problem;
  problem.design.resize(n, jc);
  problem.response.resize(n);
  problem.weights.resize(n);
  for (int i = 1; i <= n; ++i) {
    const LagView z = series.z(i);
    Eigen::VectorXd row(jc);
    row[0] = 1.0;
    if (spec.vol.family == VolFamily::arch) {
      for (int k = 1; k <= spec.vol.q; ++k) {
        const double zk = z.lag(k);
        row[k] = zk * zk;
      }
    }
    problem.design.row(i - 1) = row.transpose();
    const double r = series.x(i) - mean_value(spec.mean, rho_hat, z);
    problem.response[i - 1] = r * r;
    const double gam = weights.gamma_at(z);
    problem.weights[i - 1] = gam * gam;
  }
  return solve_linear_lsq(problem);
}

Eigen::VectorXd default_theta_init(const SeriesWindow& series, const ModelSpec& spec,
                                   const Eigen::VectorXd& rho_hat) {
  double mean_sq = 0.0;
  for (int i = 1; i <= series.n(); ++i) {
    const double r = series.x(i) - mean_value(spec.mean, rho_hat, series.z(i));
    mean_sq += r * r;
  }
  mean_sq = std::max(mean_sq / series.n(), 1e-6);
  Eigen::VectorXd theta(spec.vol_param_count());
  switch (spec.vol.family) {
    case VolFamily::constant:
      theta[0] = mean_sq;
      break;
    case VolFamily::arch:
      theta[0] = 0.5 * mean_sq;
      for (int k = 1; k <= spec.vol.q; ++k) {
        theta[k] = 0.4 / spec.vol.q;
      }
      break;
    case VolFamily::garch11_trunc:
      theta[0] = 0.25 * mean_sq;  // c
      theta[1] = 0.3;             // a
      theta[2] = 0.3;             // b
      break;
  }
  return theta;
}

std::vector<CoordinateTransform> theta_transforms(const VolSpec& vol) {
  std::vector<CoordinateTransform> tf;
  switch (vol.family) {
    case VolFamily::constant:
      tf.push_back(CoordinateTransform::log_positive());
      break;
    case VolFamily::arch:
      tf.push_back(CoordinateTransform::log_positive());
      for (int k = 1; k <= vol.q; ++k) {
        tf.push_back(CoordinateTransform::log_positive());
      }
      break;
    case VolFamily::garch11_trunc:
      tf.push_back(CoordinateTransform::log_positive());                 // c > 0
      tf.push_back(CoordinateTransform::logit_interval(0.0, 1.0 - 1e-6));  // a
      tf.push_back(CoordinateTransform::log_positive());                 // b > 0
      break;
  }
  return tf;
}

constexpr double kThetaZeroFloor = 1e-8;

}  // namespace

EstimationResult fit_cls(const SeriesWindow& series, const ModelSpec& spec,
                         const WeightSpec& weights, const FitOptions& options) {
  spec.validate();
  series.require_lags(spec.lag_order());
  const int ic = spec.mean_param_count();
  const int jc = spec.vol_param_count();
  if (series.n() <= ic + jc) {
    throw std::invalid_argument("series too short: need n > I + J");
  }
  const bool vol_closed_form = spec.vol.family != VolFamily::garch11_trunc;
  if (options.path == ClsPath::closed_form && !vol_closed_form) {
    throw std::invalid_argument(
        "garch11_trunc volatility has no closed-form least-squares step");
  }
  const bool use_closed_mean = options.path != ClsPath::iterative;
  const bool use_closed_vol = options.path != ClsPath::iterative && vol_closed_form;

  EstimationResult result;
  result.method = Method::cls;

  // Step 1: mean parameters.
  Eigen::VectorXd rho_hat;
  if (ic == 0) {
    rho_hat.resize(0);
  } else if (use_closed_mean) {
    rho_hat = fit_mean_closed_form(series, spec, weights);
  } else {
    Eigen::VectorXd rho_init =
        options.init ? options.init->rho : Eigen::VectorXd::Zero(ic);
    check_rho_dim(spec, rho_init);
    Objective mean_objective = [&](const Eigen::VectorXd& rho) {
      return ObjectiveEval{u_n(rho, series, spec, weights),
                           u_n_gradient(rho, series, spec, weights),
                           u_n_hessian(rho, series, spec, weights)};
    };
    const std::vector<CoordinateTransform> tf(static_cast<std::size_t>(ic),
                                              CoordinateTransform::identity());
    OptimReport report = minimize(mean_objective, rho_init, tf, options.optim);
    rho_hat = report.argmin;
    result.converged = result.converged && report.converged;
    result.diagnostics.push_back(std::move(report));
  }

  // Step 2: volatility parameters, mean held fixed.
  Eigen::VectorXd theta_raw;
  std::vector<bool> clamped(static_cast<std::size_t>(jc), false);
  if (use_closed_vol) {
    theta_raw = fit_vol_closed_form(series, spec, weights, rho_hat);
  } else {
    Eigen::VectorXd theta_init =
        options.init ? options.init->theta : default_theta_init(series, spec, rho_hat);
    if (theta_init.size() != jc) {
      throw std::invalid_argument("theta init has wrong dimension");
    }
    Objective vol_objective = [&](const Eigen::VectorXd& theta) {
      ParamVector psi{rho_hat, theta};
      try {
        return ObjectiveEval{s_n(psi, series, spec, weights),
                             s_n_theta_gradient(psi, series, spec, weights),
                             s_n_theta_hessian(psi, series, spec, weights)};
      } catch (const std::invalid_argument&) {
        // The coordinate transforms keep each component feasible but cannot
        // express the joint garch constraint a + b < 1; treat such probes as
        // infinitely bad so the line search backs off.
        return ObjectiveEval{std::numeric_limits<double>::infinity(),
                             Eigen::VectorXd::Zero(theta.size()),
                             Eigen::MatrixXd::Zero(theta.size(), theta.size())};
      }
    };
    OptimReport report =
        minimize(vol_objective, theta_init, theta_transforms(spec.vol), options.optim);
    theta_raw = report.argmin;
    for (int k = 0; k < jc; ++k) {
      clamped[static_cast<std::size_t>(k)] =
          report.constraint_active[static_cast<std::size_t>(k)];
    }
    result.converged = result.converged && report.converged;
    result.diagnostics.push_back(std::move(report));
  }

  // Clamp into Psi; finite-sample regression estimates can fall outside.
  Eigen::VectorXd theta_hat = theta_raw;
  if (theta_hat[0] < kThetaZeroFloor) {
    theta_hat[0] = kThetaZeroFloor;
    clamped[0] = true;
  }
  for (int k = 1; k < jc && spec.vol.family == VolFamily::arch; ++k) {
    if (theta_hat[k] < 0.0) {
      theta_hat[k] = 0.0;
      clamped[static_cast<std::size_t>(k)] = true;
    }
  }
  if (spec.vol.family == VolFamily::garch11_trunc) {
    // Joint stationarity bound: pull b back if the fit drifted past it.
    if (theta_hat[1] + theta_hat[2] >= 1.0) {
      theta_hat[2] = std::max(0.0, 1.0 - theta_hat[1] - 1e-9);
      clamped[2] = true;
    }
  }

  result.psi_hat = ParamVector{rho_hat, theta_hat};
  result.psi_raw = ParamVector{rho_hat, theta_raw};
  result.theta_clamped = clamped;
  result.constraint_active =
      std::any_of(clamped.begin(), clamped.end(), [](bool b) { return b; });
  require_in_param_space(spec, result.psi_hat);
  result.objective = s_n(result.psi_hat, series, spec, weights);
  if (options.with_covariance) {
    result.cls_covariance = estimate_delta(series, result.psi_hat, spec, weights);
  }
  return result;
}

CovarianceEstimate estimate_delta(const SeriesWindow& series, const ParamVector& psi_hat,
                                  const ModelSpec& spec, const WeightSpec& weights) {
  spec.validate();
  require_in_param_space(spec, psi_hat);
  series.require_lags(spec.lag_order());
  const int n = series.n();
  const Eigen::Index ic = spec.mean_param_count();
  const Eigen::Index jc = spec.vol_param_count();

  CovarianceEstimate out;
  out.phi11_hat = u_n_hessian(psi_hat.rho, series, spec, weights) / n;
  out.phi22_hat = s_n_theta_hessian(psi_hat, series, spec, weights) / n;

  Eigen::MatrixXd mid11 = Eigen::MatrixXd::Zero(ic, ic);
  Eigen::MatrixXd mid12 = Eigen::MatrixXd::Zero(ic, jc);
  Eigen::MatrixXd mid22 = Eigen::MatrixXd::Zero(jc, jc);
  double eps3 = 0.0;         // mean of eps^3
  double eps3_score = 0.0;   // mean of eps(eps^2 - 1), the cross-block factor
  double eps4c = 0.0;        // mean of (eps^2 - 1)^2
  for (int i = 1; i <= n; ++i) {
    const LagView z = series.z(i);
    const double lam2 = [&] {
      const double l = weights.lambda_at(z);
      return l * l;
    }();
    const double gam2 = [&] {
      const double g = weights.gamma_at(z);
      return g * g;
    }();
    const double sig = vol_value(spec.vol, psi_hat.theta, z);
    const double sig2 = sig * sig;
    const Eigen::VectorXd gm = mean_gradient(spec.mean, psi_hat.rho, z);
    const Eigen::VectorXd gs = vol_gradient(spec.vol, psi_hat.theta, z);
    mid11.noalias() += (lam2 * lam2 * sig2) * (gm * gm.transpose());
    mid12.noalias() += (lam2 * gam2 * sig2 * sig2) * (gm * gs.transpose());
    mid22.noalias() += (gam2 * gam2 * sig2 * sig2 * sig2) * (gs * gs.transpose());
    const double eps = (series.x(i) - mean_value(spec.mean, psi_hat.rho, z)) / sig;
    eps3 += eps * eps * eps;
    eps3_score += eps * (eps * eps - 1.0);
    eps4c += (eps * eps - 1.0) * (eps * eps - 1.0);
  }
  mid11 *= 4.0 / n;
  mid12 *= 8.0 / n;
  mid22 *= 16.0 / n;
  eps3 /= n;
  eps3_score /= n;
  eps4c /= n;
  out.eps_third_hat = eps3;
  out.eps_fourth_central_hat = eps4c;

  const Eigen::MatrixXd inv11 = invert_information(out.phi11_hat, "Phi11");
  const Eigen::MatrixXd inv22 = invert_information(out.phi22_hat, "Phi22");
  Eigen::MatrixXd d11 = inv11 * mid11 * inv11;
  Eigen::MatrixXd d22 = (inv22 * mid22 * inv22) * eps4c;
  d11 = 0.5 * (d11 + d11.transpose()).eval();
  d22 = 0.5 * (d22 + d22.transpose()).eval();
  const Eigen::MatrixXd d12 = (inv11 * mid12 * inv22) * eps3_score;

  out.delta_hat.resize(ic + jc, ic + jc);
  out.delta_hat.topLeftCorner(ic, ic) = d11;
  out.delta_hat.topRightCorner(ic, jc) = d12;
  out.delta_hat.bottomLeftCorner(jc, ic) = d12.transpose();
  out.delta_hat.bottomRightCorner(jc, jc) = d22;
  return out;
}

}  // namespace nhar
