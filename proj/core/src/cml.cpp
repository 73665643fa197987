#include "nhar/cml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "nhar/errors.hpp"

namespace nhar {

namespace {

void check_psi_dims(const ModelSpec& spec, const ParamVector& psi) {
  if (psi.rho.size() != spec.mean_param_count() ||
      psi.theta.size() != spec.vol_param_count()) {
    throw std::invalid_argument("psi has wrong dimensions");
  }
}

Eigen::VectorXd stack(const ParamVector& psi) {
  Eigen::VectorXd v(psi.rho.size() + psi.theta.size());
  v << psi.rho, psi.theta;
  return v;
}

ParamVector unstack(const Eigen::VectorXd& v, const ModelSpec& spec) {
  const Eigen::Index ic = spec.mean_param_count();
  const Eigen::Index jc = spec.vol_param_count();
  return ParamVector{v.head(ic), v.tail(jc)};
}

void require_cml_noise(const NoiseModel& noise) {
  if (!noise.cml_eligible()) {
    throw UnsupportedOperation(
        "noise family is sampling-only: no smooth score for likelihood fitting");
  }
}

}  // namespace

double log_likelihood(const ParamVector& psi, const SeriesWindow& series,
                      const ModelSpec& spec, const NoiseModel& noise) {
  check_psi_dims(spec, psi);
  require_cml_noise(noise);
  series.require_lags(spec.lag_order());
  double total = 0.0;
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double sig = vol_value(spec.vol, psi.theta, z);
    const double eps = (series.x(i) - mean_value(spec.mean, psi.rho, z)) / sig;
    total += -std::log(sig) + noise.log_density(eps);
  }
  return total;
}

Eigen::VectorXd score(const ParamVector& psi, const SeriesWindow& series,
                      const ModelSpec& spec, const NoiseModel& noise) {
  check_psi_dims(spec, psi);
  require_cml_noise(noise);
  series.require_lags(spec.lag_order());
  const Eigen::Index ic = spec.mean_param_count();
  const Eigen::Index jc = spec.vol_param_count();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(ic + jc);
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double sig = vol_value(spec.vol, psi.theta, z);
    const double eps = (series.x(i) - mean_value(spec.mean, psi.rho, z)) / sig;
    const double xi = noise.xi(eps);
    grad.head(ic).noalias() += (xi / sig) * mean_gradient(spec.mean, psi.rho, z);
    grad.tail(jc).noalias() +=
        ((noise.zeta(eps) - 1.0) / sig) * vol_gradient(spec.vol, psi.theta, z);
  }
  return grad;
}

Eigen::MatrixXd q_n_hessian(const ParamVector& psi, const SeriesWindow& series,
                            const ModelSpec& spec, const NoiseModel& noise) {
  check_psi_dims(spec, psi);
  require_cml_noise(noise);
  series.require_lags(spec.lag_order());
  const Eigen::Index ic = spec.mean_param_count();
  const Eigen::Index jc = spec.vol_param_count();
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(ic + jc, ic + jc);
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double sig = vol_value(spec.vol, psi.theta, z);
    const double inv = 1.0 / sig;
    const double inv2 = inv * inv;
    const double eps = (series.x(i) - mean_value(spec.mean, psi.rho, z)) * inv;
    const double xi = noise.xi(eps);
    const double xi_dot = noise.xi_dot(eps);
    const double zeta = eps * xi;
    const double zeta_dot = eps * xi_dot;
    const double zeta_ddot = zeta + eps * zeta_dot;
    const Eigen::VectorXd gm = mean_gradient(spec.mean, psi.rho, z);
    const Eigen::VectorXd gs = vol_gradient(spec.vol, psi.theta, z);
    // d2Q/drho2 = sigma^{-2} xi_dot gm gm' - sigma^{-1} xi hess_m
    hess.topLeftCorner(ic, ic).noalias() += (inv2 * xi_dot) * (gm * gm.transpose());
    hess.topLeftCorner(ic, ic).noalias() -=
        (inv * xi) * mean_hessian(spec.mean, psi.rho, z);
    // d2Q/drho dtheta = sigma^{-2} (xi + zeta_dot) gm gs'
    hess.topRightCorner(ic, jc).noalias() +=
        (inv2 * (xi + zeta_dot)) * (gm * gs.transpose());
    // d2Q/dtheta2 = (zeta-1)(sigma^{-2} gs gs' - sigma^{-1} hess_sigma)
    //             + sigma^{-2} zeta_ddot gs gs'
    hess.bottomRightCorner(jc, jc).noalias() +=
        (inv2 * (zeta - 1.0 + zeta_ddot)) * (gs * gs.transpose());
    hess.bottomRightCorner(jc, jc).noalias() -=
        (inv * (zeta - 1.0)) * vol_hessian(spec.vol, psi.theta, z);
  }
  hess.bottomLeftCorner(jc, ic) = hess.topRightCorner(ic, jc).transpose();
  return hess;
}

namespace {

std::vector<CoordinateTransform> cml_transforms(const ModelSpec& spec) {
  std::vector<CoordinateTransform> tf(
      static_cast<std::size_t>(spec.mean_param_count()),
      CoordinateTransform::identity());
  switch (spec.vol.family) {
    case VolFamily::constant:
      tf.push_back(CoordinateTransform::log_positive());
      break;
    case VolFamily::arch:
      tf.push_back(CoordinateTransform::log_positive());
      for (int k = 1; k <= spec.vol.q; ++k) {
        tf.push_back(CoordinateTransform::logit_interval(0.0, 1.0 - 1e-6));
      }
      break;
    case VolFamily::garch11_trunc:
      tf.push_back(CoordinateTransform::log_positive());
      tf.push_back(CoordinateTransform::logit_interval(0.0, 1.0 - 1e-6));
      tf.push_back(CoordinateTransform::log_positive());
      break;
  }
  return tf;
}

// The coordinate transforms need a start strictly inside every bound; the
// least-squares initializer can sit exactly on one (clamped theta).
Eigen::VectorXd nudge_theta_interior(const VolSpec& vol, Eigen::VectorXd theta) {
  theta[0] = std::max(theta[0], 1e-6);
  if (vol.family == VolFamily::arch) {
    for (int k = 1; k <= vol.q; ++k) {
      theta[k] = std::clamp(theta[k], 1e-6, 1.0 - 2e-6);
    }
  } else if (vol.family == VolFamily::garch11_trunc) {
    theta[1] = std::clamp(theta[1], 1e-6, 1.0 - 2e-6);
    theta[2] = std::max(theta[2], 1e-6);
  }
  return theta;
}

}  // namespace

EstimationResult fit_cml(const SeriesWindow& series, const ModelSpec& spec,
                         const NoiseModel& noise, const CmlOptions& options) {
  spec.validate();
  require_cml_noise(noise);
  series.require_lags(spec.lag_order());
  const int ic = spec.mean_param_count();
  const int jc = spec.vol_param_count();
  if (series.n() <= ic + jc) {
    throw std::invalid_argument("series too short: need n > I + J");
  }

  ParamVector init;
  if (options.init) {
    init = *options.init;
    check_psi_dims(spec, init);
  } else {
    FitOptions cls_options;
    cls_options.with_covariance = false;
    init = fit_cls(series, spec, WeightSpec{}, cls_options).psi_hat;
  }
  init.theta = nudge_theta_interior(spec.vol, init.theta);

  Objective objective = [&](const Eigen::VectorXd& v) {
    const ParamVector psi = unstack(v, spec);
    try {
      return ObjectiveEval{-log_likelihood(psi, series, spec, noise),
                           -score(psi, series, spec, noise),
                           q_n_hessian(psi, series, spec, noise)};
    } catch (const std::invalid_argument&) {
      // Unreachable joint-constraint probes (garch a + b >= 1): infinitely bad.
      return ObjectiveEval{std::numeric_limits<double>::infinity(),
                           Eigen::VectorXd::Zero(v.size()),
                           Eigen::MatrixXd::Zero(v.size(), v.size())};
    }
  };

  OptimReport report =
      minimize(objective, stack(init), cml_transforms(spec), options.optim);

  EstimationResult result;
  result.method = Method::cml;
  result.psi_hat = unstack(report.argmin, spec);
  result.converged = report.converged;
  result.objective = report.objective;
  result.theta_clamped.assign(static_cast<std::size_t>(jc), false);
  for (int k = 0; k < jc; ++k) {
    result.theta_clamped[static_cast<std::size_t>(k)] =
        report.constraint_active[static_cast<std::size_t>(ic + k)];
  }
  result.constraint_active = std::any_of(result.theta_clamped.begin(),
                                         result.theta_clamped.end(),
                                         [](bool b) { return b; });
  result.diagnostics.push_back(std::move(report));
  result.psi_raw = result.psi_hat;
  require_in_param_space(spec, result.psi_hat);

  int floor_hits = 0;
  for (int i = 1; i <= series.n(); ++i) {
    if (vol_value(spec.vol, result.psi_hat.theta, series.z(i)) <= kVolFloor) {
      ++floor_hits;
    }
  }
  if (floor_hits > series.n() / 100) {
    result.warnings.push_back("degenerate volatility: sigma evaluated at its floor on " +
                              std::to_string(floor_hits) + " of " +
                              std::to_string(series.n()) + " observations");
  }

  if (options.with_covariance) {
    result.cml_covariance = estimate_cml_covariance(
        series, result.psi_hat, spec, noise, options.empirical_integrals);
  }
  return result;
}

CmlCovariance estimate_cml_covariance(const SeriesWindow& series,
                                      const ParamVector& psi_hat,
                                      const ModelSpec& spec, const NoiseModel& noise,
                                      bool empirical_integrals) {
  spec.validate();
  require_cml_noise(noise);
  check_psi_dims(spec, psi_hat);
  require_in_param_space(spec, psi_hat);
  series.require_lags(spec.lag_order());
  const int n = series.n();
  const Eigen::Index ic = spec.mean_param_count();
  const Eigen::Index jc = spec.vol_param_count();

  CmlCovariance out;
  out.info_hat = q_n_hessian(psi_hat, series, spec, noise) / n;

  Eigen::MatrixXd a_mm = Eigen::MatrixXd::Zero(ic, ic);
  Eigen::MatrixXd a_ms = Eigen::MatrixXd::Zero(ic, jc);
  Eigen::MatrixXd a_ss = Eigen::MatrixXd::Zero(jc, jc);
  double c11 = 0.0, c12 = 0.0, c22 = 0.0;
  for (int i = 1; i <= n; ++i) {
    const LagView z = series.z(i);
    const double sig = vol_value(spec.vol, psi_hat.theta, z);
    const double inv2 = 1.0 / (sig * sig);
    const Eigen::VectorXd gm = mean_gradient(spec.mean, psi_hat.rho, z);
    const Eigen::VectorXd gs = vol_gradient(spec.vol, psi_hat.theta, z);
    a_mm.noalias() += inv2 * (gm * gm.transpose());
    a_ms.noalias() += inv2 * (gm * gs.transpose());
    a_ss.noalias() += inv2 * (gs * gs.transpose());
    if (empirical_integrals) {
      const double eps = (series.x(i) - mean_value(spec.mean, psi_hat.rho, z)) / sig;
      const double xi = noise.xi(eps);
      const double zeta = eps * xi;
      c11 += xi * xi;
      c12 += xi * (zeta - 1.0);
      c22 += (zeta - 1.0) * (zeta - 1.0);
    }
  }
  a_mm /= n;
  a_ms /= n;
  a_ss /= n;
  if (empirical_integrals) {
    c11 /= n;
    c12 /= n;
    c22 /= n;
  } else {
    const NoiseMoments& mom = noise.moments();
    c11 = mom.int_phi_sq;
    c12 = mom.int_lambda12;
    c22 = mom.int_lambda22;
  }

  out.lambda_hat.resize(ic + jc, ic + jc);
  out.lambda_hat.topLeftCorner(ic, ic) = c11 * a_mm;
  out.lambda_hat.topRightCorner(ic, jc) = c12 * a_ms;
  out.lambda_hat.bottomLeftCorner(jc, ic) = (c12 * a_ms).transpose();
  out.lambda_hat.bottomRightCorner(jc, jc) = c22 * a_ss;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(out.info_hat);
  if (out.info_hat.rows() > 0 && !lu.isInvertible()) {
    throw SingularInformation("observed information is numerically singular");
  }
  const Eigen::MatrixXd half = lu.solve(out.lambda_hat);
  Eigen::MatrixXd sandwich = lu.solve(half.transpose()).transpose();
  out.sandwich = 0.5 * (sandwich + sandwich.transpose());
  return out;
}

}  // namespace nhar
