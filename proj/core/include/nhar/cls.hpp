#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nhar/model.hpp"
#include "nhar/optimize.hpp"

namespace nhar {

// Two-step weighted conditional least squares: step 1 fits the mean by
// minimizing u_n over rho, step 2 fixes rho and fits the volatility by
// minimizing s_n over theta, and the asymptotic covariance of
// sqrt(n)(psi_hat - psi0) is estimated by plugging fitted values into the
// limit displays.

/// Bounded weight functions applied per observation; a null function means
/// the constant weight 1 (the choice used by every shipped experiment).
struct WeightSpec {
  using WeightFn = std::function<double(const LagView&)>;
  WeightFn lambda;  ///< mean-step weight lambda(z)
  WeightFn gamma;   ///< volatility-step weight gamma(z)

  double lambda_at(const LagView& z) const { return lambda ? lambda(z) : 1.0; }
  double gamma_at(const LagView& z) const { return gamma ? gamma(z) : 1.0; }
};

/// Plug-in estimate of the limiting covariance Delta of the two-step
/// estimator, with the Hessian normalizers and residual moments kept for
/// inspection. delta_hat is (I+J)x(I+J), ordered (rho, theta).
struct CovarianceEstimate {
  Eigen::MatrixXd phi11_hat;  ///< (1/n) d^2 u_n / d rho^2 at rho_hat
  Eigen::MatrixXd phi22_hat;  ///< (1/n) d^2 s_n / d theta^2 at psi_hat
  Eigen::MatrixXd delta_hat;
  double eps_third_hat = 0.0;           ///< mean of eps_hat^3
  double eps_fourth_central_hat = 0.0;  ///< mean of (eps_hat^2 - 1)^2
};

/// Likelihood-method covariance detail: empirical Hessian J of the negative
/// log-likelihood (per observation), outer-product/moment matrix Lambda, and
/// the sandwich J^{-1} Lambda J^{-1} estimating the limit covariance of
/// sqrt(n)(psi_hat - psi0).
struct CmlCovariance {
  Eigen::MatrixXd info_hat;    ///< (1/n) Hessian of the negative log-likelihood
  Eigen::MatrixXd lambda_hat;  ///< score outer-product limit
  Eigen::MatrixXd sandwich;    ///< info_hat^{-1} lambda_hat info_hat^{-1}
};

enum class Method { cls, cml };

/// Which fitting route to take. Every built-in mean family is linear in rho
/// and the constant/arch volatilities are linear in theta, so those steps
/// have closed-form weighted least-squares solutions; the iterative route
/// runs the Newton minimizer on the same objectives and exists as an
/// independent cross-check (and as the only route for garch11_trunc step 2).
enum class ClsPath { automatic, closed_form, iterative };

struct FitOptions {
  ClsPath path = ClsPath::automatic;
  bool with_covariance = true;
  /// Start for iterative routes; defaults to zeros (mean) and a
  /// moment-matched interior point (volatility).
  std::optional<ParamVector> init;
  OptimOptions optim;
};

struct EstimationResult {
  Method method = Method::cls;
  /// Final estimate, always inside the parameter space Psi.
  ParamVector psi_hat;
  /// Step-2 estimate before the clamp into Psi. Finite-sample least-squares
  /// volatility fits can go (slightly) negative; sampling-distribution
  /// summaries aggregate this raw value so the clamp does not bias them.
  ParamVector psi_raw;
  /// Objective at psi_hat: s_n for cls, negative log-likelihood for cml.
  double objective = 0.0;
  /// Per-coordinate flags: theta component was clamped / sits on a bound.
  std::vector<bool> theta_clamped;
  bool constraint_active = false;  ///< any theta_clamped flag set
  bool converged = true;           ///< false only if an iterative step failed
  std::optional<CovarianceEstimate> cls_covariance;
  std::optional<CmlCovariance> cml_covariance;
  std::vector<OptimReport> diagnostics;  ///< reports from iterative steps
  std::vector<std::string> warnings;     ///< e.g. volatility floored on many points
};

/// Mean-step objective: sum over i of [X_i - m(rho; Z_{i-1})]^2 lambda^2.
double u_n(const Eigen::VectorXd& rho, const SeriesWindow& series,
           const ModelSpec& spec, const WeightSpec& weights = WeightSpec{});
Eigen::VectorXd u_n_gradient(const Eigen::VectorXd& rho, const SeriesWindow& series,
                             const ModelSpec& spec,
                             const WeightSpec& weights = WeightSpec{});
Eigen::MatrixXd u_n_hessian(const Eigen::VectorXd& rho, const SeriesWindow& series,
                            const ModelSpec& spec,
                            const WeightSpec& weights = WeightSpec{});

/// Volatility-step objective: sum over i of
/// {[X_i - m(rho; Z_{i-1})]^2 - sigma^2(theta; Z_{i-1})}^2 gamma^2.
double s_n(const ParamVector& psi, const SeriesWindow& series,
           const ModelSpec& spec, const WeightSpec& weights = WeightSpec{});
Eigen::VectorXd s_n_theta_gradient(const ParamVector& psi, const SeriesWindow& series,
                                   const ModelSpec& spec,
                                   const WeightSpec& weights = WeightSpec{});
Eigen::MatrixXd s_n_theta_hessian(const ParamVector& psi, const SeriesWindow& series,
                                  const ModelSpec& spec,
                                  const WeightSpec& weights = WeightSpec{});

/// Two-step fit. Requires n > I + J. Degenerate regressors (e.g. an all-zero
/// series) raise SingularSystem; iterative non-convergence is reported in the
/// result, not thrown.
EstimationResult fit_cls(const SeriesWindow& series, const ModelSpec& spec,
                         const WeightSpec& weights = WeightSpec{},
                         const FitOptions& options = FitOptions{});

/// Plug-in covariance at a fitted psi_hat (must lie in Psi). Raises
/// SingularInformation if a Hessian block cannot be inverted.
CovarianceEstimate estimate_delta(const SeriesWindow& series, const ParamVector& psi_hat,
                                  const ModelSpec& spec,
                                  const WeightSpec& weights = WeightSpec{});

}  // namespace nhar
