#pragma once

#include <Eigen/Dense>
#include <optional>

#include "nhar/cls.hpp"
#include "nhar/model.hpp"
#include "nhar/noise.hpp"
#include "nhar/optimize.hpp"

namespace nhar {

// Conditional maximum likelihood: maximize
//   L_n(psi) = sum_i { -log sigma(theta; Z_{i-1}) + log f(eps_i(psi)) },
//   eps_i(psi) = [X_i - m(rho; Z_{i-1})] / sigma(theta; Z_{i-1}),
// over psi = (rho, theta) via Newton steps on Q_n = -L_n with the analytic
// score and Hessian, and estimate the limit covariance of
// sqrt(n)(psi_hat - psi0) by the sandwich J^{-1} Lambda J^{-1}.

struct CmlOptions {
  bool with_covariance = true;
  /// Assemble Lambda_hat from residual sample averages of the score
  /// functionals instead of the noise family's exact integrals
  /// (misspecification studies).
  bool empirical_integrals = false;
  /// Start point; defaults to the two-step least-squares fit, nudged strictly
  /// inside the feasible region.
  std::optional<ParamVector> init;
  OptimOptions optim;
};

/// Conditional log-likelihood at psi (must lie in Psi). Throws
/// UnsupportedOperation for sampling-only noise families. Volatility floor
/// hits are surfaced as a warning by fit_cml, not here.
double log_likelihood(const ParamVector& psi, const SeriesWindow& series,
                      const ModelSpec& spec, const NoiseModel& noise);

/// Gradient of log_likelihood in (rho, theta) order, length I+J:
///   d/d rho   = sum sigma^{-1} phi_f(eps) grad_m,
///   d/d theta = sum sigma^{-1} (eps phi_f(eps) - 1) grad_sigma.
Eigen::VectorXd score(const ParamVector& psi, const SeriesWindow& series,
                      const ModelSpec& spec, const NoiseModel& noise);

/// Hessian of Q_n = -log_likelihood, (I+J)x(I+J), assembled from the analytic
/// second derivatives.
Eigen::MatrixXd q_n_hessian(const ParamVector& psi, const SeriesWindow& series,
                            const ModelSpec& spec, const NoiseModel& noise);

/// Newton maximization of L_n. Positivity/interval constraints are enforced
/// by coordinate transforms (theta_0 via log; arch theta_j via logit on
/// [0, 1-1e-6], the open-unit-interval restriction of the estimating
/// equations). Non-convergence is reported, not thrown; a solution pinned to
/// a constraint sets constraint_active.
EstimationResult fit_cml(const SeriesWindow& series, const ModelSpec& spec,
                         const NoiseModel& noise,
                         const CmlOptions& options = CmlOptions{});

/// Observed information (1/n) Hessian of Q_n at psi_hat, Lambda_hat from the
/// score-moment displays, and their sandwich. Raises SingularInformation if
/// the information cannot be inverted.
CmlCovariance estimate_cml_covariance(const SeriesWindow& series,
                                      const ParamVector& psi_hat,
                                      const ModelSpec& spec, const NoiseModel& noise,
                                      bool empirical_integrals = false);

}  // namespace nhar
