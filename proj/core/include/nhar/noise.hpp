#pragma once

#include <cstdint>
#include <vector>

#include "nhar/rng.hpp"

namespace nhar {

enum class NoiseFamily { gaussian, laplace, student_t };

/// Moment functionals of the noise density entering the asymptotic covariance
/// matrices: third/fourth moments for the least-squares limit, the score
/// integrals for the likelihood limit.
struct NoiseMoments {
  double third = 0.0;            ///< E[eps^3]
  double fourth_central = 0.0;   ///< E[(eps^2 - 1)^2]
  double int_phi_sq = 0.0;       ///< int phi_f^2 f
  double int_phi_prime = 0.0;    ///< int phi_f' f
  double int_x_phi_sq = 0.0;     ///< int x phi_f^2 f
  double int_sigma22 = 0.0;      ///< int x (phi_f + x phi_f') f
  double int_lambda12 = 0.0;     ///< int phi_f (x phi_f - 1) f
  double int_lambda22 = 0.0;     ///< int (x phi_f - 1)^2 f
};

/// Unit-variance noise family. Immutable after construction; sampling takes
/// the engine explicitly, so one model can serve concurrent replications.
///
/// Laplace is sampling-only: its score sqrt(2)*sign(x) is not differentiable
/// at 0, so density/score queries are a hard error rather than a silent
/// approximation. Student-t requires nu > 4 (finite fourth moment) and is
/// standardized to unit variance: eps = T * sqrt((nu-2)/nu) for T ~ t_nu,
/// giving score phi_f(x) = (nu+1) x / ((nu-2) + x^2).
class NoiseModel {
public:
  static NoiseModel gaussian();
  static NoiseModel laplace();
  /// Throws std::invalid_argument unless nu > 4.
  static NoiseModel student_t(double nu);

  NoiseFamily family() const { return family_; }
  double nu() const { return nu_; }

  /// False for families whose score violates the smoothness assumptions
  /// required by the likelihood theory (laplace).
  bool cml_eligible() const { return family_ != NoiseFamily::laplace; }

  /// One draw. Transforms are explicit (Box-Muller, inverse CDF, Bailey's
  /// polar t) so streams do not depend on the standard library.
  double sample_one(Rng& g) const;

  /// log f(x). Throws UnsupportedOperation for sampling-only families.
  double log_density(double x) const;
  /// Score phi_f(x) = -f'(x)/f(x). Throws UnsupportedOperation for laplace.
  double score_phi(double x) const;
  /// phi_f'(x). Throws UnsupportedOperation for laplace.
  double score_phi_prime(double x) const;

  // Likelihood functionals evaluated at a residual. xi = phi_f(eps),
  // xi_dot = phi_f'(eps), zeta = eps*xi, zeta_dot = eps*xi_dot,
  // zeta_ddot = zeta + eps*zeta_dot.
  double xi(double eps) const { return score_phi(eps); }
  double xi_dot(double eps) const { return score_phi_prime(eps); }
  double zeta(double eps) const { return eps * score_phi(eps); }
  double zeta_dot(double eps) const { return eps * score_phi_prime(eps); }
  double zeta_ddot(double eps) const { return zeta(eps) + eps * zeta_dot(eps); }

  /// Cached moment functionals. Gaussian and Laplace moments are closed-form;
  /// the student-t score integrals are computed once by adaptive quadrature.
  /// Laplace score integrals are NaN (sampling-only family).
  const NoiseMoments& moments() const { return moments_; }

private:
  NoiseModel(NoiseFamily family, double nu);

  NoiseFamily family_;
  double nu_ = 0.0;
  double t_scale_ = 1.0;     // eps = T * t_scale_, t_scale_ = sqrt((nu-2)/nu)
  double t_log_norm_ = 0.0;  // log of the standardized density's constant
  NoiseMoments moments_;
};

/// `count` iid draws from a stream seeded with `seed`.
std::vector<double> sample(const NoiseModel& noise, std::uint64_t seed, int count);

}  // namespace nhar
