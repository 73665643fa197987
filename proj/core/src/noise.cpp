#include "nhar/noise.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "nhar/errors.hpp"

namespace nhar {
namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2*pi)/2

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

/// Integral over the whole real line through x = s*u/(1-u^2), u in (-1,1),
/// which keeps polynomial tails integrable for the Simpson rule.
double integrate_real_line(const std::function<double(double)>& f, double scale = 3.0,
                           double tol = 1e-12) {
  auto g = [&](double u) {
    const double d = 1.0 - u * u;
    if (d <= 0.0) return 0.0;
    const double x = scale * u / d;
    const double jac = scale * (1.0 + u * u) / (d * d);
    const double v = f(x) * jac;
    return std::isfinite(v) ? v : 0.0;
  };
  return integrate(g, -1.0, 1.0, tol);
}

}  // namespace

NoiseModel NoiseModel::gaussian() { return NoiseModel(NoiseFamily::gaussian, 0.0); }
NoiseModel NoiseModel::laplace() { return NoiseModel(NoiseFamily::laplace, 0.0); }

NoiseModel NoiseModel::student_t(double nu) {
  if (!(nu > 4.0)) {
    throw std::invalid_argument("student_t noise requires nu > 4 (finite fourth moment)");
  }
  return NoiseModel(NoiseFamily::student_t, nu);
}

NoiseModel::NoiseModel(NoiseFamily family, double nu) : family_(family), nu_(nu) {
  switch (family_) {
    case NoiseFamily::gaussian:
      moments_ = {0.0, 2.0, 1.0, 1.0, 0.0, 2.0, 0.0, 2.0};
      break;
    case NoiseFamily::laplace: {
      // E eps^4 = 6 at unit variance, so E(eps^2 - 1)^2 = 6 - 2 + 1 = 5.
      // Score integrals are undefined for this sampling-only family.
      const double nan = std::numeric_limits<double>::quiet_NaN();
      moments_ = {0.0, 5.0, nan, nan, nan, nan, nan, nan};
      break;
    }
    case NoiseFamily::student_t: {
      t_scale_ = std::sqrt((nu_ - 2.0) / nu_);
      // density of eps = T*t_scale_: f(x) = c/t_scale_ * (1 + x^2/(nu-2))^-(nu+1)/2
      t_log_norm_ = std::lgamma(0.5 * (nu_ + 1.0)) - std::lgamma(0.5 * nu_) -
                    0.5 * std::log(nu_ * std::numbers::pi) - std::log(t_scale_);
      // Third moment vanishes by symmetry; the fourth is the classical t
      // kurtosis 3(nu-2)/(nu-4) at unit variance.
      moments_.third = 0.0;
      moments_.fourth_central = 3.0 * (nu_ - 2.0) / (nu_ - 4.0) - 1.0;
      auto f = [this](double x) { return std::exp(log_density(x)); };
      auto phi = [this](double x) { return score_phi(x); };
      auto dphi = [this](double x) { return score_phi_prime(x); };
      moments_.int_phi_sq = integrate_real_line([&](double x) { return phi(x) * phi(x) * f(x); });
      moments_.int_phi_prime = integrate_real_line([&](double x) { return dphi(x) * f(x); });
      moments_.int_x_phi_sq = integrate_real_line([&](double x) { return x * phi(x) * phi(x) * f(x); });
      moments_.int_sigma22 =
          integrate_real_line([&](double x) { return x * (phi(x) + x * dphi(x)) * f(x); });
      moments_.int_lambda12 =
          integrate_real_line([&](double x) { return phi(x) * (x * phi(x) - 1.0) * f(x); });
      moments_.int_lambda22 = integrate_real_line(
          [&](double x) { const double u = x * phi(x) - 1.0; return u * u * f(x); });
      break;
    }
  }
}

double NoiseModel::sample_one(Rng& g) const {
  switch (family_) {
    case NoiseFamily::gaussian: {
      // Box-Muller; the sine branch is discarded to keep the sampler stateless.
      const double u1 = 1.0 - uniform01(g);  // (0, 1]
      const double u2 = uniform01(g);
      return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    case NoiseFamily::laplace: {
      // Inverse CDF at scale 1/sqrt(2) so the variance is 1.
      const double u = uniform01(g) - 0.5;
      const double b = 1.0 / std::numbers::sqrt2;
      return -b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
    }
    case NoiseFamily::student_t: {
      // Bailey's polar method, then standardize to unit variance.
      for (;;) {
        const double u = 2.0 * uniform01(g) - 1.0;
        const double v = 2.0 * uniform01(g) - 1.0;
        const double w = u * u + v * v;
        if (w > 0.0 && w < 1.0) {
          const double t = u * std::sqrt(nu_ * (std::pow(w, -2.0 / nu_) - 1.0) / w);
          return t * t_scale_;
        }
      }
    }
  }
  return 0.0;  // unreachable
}

double NoiseModel::log_density(double x) const {
  switch (family_) {
    case NoiseFamily::gaussian:
      return -0.5 * x * x - kHalfLog2Pi;
    case NoiseFamily::student_t:
      return t_log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / (nu_ - 2.0));
    case NoiseFamily::laplace:
      break;
  }
  throw UnsupportedOperation("laplace noise is sampling-only; no density queries");
}

double NoiseModel::score_phi(double x) const {
  switch (family_) {
    case NoiseFamily::gaussian:
      return x;
    case NoiseFamily::student_t:
      return (nu_ + 1.0) * x / ((nu_ - 2.0) + x * x);
    case NoiseFamily::laplace:
      break;
  }
  throw UnsupportedOperation("laplace noise is sampling-only; no score queries");
}

double NoiseModel::score_phi_prime(double x) const {
  switch (family_) {
    case NoiseFamily::gaussian:
      return 1.0;
    case NoiseFamily::student_t: {
      const double d = (nu_ - 2.0) + x * x;
      return (nu_ + 1.0) * ((nu_ - 2.0) - x * x) / (d * d);
    }
    case NoiseFamily::laplace:
      break;
  }
  throw UnsupportedOperation("laplace noise is sampling-only; no score queries");
}

std::vector<double> sample(const NoiseModel& noise, std::uint64_t seed, int count) {
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
  Rng g(seed);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& v : out) v = noise.sample_one(g);
  return out;
}

}  // namespace nhar
