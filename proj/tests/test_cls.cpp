#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nhar/cls.hpp"
#include "nhar/errors.hpp"
#include "nhar/model.hpp"
#include "nhar/noise.hpp"
#include "nhar/optimize.hpp"
#include "test_util.hpp"

using namespace nhar;

namespace {

ModelSpec zero_mean_constant_vol() {
  ModelSpec spec;
  spec.mean.family = MeanFamily::constant_zero;
  spec.vol.family = VolFamily::constant;
  return spec;
}

ModelSpec ar1_constant_vol() {
  ModelSpec spec;
  spec.mean.family = MeanFamily::linear_ar;
  spec.mean.q = 1;
  spec.vol.family = VolFamily::constant;
  return spec;
}

ModelSpec ar1_arch1() {
  ModelSpec spec;
  spec.mean.family = MeanFamily::linear_ar;
  spec.mean.q = 1;
  spec.vol.family = VolFamily::arch;
  spec.vol.q = 1;
  return spec;
}

ModelSpec zero_mean_arch1() {
  ModelSpec spec;
  spec.mean.family = MeanFamily::constant_zero;
  spec.vol.family = VolFamily::arch;
  spec.vol.q = 1;
  return spec;
}

ParamVector psi_of(std::vector<double> rho, std::vector<double> theta) {
  ParamVector psi;
  psi.rho = Eigen::Map<Eigen::VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size()));
  psi.theta =
      Eigen::Map<Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return psi;
}

}  // namespace

TEST_SUITE("cls") {

TEST_CASE("u_n hand values and weight plumbing") {
  const ModelSpec spec = zero_mean_constant_vol();
  const SeriesWindow w({0.0}, {1.0, 2.0});
  const Eigen::VectorXd rho(0);

  CHECK(u_n(rho, w, spec) == 5.0);  // 1^2 + 2^2

  WeightSpec kill;
  kill.lambda = [](const LagView&) { return 0.0; };
  CHECK(u_n(rho, w, spec, kill) == 0.0);

  // lambda(z) = z1: the i = 1 term is annihilated, the i = 2 term is 2^2 * 1.
  WeightSpec lag_weight;
  lag_weight.lambda = [](const LagView& z) { return z.lag(1); };
  CHECK(u_n(rho, w, spec, lag_weight) == 4.0);
}

TEST_CASE("u_n vanishes at the generating parameter of a noiseless series") {
  const ModelSpec spec = ar1_constant_vol();
  std::vector<double> obs;
  double x = 1.0;
  for (int i = 0; i < 20; ++i) {
    x = 0.6 * x;
    obs.push_back(x);
  }
  const SeriesWindow w({1.0}, obs);
  CHECK(u_n(Eigen::VectorXd::Constant(1, 0.6), w, spec) == 0.0);
  CHECK(u_n(Eigen::VectorXd::Constant(1, 0.5), w, spec) > 0.0);
}

TEST_CASE("s_n hand values") {
  const ModelSpec spec = zero_mean_constant_vol();
  const SeriesWindow w({0.0}, {2.0});
  const ParamVector psi = psi_of({}, {1.0});
  CHECK(s_n(psi, w, spec) == 9.0);  // (4 - 1)^2

  WeightSpec kill;
  kill.gamma = [](const LagView&) { return 0.0; };
  CHECK(s_n(psi, w, spec, kill) == 0.0);

  // Squared residuals exactly equal to sigma^2: zero objective.
  const SeriesWindow exact({0.0}, {2.0, -2.0, 2.0, -2.0});
  CHECK(s_n(psi_of({}, {4.0}), exact, spec) == 0.0);
}

TEST_CASE("closed form equals ordinary least squares plus residual moments") {
  const ModelSpec spec = ar1_constant_vol();
  const ParamVector truth = psi_of({0.6}, {0.5});
  const SeriesWindow w =
      simulate_series(spec, truth, NoiseModel::gaussian(), 400, 500, 101);

  const EstimationResult fit = fit_cls(w, spec);
  CHECK(fit.converged);
  CHECK_FALSE(fit.constraint_active);

  double sxz = 0.0, szz = 0.0;
  for (int i = 1; i <= w.n(); ++i) {
    sxz += w.x(i) * w.z(i).lag(1);
    szz += w.z(i).lag(1) * w.z(i).lag(1);
  }
  const double ols = sxz / szz;
  CHECK(std::abs(fit.psi_hat.rho[0] - ols) < 1e-12);

  double ssr = 0.0;
  for (int i = 1; i <= w.n(); ++i) {
    const double e = w.x(i) - ols * w.z(i).lag(1);
    ssr += e * e;
  }
  CHECK(std::abs(fit.psi_hat.theta[0] - ssr / w.n()) < 1e-12);
  CHECK(fit.psi_raw.theta[0] == fit.psi_hat.theta[0]);
}

TEST_CASE("arch step two equals the squared-residual regression") {
  const ModelSpec spec = ar1_arch1();
  const ParamVector truth = psi_of({0.6}, {0.4, 0.3});
  const SeriesWindow w =
      simulate_series(spec, truth, NoiseModel::gaussian(), 300, 500, 7);

  const EstimationResult fit = fit_cls(w, spec);
  const double rho_hat = fit.psi_hat.rho[0];

  LinearLSQProblem reg;
  reg.design = Eigen::MatrixXd(w.n(), 2);
  reg.response = Eigen::VectorXd(w.n());
  reg.weights = Eigen::VectorXd::Ones(w.n());
  for (int i = 1; i <= w.n(); ++i) {
    const double z1 = w.z(i).lag(1);
    const double e = w.x(i) - rho_hat * z1;
    reg.design(i - 1, 0) = 1.0;
    reg.design(i - 1, 1) = z1 * z1;
    reg.response[i - 1] = e * e;
  }
  const Eigen::VectorXd oracle = solve_linear_lsq(reg);
  CHECK(std::abs(fit.psi_raw.theta[0] - oracle[0]) < 1e-10);
  CHECK(std::abs(fit.psi_raw.theta[1] - oracle[1]) < 1e-10);
}

TEST_CASE("closed-form and iterative routes agree") {
  FitOptions closed;
  closed.path = ClsPath::closed_form;
  closed.with_covariance = false;
  FitOptions iterative;
  iterative.path = ClsPath::iterative;
  iterative.with_covariance = false;

  {
    const ModelSpec spec = zero_mean_arch1();
    const SeriesWindow w = simulate_series(spec, psi_of({}, {0.4, 0.3}),
                                           NoiseModel::gaussian(), 250, 500, 21);
    const EstimationResult a = fit_cls(w, spec, WeightSpec{}, closed);
    const EstimationResult b = fit_cls(w, spec, WeightSpec{}, iterative);
    CHECK(b.converged);
    CHECK(test::max_abs_diff(a.psi_hat.theta, b.psi_hat.theta) < 1e-8);
  }
  {
    const ModelSpec spec = ar1_arch1();
    const SeriesWindow w = simulate_series(spec, psi_of({0.5}, {0.5, 0.2}),
                                           NoiseModel::gaussian(), 250, 500, 22);
    const EstimationResult a = fit_cls(w, spec, WeightSpec{}, closed);
    const EstimationResult b = fit_cls(w, spec, WeightSpec{}, iterative);
    CHECK(b.converged);
    CHECK(test::max_abs_diff(a.psi_hat.rho, b.psi_hat.rho) < 1e-8);
    CHECK(test::max_abs_diff(a.psi_hat.theta, b.psi_hat.theta) < 1e-8);
  }
}

TEST_CASE("objective derivatives match finite differences") {
  const ModelSpec spec = ar1_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({0.5}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 150, 500, 31);
  std::mt19937_64 g(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, -0.9 + 1.8 * u(g));
    auto value = [&](const Eigen::VectorXd& r) { return u_n(r, w, spec); };
    auto grad = [&](const Eigen::VectorXd& r) { return u_n_gradient(r, w, spec); };
    CHECK(test::max_rel_err(u_n_gradient(rho, w, spec),
                            test::fd_gradient(value, rho)) < 1e-6);
    CHECK(test::max_rel_err(u_n_hessian(rho, w, spec),
                            test::fd_jacobian(grad, rho)) < 1e-5);

    const Eigen::VectorXd rho_fix = Eigen::VectorXd::Constant(1, 0.4);
    Eigen::Vector2d theta(0.1 + 1.4 * u(g), 0.02 + 0.78 * u(g));
    auto sval = [&](const Eigen::VectorXd& t) {
      return s_n(ParamVector{rho_fix, t}, w, spec);
    };
    auto sgrad = [&](const Eigen::VectorXd& t) {
      return s_n_theta_gradient(ParamVector{rho_fix, t}, w, spec);
    };
    CHECK(test::max_rel_err(s_n_theta_gradient(ParamVector{rho_fix, theta}, w, spec),
                            test::fd_gradient(sval, theta)) < 1e-6);
    CHECK(test::max_rel_err(s_n_theta_hessian(ParamVector{rho_fix, theta}, w, spec),
                            test::fd_jacobian(sgrad, theta)) < 1e-5);
  }
}

TEST_CASE("preconditions and degenerate data") {
  const ModelSpec spec = ar1_constant_vol();
  // n must exceed I + J = 2.
  CHECK_THROWS_AS(fit_cls(SeriesWindow({0.5}, {1.0, -1.0}), spec),
                  std::invalid_argument);
  // An all-zero series has no regression signal.
  CHECK_THROWS_AS(fit_cls(SeriesWindow({0.0}, std::vector<double>(20, 0.0)), spec),
                  SingularSystem);
}

TEST_CASE("negative step-two solutions are clamped and reported") {
  const ModelSpec spec = zero_mean_arch1();
  // Alternating large/small amplitudes make X_i^2 and X_{i-1}^2 perfectly
  // anti-correlated, so the raw arch slope is negative.
  std::vector<double> obs;
  for (int i = 0; i < 15; ++i) {
    obs.push_back(3.0);
    obs.push_back(0.1);
  }
  const SeriesWindow w({0.1}, obs);
  const EstimationResult fit = fit_cls(w, spec);
  CHECK(fit.psi_raw.theta[1] < 0.0);
  CHECK(fit.psi_hat.theta[1] == 0.0);
  CHECK(fit.theta_clamped[1]);
  CHECK(fit.constraint_active);
  CHECK(in_param_space(spec, fit.psi_hat));
}

TEST_CASE("covariance blocks match scalar hand formulas") {
  const ModelSpec spec = ar1_constant_vol();
  const ParamVector truth = psi_of({0.5}, {0.8});
  const SeriesWindow w =
      simulate_series(spec, truth, NoiseModel::gaussian(), 2000, 500, 55);
  const EstimationResult fit = fit_cls(w, spec);
  REQUIRE(fit.cls_covariance.has_value());
  const CovarianceEstimate& cov = *fit.cls_covariance;
  const int n = w.n();

  double szz = 0.0;
  for (int i = 1; i <= n; ++i) szz += w.z(i).lag(1) * w.z(i).lag(1);
  const double zbar2 = szz / n;

  // Phi11 = (2/n) sum z^2; Phi22 = 2 for constant volatility.
  CHECK(cov.phi11_hat(0, 0) == doctest::Approx(2.0 * zbar2).epsilon(1e-10));
  CHECK(cov.phi22_hat(0, 0) == doctest::Approx(2.0).epsilon(1e-12));

  // Hand-assembled limits: Delta11 = theta0 / E[z^2];
  // Delta22 = theta0^2 E[(eps^2-1)^2].
  const double rho_hat = fit.psi_hat.rho[0];
  const double theta_hat = fit.psi_hat.theta[0];
  double m4c = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double e = (w.x(i) - rho_hat * w.z(i).lag(1)) / std::sqrt(theta_hat);
    m4c += (e * e - 1.0) * (e * e - 1.0);
  }
  m4c /= n;
  CHECK(cov.delta_hat(0, 0) == doctest::Approx(theta_hat / zbar2).epsilon(1e-9));
  CHECK(cov.delta_hat(1, 1) == doctest::Approx(theta_hat * theta_hat * m4c).epsilon(1e-9));
  CHECK(cov.eps_fourth_central_hat == doctest::Approx(m4c).epsilon(1e-12));

  // The Wald machinery is at least sane on this draw.
  CHECK(std::abs(rho_hat - truth.rho[0]) <
        4.0 * std::sqrt(cov.delta_hat(0, 0) / n));
}

TEST_CASE("cross covariance vanishes for symmetric noise, not for skewed") {
  const ModelSpec spec = ar1_arch1();
  const ParamVector truth = psi_of({0.6}, {0.4, 0.05});

  const SeriesWindow sym =
      simulate_series(spec, truth, NoiseModel::gaussian(), 10000, 500, 404);
  const EstimationResult fit_sym = fit_cls(sym, spec);
  const CovarianceEstimate& cs = *fit_sym.cls_covariance;
  const double diag_scale_sym =
      cs.delta_hat.diagonal().minCoeff();
  const double cross_sym = cs.delta_hat.topRightCorner(1, 2).cwiseAbs().maxCoeff();
  CHECK(cross_sym < 0.1 * diag_scale_sym);

  // Shifted exponential: mean 0, variance 1, skewness 2.
  const NoiseSampler skew = [](Rng& g) { return -std::log(1.0 - uniform01(g)) - 1.0; };
  const SeriesWindow sk = simulate_series(spec, truth, skew, 10000, 500, 405);
  const EstimationResult fit_sk = fit_cls(sk, spec);
  const CovarianceEstimate& ck = *fit_sk.cls_covariance;
  const double diag_scale_sk = ck.delta_hat.diagonal().minCoeff();
  const double cross_sk = ck.delta_hat.topRightCorner(1, 2).cwiseAbs().maxCoeff();
  CHECK(cross_sk > 0.1 * diag_scale_sk);
  CHECK(std::abs(ck.eps_third_hat) > 0.5);  // E eps^3 = 2 for the double
}

TEST_CASE("covariance is omitted when not requested") {
  const ModelSpec spec = zero_mean_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 120, 500, 3);
  FitOptions opts;
  opts.with_covariance = false;
  const EstimationResult fit = fit_cls(w, spec, WeightSpec{}, opts);
  CHECK_FALSE(fit.cls_covariance.has_value());
  CHECK_FALSE(fit.cml_covariance.has_value());
  CHECK(fit.method == Method::cls);
}

}  // TEST_SUITE("cls")
