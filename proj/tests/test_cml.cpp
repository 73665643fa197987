#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nhar/cls.hpp"
#include "nhar/cml.hpp"
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

ModelSpec decaying_amplitude_model() {
  ModelSpec spec;
  spec.mean.family = MeanFamily::expar;
  spec.mean.q = 1;
  spec.mean.kappa = 0.1;
  spec.mean.fix_rho0 = true;
  spec.vol.family = VolFamily::constant;
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

TEST_SUITE("cml") {

TEST_CASE("log likelihood hand values") {
  const NoiseModel gauss = NoiseModel::gaussian();

  // Single standard-normal point at zero: -0.5 log(2 pi).
  CHECK(log_likelihood(psi_of({}, {1.0}),
                       SeriesWindow(std::vector<double>{}, {0.0}),
                       zero_mean_constant_vol(), gauss) ==
        doctest::Approx(-0.5 * std::log(2.0 * 3.14159265358979323846)).epsilon(1e-14));

  // Unit volatility reduces the criterion to a plain density sum, bitwise.
  const SeriesWindow iid =
      simulate_series(zero_mean_constant_vol(), psi_of({}, {1.0}), gauss, 30, 0, 5);
  double plain = 0.0;
  for (int i = 1; i <= iid.n(); ++i) plain += gauss.log_density(iid.x(i));
  CHECK(log_likelihood(psi_of({}, {1.0}), iid, zero_mean_constant_vol(), gauss) ==
        plain);

  // Scale theta0 = 4: each term picks up -log 2 and a rescaled argument.
  const SeriesWindow two(std::vector<double>{}, {2.0, -4.0});
  const double expected =
      -2.0 * std::log(2.0) + gauss.log_density(1.0) + gauss.log_density(-2.0);
  CHECK(log_likelihood(psi_of({}, {4.0}), two, zero_mean_constant_vol(), gauss) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gaussian score reduces to the least-squares gradient") {
  const ModelSpec spec = ar1_constant_vol();
  const NoiseModel gauss = NoiseModel::gaussian();
  const SeriesWindow w =
      simulate_series(spec, psi_of({0.4}, {0.7}), gauss, 200, 200, 9);

  std::mt19937_64 g(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const ParamVector psi = psi_of({-0.8 + 1.6 * u(g)}, {0.2 + 1.3 * u(g)});
    const Eigen::VectorXd s = score(psi, w, spec, gauss);
    const Eigen::VectorXd ug = u_n_gradient(psi.rho, w, spec);
    CHECK(std::abs(s[0] - (-ug[0] / (2.0 * psi.theta[0]))) < 1e-10);
  }
}

TEST_CASE("score and hessian match finite differences") {
  const ModelSpec spec = ar1_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({0.5}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 200, 500, 17);
  std::mt19937_64 g(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  for (const NoiseModel& noise :
       {NoiseModel::gaussian(), NoiseModel::student_t(8.0)}) {
    for (int k = 0; k < 50; ++k) {
      const ParamVector psi =
          psi_of({-0.8 + 1.6 * u(g)}, {0.1 + 1.4 * u(g), 0.05 + 0.85 * u(g)});
      const Eigen::VectorXd point = [&] {
        Eigen::VectorXd v(3);
        v << psi.rho[0], psi.theta[0], psi.theta[1];
        return v;
      }();
      auto unpack = [](const Eigen::VectorXd& v) {
        return ParamVector{v.head(1), v.tail(2)};
      };
      auto value = [&](const Eigen::VectorXd& v) {
        return log_likelihood(unpack(v), w, spec, noise);
      };
      auto grad = [&](const Eigen::VectorXd& v) {
        return score(unpack(v), w, spec, noise);
      };
      CHECK(test::max_rel_err(score(psi, w, spec, noise),
                              test::fd_gradient(value, point)) < 1e-6);
      // q_n_hessian carries the sign of the minimized objective (-loglik).
      CHECK(test::max_rel_err(q_n_hessian(psi, w, spec, noise),
                              Eigen::MatrixXd(-test::fd_jacobian(grad, point))) <
            1e-5);
    }
  }
}

TEST_CASE("gaussian quasi-likelihood fit equals least squares for the decaying model") {
  const ModelSpec spec = decaying_amplitude_model();
  const SeriesWindow w = simulate_series(spec, psi_of({0.8}, {0.8}),
                                         NoiseModel::gaussian(), 400, 500, 23);
  const EstimationResult ls = fit_cls(w, spec);
  const EstimationResult ml = fit_cml(w, spec, NoiseModel::gaussian());
  CHECK(ml.converged);
  CHECK(test::max_abs_diff(ls.psi_hat.rho, ml.psi_hat.rho) < 1e-8);
  CHECK(test::max_abs_diff(ls.psi_hat.theta, ml.psi_hat.theta) < 1e-8);
  CHECK(ml.method == Method::cml);
}

TEST_CASE("first-order conditions hold at the arch optimum") {
  const ModelSpec spec = zero_mean_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 500, 500, 29);
  const EstimationResult fit = fit_cml(w, spec, NoiseModel::gaussian());
  REQUIRE(fit.converged);
  const double t0 = fit.psi_hat.theta[0];
  const double t1 = fit.psi_hat.theta[1];

  double e1 = 0.0, e2 = 0.0;
  for (int i = 1; i <= w.n(); ++i) {
    const double z1 = w.z(i).lag(1);
    const double v = t0 + t1 * z1 * z1;
    const double x2 = w.x(i) * w.x(i);
    e1 += 1.0 / v - x2 / (v * v);
    e2 += z1 * z1 / v - x2 * z1 * z1 / (v * v);
  }
  CHECK(std::abs(e1) < 1e-6);
  CHECK(std::abs(e2) < 1e-6);

  // The optimizer must not make the criterion worse than its start value.
  CmlOptions opts;
  opts.init = psi_of({}, {0.5, 0.2});
  opts.with_covariance = false;
  const EstimationResult from_init = fit_cml(w, spec, NoiseModel::gaussian(), opts);
  CHECK(log_likelihood(from_init.psi_hat, w, spec, NoiseModel::gaussian()) >=
        log_likelihood(*opts.init, w, spec, NoiseModel::gaussian()));
}

TEST_CASE("gaussian noise zeroes the cross block of lambda exactly") {
  const ModelSpec spec = ar1_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({0.6}, {0.4, 0.05}),
                                         NoiseModel::gaussian(), 400, 500, 31);
  const EstimationResult fit = fit_cml(w, spec, NoiseModel::gaussian());
  REQUIRE(fit.cml_covariance.has_value());
  const Eigen::MatrixXd& lam = fit.cml_covariance->lambda_hat;
  CHECK(lam(0, 1) == 0.0);
  CHECK(lam(0, 2) == 0.0);
  CHECK(lam(1, 0) == 0.0);
  CHECK(lam(2, 0) == 0.0);
  CHECK(lam(1, 1) > 0.0);
}

TEST_CASE("sandwich collapses to the inverse information under gaussian noise") {
  const ModelSpec spec = zero_mean_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 10000, 500, 37);
  const EstimationResult fit = fit_cml(w, spec, NoiseModel::gaussian());
  REQUIRE(fit.cml_covariance.has_value());
  const Eigen::MatrixXd inv_info = fit.cml_covariance->info_hat.inverse();
  const double rel = (fit.cml_covariance->sandwich - inv_info).norm() / inv_info.norm();
  CHECK(rel < 0.15);
}

TEST_CASE("observed information matches the scalar formula") {
  const SeriesWindow w(std::vector<double>{}, {0.3, -0.5, 1.0, 0.2, -0.1});
  const double t0 = 0.25;
  const CmlCovariance cov = estimate_cml_covariance(
      w, psi_of({}, {t0}), zero_mean_constant_vol(), NoiseModel::gaussian());
  double hand = 0.0;
  for (int i = 1; i <= w.n(); ++i) {
    hand += -1.0 / (2.0 * t0 * t0) + w.x(i) * w.x(i) / (t0 * t0 * t0);
  }
  hand /= w.n();
  CHECK(cov.info_hat(0, 0) == doctest::Approx(hand).epsilon(1e-12));
  CHECK(cov.info_hat(0, 0) > 0.0);
}

TEST_CASE("sampling-only noise is rejected") {
  const ModelSpec spec = zero_mean_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 100, 100, 41);
  CHECK_THROWS_AS(fit_cml(w, spec, NoiseModel::laplace()), UnsupportedOperation);
  CHECK_THROWS_AS(log_likelihood(psi_of({}, {0.4, 0.3}), w, spec,
                                 NoiseModel::laplace()),
                  UnsupportedOperation);
  try {
    fit_cml(w, spec, NoiseModel::laplace());
  } catch (const UnsupportedOperation& e) {
    CHECK(std::string(e.what()).find("sampling-only") != std::string::npos);
  }
}

TEST_CASE("empirical noise integrals agree loosely with closed forms") {
  const ModelSpec spec = zero_mean_arch1();
  const SeriesWindow w = simulate_series(spec, psi_of({}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 4000, 500, 43);
  CmlOptions closed;
  CmlOptions empirical;
  empirical.empirical_integrals = true;
  const EstimationResult a = fit_cml(w, spec, NoiseModel::gaussian(), closed);
  const EstimationResult b = fit_cml(w, spec, NoiseModel::gaussian(), empirical);
  REQUIRE(a.cml_covariance.has_value());
  REQUIRE(b.cml_covariance.has_value());
  const Eigen::MatrixXd& la = a.cml_covariance->lambda_hat;
  const Eigen::MatrixXd& lb = b.cml_covariance->lambda_hat;
  CHECK((la - lb).norm() / la.norm() < 0.2);
  // Same estimate either way; only the covariance assembly differs.
  CHECK(test::max_abs_diff(a.psi_hat.theta, b.psi_hat.theta) == 0.0);
}

TEST_CASE("short series and dimension mismatches are rejected") {
  const ModelSpec spec = ar1_arch1();
  CHECK_THROWS_AS(fit_cml(SeriesWindow({0.1}, {1.0, -1.0, 0.5}), spec,
                          NoiseModel::gaussian()),
                  std::invalid_argument);
  const SeriesWindow w = simulate_series(spec, psi_of({0.5}, {0.4, 0.3}),
                                         NoiseModel::gaussian(), 50, 100, 47);
  CHECK_THROWS_AS(score(psi_of({0.5}, {0.4}), w, spec, NoiseModel::gaussian()),
                  std::invalid_argument);
}

}  // TEST_SUITE("cml")
