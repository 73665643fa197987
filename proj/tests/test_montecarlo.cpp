#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "nhar/montecarlo.hpp"
#include "nhar/rng.hpp"
#include "test_util.hpp"

using namespace nhar;

namespace {

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

const CellReport& cell_of(const MCReport& report, int row, int n, Method method) {
  for (const CellReport& c : report.cells) {
    if (c.row == row && c.n == n && c.method == method) return c;
  }
  REQUIRE(false);
  return report.cells.front();
}

}  // namespace

TEST_SUITE("montecarlo") {

TEST_CASE("replication seeds are deterministic and distinct") {
  CHECK(replication_seed(7, 3, 11) == replication_seed(7, 3, 11));
  CHECK(replication_seed(7, 3, 11) != replication_seed(7, 3, 12));
  CHECK(replication_seed(7, 3, 11) != replication_seed(7, 4, 11));
  CHECK(replication_seed(7, 3, 11) != replication_seed(8, 3, 11));
  // Neighbouring cells never share a stream even at rep 0.
  CHECK(replication_seed(0, 0, 0) != replication_seed(0, 1, 0));
}

TEST_CASE("a zero-noise double is recovered exactly") {
  // With unit-magnitude noise, X_i^2 = theta0 + theta1 X_{i-1}^2 holds
  // exactly, so the squared-residual regression interpolates and the bias
  // is numerically zero. Burn-in must stay off: it would park X^2 at the
  // fixed point and degenerate the regressor.
  ExperimentSpec spec;
  spec.name = "double";
  spec.model = zero_mean_arch1();
  spec.truths = {psi_of({}, {0.4, 0.5})};
  spec.n_list = {12};
  spec.reps = 1;
  spec.seed = 1;
  spec.burn_in = 0;
  spec.noise_override = []() -> NoiseSampler {
    auto flip = std::make_shared<int>(0);
    return [flip](Rng&) { return ((*flip)++ % 2 == 0) ? 1.0 : -1.0; };
  };
  const MCReport report = run_experiment(spec, 1);
  REQUIRE(report.cells.size() == 1);
  const CellReport& cell = report.cells.front();
  CHECK(cell.failures == 0);
  CHECK(cell.reps == 1);
  CHECK(cell.bias.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("specification validation rejects inconsistent requests") {
  ExperimentSpec spec;
  spec.name = "bad";
  spec.model = zero_mean_arch1();
  spec.truths = {psi_of({}, {0.4, 0.3})};
  spec.n_list = {100};
  spec.reps = 10;

  ExperimentSpec no_rows = spec;
  no_rows.truths.clear();
  CHECK_THROWS_AS(no_rows.validate(), std::invalid_argument);

  ExperimentSpec no_reps = spec;
  no_reps.reps = 0;
  CHECK_THROWS_AS(no_reps.validate(), std::invalid_argument);

  ExperimentSpec laplace_cml = spec;
  laplace_cml.noise = NoiseModel::laplace();
  laplace_cml.methods = {Method::cls, Method::cml};
  CHECK_THROWS_AS(laplace_cml.validate(), std::invalid_argument);

  ExperimentSpec override_cml = spec;
  override_cml.methods = {Method::cml};
  override_cml.noise_override = []() -> NoiseSampler {
    return [](Rng& g) { return uniform01(g) - 0.5; };
  };
  try {
    override_cml.validate();
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("sampler override") != std::string::npos);
  }

  spec.validate();  // the base spec itself is fine
}

TEST_CASE("reports are independent of the worker count and rerun identically") {
  ExperimentSpec spec;
  spec.name = "threads";
  spec.model = zero_mean_arch1();
  spec.truths = {psi_of({}, {0.4, 0.3})};
  spec.noise = NoiseModel::gaussian();
  spec.n_list = {100};
  spec.reps = 50;
  spec.methods = {Method::cls, Method::cml};
  spec.seed = 99;

  const MCReport serial = run_experiment(spec, 1);
  const MCReport parallel = run_experiment(spec, 4);
  const MCReport again = run_experiment(spec, 4);
  REQUIRE(serial.cells.size() == 2);
  REQUIRE(parallel.cells.size() == 2);
  for (std::size_t k = 0; k < serial.cells.size(); ++k) {
    CHECK(test::max_abs_diff(serial.cells[k].mean, parallel.cells[k].mean) == 0.0);
    CHECK(test::max_abs_diff(serial.cells[k].sd, parallel.cells[k].sd) == 0.0);
    CHECK(serial.cells[k].failures == parallel.cells[k].failures);
    CHECK(test::max_abs_diff(parallel.cells[k].mean, again.cells[k].mean) == 0.0);
  }
}

TEST_CASE("adding a second method leaves the first method's cells unchanged") {
  ExperimentSpec spec;
  spec.name = "streams";
  spec.model = zero_mean_arch1();
  spec.truths = {psi_of({}, {0.4, 0.3}), psi_of({}, {0.5, 0.2})};
  spec.n_list = {80, 120};
  spec.reps = 20;
  spec.seed = 2468;
  spec.methods = {Method::cls};

  const MCReport only_cls = run_experiment(spec, 2);
  spec.methods = {Method::cls, Method::cml};
  const MCReport both = run_experiment(spec, 2);

  for (int row = 0; row < 2; ++row) {
    for (int n : spec.n_list) {
      const CellReport& a = cell_of(only_cls, row, n, Method::cls);
      const CellReport& b = cell_of(both, row, n, Method::cls);
      CHECK(test::max_abs_diff(a.mean, b.mean) == 0.0);
      CHECK(test::max_abs_diff(a.sd, b.sd) == 0.0);
    }
  }
}

TEST_CASE("explosive cells fail cleanly and keep their diagnostics") {
  ExperimentSpec spec;
  spec.name = "explosive";
  spec.model = zero_mean_arch1();
  spec.truths = {psi_of({}, {0.4, 25.0})};
  spec.n_list = {200};
  spec.reps = 5;
  spec.seed = 505;
  const MCReport report = run_experiment(spec, 2);
  REQUIRE(report.cells.size() == 1);
  const CellReport& cell = report.cells.front();
  CHECK(cell.failures == 5);
  CHECK(cell.first_error.find("diverged") != std::string::npos);
}

TEST_CASE("a short replication study reproduces a known bias pattern") {
  // One line of the volatility-recovery experiment: at n = 50 the
  // least-squares means are far from the truth in a reproducible way.
  ExperimentSpec spec;
  spec.name = "row";
  spec.model = decaying_amplitude_model();
  spec.truths = {psi_of({0.20}, {0.10})};
  spec.n_list = {50};
  spec.reps = 1000;
  spec.seed = 1009;
  const MCReport report = run_experiment(spec);
  REQUIRE(report.cells.size() == 1);
  REQUIRE(report.param_names.size() == 2);
  const CellReport& cell = report.cells.front();
  CHECK(cell.reps - cell.failures > 950);
  CHECK(std::abs(cell.mean[0] - 0.191) < 0.03);
  CHECK(std::abs(cell.mean[1] - 0.098) < 0.03);
  CHECK(cell.truth.rho[0] == 0.20);
  CHECK(cell.n == 50);
  CHECK(cell.method == Method::cls);
  CHECK(cell.sd.minCoeff() > 0.0);
  CHECK(test::max_abs_diff(cell.bias,
                           Eigen::VectorXd(cell.mean - Eigen::Vector2d(0.20, 0.10))) <
        1e-15);
}

TEST_CASE("figure experiments produce ordered deterministic curves") {
  FigureSpec spec;
  spec.name = "fig";
  spec.model = decaying_amplitude_model();
  spec.truth = psi_of({0.5}, {1.0});
  spec.n_list = {200};
  spec.seed = 6001;
  GridSpec grid;
  spec.grid = grid;  // [-4, 4] x 401

  const FigureBundle bundle = run_figure_experiment(spec);
  REQUIRE(bundle.curves.size() == 2);
  CHECK(bundle.curves[0].n == 200);
  CHECK(bundle.curves[0].estimate.order == 0);
  CHECK(bundle.curves[1].estimate.order == 1);
  REQUIRE(bundle.curves[0].estimate.truth.size() == 401);

  double sup = 0.0;
  for (std::size_t j = 0; j < 401; ++j) {
    sup = std::max(sup, std::abs(bundle.curves[0].estimate.values[j] -
                                 bundle.curves[0].estimate.truth[j]));
  }
  CHECK(sup < 0.15);

  const FigureBundle rerun = run_figure_experiment(spec);
  CHECK(rerun.curves[0].estimate.bandwidth == bundle.curves[0].estimate.bandwidth);
  CHECK(rerun.curves[0].estimate.values == bundle.curves[0].estimate.values);
}

}  // TEST_SUITE("montecarlo")
