#include <benchmark/benchmark.h>

#include <vector>

#include "nhar/cls.hpp"
#include "nhar/cml.hpp"
#include "nhar/kde.hpp"
#include "nhar/model.hpp"
#include "nhar/noise.hpp"

namespace {

using namespace nhar;

ModelSpec arch_model() {
  ModelSpec spec;
  spec.mean.family = MeanFamily::constant_zero;
  spec.vol.family = VolFamily::arch;
  spec.vol.q = 1;
  return spec;
}

ModelSpec ar_arch_model() {
  ModelSpec spec;
  spec.mean.family = MeanFamily::linear_ar;
  spec.mean.q = 1;
  spec.vol.family = VolFamily::arch;
  spec.vol.q = 1;
  return spec;
}

ParamVector arch_params() {
  ParamVector psi;
  psi.rho = Eigen::VectorXd(0);
  psi.theta = Eigen::Vector2d(0.4, 0.3);
  return psi;
}

ParamVector ar_arch_params() {
  ParamVector psi;
  psi.rho = Eigen::VectorXd::Constant(1, 0.5);
  psi.theta = Eigen::Vector2d(0.4, 0.2);
  return psi;
}

void BM_simulate(benchmark::State& state) {
  const ModelSpec spec = arch_model();
  const ParamVector psi = arch_params();
  const NoiseModel noise = NoiseModel::gaussian();
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const SeriesWindow w =
        simulate_series(spec, psi, noise, static_cast<int>(state.range(0)), 500, seed++);
    benchmark::DoNotOptimize(w.x(w.n()));
  }
}
BENCHMARK(BM_simulate)->Arg(1000);

void BM_fit_cls(benchmark::State& state) {
  const ModelSpec spec = ar_arch_model();
  const SeriesWindow w = simulate_series(spec, ar_arch_params(),
                                         NoiseModel::gaussian(), 400, 500, 2);
  for (auto _ : state) {
    const EstimationResult fit = fit_cls(w, spec);
    benchmark::DoNotOptimize(fit.psi_hat.theta[0]);
  }
}
BENCHMARK(BM_fit_cls);

void BM_fit_cml(benchmark::State& state) {
  const ModelSpec spec = ar_arch_model();
  const SeriesWindow w = simulate_series(spec, ar_arch_params(),
                                         NoiseModel::gaussian(), 400, 500, 3);
  for (auto _ : state) {
    const EstimationResult fit = fit_cml(w, spec, NoiseModel::gaussian());
    benchmark::DoNotOptimize(fit.psi_hat.theta[0]);
  }
}
BENCHMARK(BM_fit_cml);

void BM_density_curve(benchmark::State& state) {
  const ModelSpec spec = arch_model();
  const SeriesWindow w = simulate_series(spec, arch_params(),
                                         NoiseModel::gaussian(), 600, 500, 4);
  const EstimationResult fit = fit_cls(w, spec);
  const std::vector<double> eps = residuals(w, fit.psi_hat, spec);
  GridSpec grid;
  for (auto _ : state) {
    const KernelEstimate curve = density_curve(eps, 0, grid);
    benchmark::DoNotOptimize(curve.values.back());
  }
}
BENCHMARK(BM_density_curve);

}  // namespace

BENCHMARK_MAIN();
