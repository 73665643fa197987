// nhar: simulate / fit / density / replicate for conditionally
// heteroscedastic autoregressions X_i = m(rho; Z_{i-1}) + sigma(theta;
// Z_{i-1}) eps_i.
//
// Exit codes: 0 success, 2 configuration or data error, 3 simulation
// divergence, 4 estimator did not converge (the result file is still
// written with diagnostics).

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nhar/cls.hpp"
#include "nhar/cml.hpp"
#include "nhar/errors.hpp"
#include "nhar/io.hpp"
#include "nhar/kde.hpp"
#include "nhar/model.hpp"
#include "nhar/montecarlo.hpp"
#include "nhar/noise.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitNoConvergence = 4;

struct SimulateArgs {
  std::string model_path;
  std::string out_path;
  std::string noise_token;
  int n = 0;
  int burn_in = 500;
  std::uint64_t seed = 0;
};

struct FitArgs {
  std::string method = "cls";
  std::string model_path;
  std::string data_path;
  std::string out_path;
  std::string noise_token;
  bool no_covariance = false;
  bool empirical_integrals = false;
};

struct DensityArgs {
  std::string data_path;
  std::string fit_path;
  std::string out_path;
  std::string grid_token;
  std::string rule = "min_spread";
  std::string truth_token;
  int order = 0;
};

struct ReplicateArgs {
  std::string experiment_path;
  std::string out_path;
  int jobs = 0;
};

nhar::NoiseModel resolve_noise(const std::string& token,
                               const std::optional<nhar::NoiseModel>& from_file,
                               const char* purpose) {
  if (!token.empty()) {
    return nhar::io::noise_from_token(token);
  }
  if (from_file.has_value()) {
    return *from_file;
  }
  throw std::invalid_argument(std::string("no noise specified for ") + purpose +
                              ": pass --noise or add a \"noise\" entry to the model file");
}

nhar::BandwidthRule parse_rule(const std::string& rule) {
  if (rule == "min_spread") {
    return nhar::BandwidthRule::min_spread;
  }
  if (rule == "classical") {
    return nhar::BandwidthRule::classical;
  }
  throw std::invalid_argument("unknown --bandwidth-rule \"" + rule +
                              "\" (expected min_spread or classical)");
}

nhar::GridSpec parse_grid(const std::string& token) {
  nhar::GridSpec grid;
  char extra = '\0';
  const int got = std::sscanf(token.c_str(), "%lf:%lf:%d%c", &grid.lo, &grid.hi,
                              &grid.count, &extra);
  if (got != 3) {
    throw std::invalid_argument("bad --grid \"" + token + "\" (expected lo:hi:count)");
  }
  return grid;
}

std::string strip_csv_suffix(const std::string& path) {
  const std::string suffix = ".csv";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return path.substr(0, path.size() - suffix.size());
  }
  return path;
}

int run_simulate(const SimulateArgs& args) {
  const nhar::io::ModelFile file = nhar::io::read_model_file(args.model_path);
  if (!file.params.has_value()) {
    throw std::invalid_argument(args.model_path +
                                ": model file has no \"params\" to simulate from");
  }
  const nhar::NoiseModel noise =
      resolve_noise(args.noise_token, file.noise, "simulation");
  if (args.n < 1) {
    throw std::invalid_argument("--n must be at least 1");
  }
  const nhar::SeriesWindow series = nhar::simulate_series(
      file.spec, *file.params, noise, args.n, args.burn_in, args.seed);
  nhar::io::write_series_csv(args.out_path, series);
  double mean = 0.0;
  for (int i = 1; i <= series.n(); ++i) {
    mean += series.x(i);
  }
  mean /= series.n();
  double var = 0.0;
  for (int i = 1; i <= series.n(); ++i) {
    const double d = series.x(i) - mean;
    var += d * d;
  }
  var /= series.n();
  std::printf("simulated n=%d mean=%.6g var=%.6g -> %s\n", series.n(), mean, var,
              args.out_path.c_str());
  return kExitOk;
}

int run_fit(const FitArgs& args) {
  const nhar::io::ModelFile file = nhar::io::read_model_file(args.model_path);
  const nhar::io::SeriesData data = nhar::io::read_series_csv(args.data_path);
  const nhar::SeriesWindow series =
      nhar::io::series_for_lags(data, file.spec.lag_order());

  nhar::EstimationResult result;
  if (args.method == "cls") {
    nhar::FitOptions options;
    options.with_covariance = !args.no_covariance;
    options.init = file.params;
    result = nhar::fit_cls(series, file.spec, nhar::WeightSpec{}, options);
  } else if (args.method == "cml") {
    const nhar::NoiseModel noise =
        resolve_noise(args.noise_token, file.noise, "likelihood fitting");
    nhar::CmlOptions options;
    options.with_covariance = !args.no_covariance;
    options.empirical_integrals = args.empirical_integrals;
    options.init = file.params;
    result = nhar::fit_cml(series, file.spec, noise, options);
  } else {
    throw std::invalid_argument("unknown --method \"" + args.method +
                                "\" (expected cls or cml)");
  }

  const std::string text =
      nhar::io::result_to_json_text(result, file.spec, series.n());
  {
    std::ofstream out(args.out_path);
    if (!out) {
      throw std::invalid_argument("cannot write file: " + args.out_path);
    }
    out << text;
  }
  std::ostringstream psi;
  psi << "rho=[" << result.psi_hat.rho.transpose() << "] theta=["
      << result.psi_hat.theta.transpose() << "]";
  std::printf("fit method=%s n=%d converged=%s objective=%.6g %s -> %s\n",
              args.method.c_str(), series.n(), result.converged ? "yes" : "no",
              result.objective, psi.str().c_str(), args.out_path.c_str());
  if (!result.converged) {
    std::fprintf(stderr, "error: estimator did not converge%s\n",
                 result.warnings.empty()
                     ? ""
                     : (" (" + result.warnings.front() + ")").c_str());
    return kExitNoConvergence;
  }
  return kExitOk;
}

int run_density(const DensityArgs& args) {
  if (args.order < 0 || args.order > 2) {
    throw std::invalid_argument("--order must be 0, 1 or 2");
  }
  const nhar::io::FitDocument fit = nhar::io::read_fit_result(args.fit_path);
  const nhar::io::SeriesData data = nhar::io::read_series_csv(args.data_path);
  const nhar::SeriesWindow series =
      nhar::io::series_for_lags(data, fit.spec.lag_order());
  const std::vector<double> eps = nhar::residuals(series, fit.psi_hat, fit.spec);

  const nhar::BandwidthRule rule = parse_rule(args.rule);
  const nhar::GridSpec grid = args.grid_token.empty()
                                  ? nhar::default_grid(eps)
                                  : parse_grid(args.grid_token);

  std::optional<nhar::NoiseModel> truth;
  if (!args.truth_token.empty()) {
    truth = nhar::io::noise_from_token(args.truth_token);
  }
  const nhar::KernelEstimate curve = nhar::density_curve(
      eps, args.order, grid, rule, truth.has_value() ? &*truth : nullptr);
  nhar::io::write_curve_csv(args.out_path, curve);
  std::printf("density order=%d n=%d bandwidth=%.6g grid=[%g,%g]x%d -> %s\n",
              curve.order, curve.n, curve.bandwidth, grid.lo, grid.hi, grid.count,
              args.out_path.c_str());
  return kExitOk;
}

int run_replicate(const ReplicateArgs& args) {
  const nhar::io::ExperimentFile file =
      nhar::io::read_experiment_file(args.experiment_path);
  if (file.table.has_value()) {
    const nhar::MCReport report = nhar::run_experiment(*file.table, args.jobs);
    nhar::io::write_report_csv(args.out_path, report);
    int failures = 0;
    for (const nhar::CellReport& cell : report.cells) {
      failures += cell.failures;
    }
    std::printf("experiment %s: %zu cells, %d failed replications -> %s\n",
                report.name.c_str(), report.cells.size(), failures,
                args.out_path.c_str());
    return kExitOk;
  }
  const nhar::FigureBundle bundle = nhar::run_figure_experiment(*file.figures);
  const std::string prefix = strip_csv_suffix(args.out_path);
  for (const nhar::FigureCurve& curve : bundle.curves) {
    std::ostringstream path;
    path << prefix << "_n" << curve.n << "_p" << curve.estimate.order << ".csv";
    nhar::io::write_curve_csv(path.str(), curve.estimate);
    std::printf("curve n=%d order=%d bandwidth=%.6g -> %s\n", curve.n,
                curve.estimate.order, curve.estimate.bandwidth,
                path.str().c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulation and estimation for nonlinear heteroscedastic autoregressions\n"
      "X_i = m(rho; Z_{i-1}) + sigma(theta; Z_{i-1}) eps_i"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Simulate a series from a model file and write it as CSV");
  simulate->add_option("--model", sim.model_path, "model JSON (needs \"params\")")
      ->required();
  simulate->add_option("--n", sim.n, "number of observations")->required();
  simulate->add_option("--seed", sim.seed, "RNG seed (default 0)");
  simulate->add_option("--burn-in", sim.burn_in,
                       "pre-sample steps discarded before recording (default 500)");
  simulate->add_option("--noise", sim.noise_token,
                       "noise override: gaussian | laplace | student_t:NU");
  simulate->add_option("--out", sim.out_path, "output series CSV")->required();

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Estimate model parameters from a series CSV");
  fit_cmd->add_option("--method", fit.method, "cls (least squares) or cml (likelihood)");
  fit_cmd->add_option("--model", fit.model_path,
                      "model JSON (optional \"params\" seed the optimizer)")
      ->required();
  fit_cmd->add_option("--data", fit.data_path, "series CSV")->required();
  fit_cmd->add_option("--noise", fit.noise_token,
                      "noise for cml: gaussian | student_t:NU");
  fit_cmd->add_flag("--no-covariance", fit.no_covariance,
                    "skip the asymptotic covariance estimate");
  fit_cmd->add_flag("--empirical-integrals", fit.empirical_integrals,
                    "use residual-based score integrals in the cml sandwich");
  fit_cmd->add_option("--out", fit.out_path, "output result JSON")->required();

  DensityArgs density;
  CLI::App* density_cmd = app.add_subcommand(
      "density", "Kernel estimate of the residual density or its derivatives");
  density_cmd->add_option("--data", density.data_path, "series CSV")->required();
  density_cmd->add_option("--fit", density.fit_path, "fit result JSON")->required();
  density_cmd->add_option("--order", density.order, "derivative order p in {0,1,2}")
      ->required();
  density_cmd->add_option("--grid", density.grid_token,
                          "evaluation grid lo:hi:count (default: data-driven)");
  density_cmd->add_option("--bandwidth-rule", density.rule,
                          "min_spread (default) or classical");
  density_cmd->add_option("--truth", density.truth_token,
                          "overlay the exact density: gaussian | student_t:NU");
  density_cmd->add_option("--out", density.out_path, "output curve CSV")->required();

  ReplicateArgs replicate;
  CLI::App* replicate_cmd = app.add_subcommand(
      "replicate", "Run a replication experiment (table or figure curves)");
  replicate_cmd
      ->add_option("--experiment", replicate.experiment_path, "experiment JSON")
      ->required();
  replicate_cmd->add_option("--jobs", replicate.jobs,
                            "worker threads (default: hardware concurrency)");
  replicate_cmd
      ->add_option("--out", replicate.out_path,
                   "report CSV (tables) or filename prefix (figures)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(sim);
    }
    if (fit_cmd->parsed()) {
      return run_fit(fit);
    }
    if (density_cmd->parsed()) {
      return run_density(density);
    }
    return run_replicate(replicate);
  } catch (const nhar::SimulationDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
