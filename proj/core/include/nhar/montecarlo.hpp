#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nhar/cls.hpp"
#include "nhar/cml.hpp"
#include "nhar/kde.hpp"
#include "nhar/model.hpp"
#include "nhar/noise.hpp"
#include "nhar/rng.hpp"

namespace nhar {

// Replication engine: simulate-and-fit experiments over a grid of true
// parameters and sample sizes, with a deterministic seed per replication so
// results are independent of scheduling and any cell can be re-run alone.

struct ExperimentSpec {
  std::string name;                 ///< label used in output files
  ModelSpec model;
  std::vector<ParamVector> truths;  ///< one entry per table row
  NoiseModel noise = NoiseModel::gaussian();
  std::vector<int> n_list;
  int reps = 1000;
  std::vector<Method> methods{Method::cls};
  std::uint64_t seed = 0;  ///< master seed
  int burn_in = 500;
  /// Test hook: when set, each replication simulates with a fresh sampler
  /// from this factory instead of `noise` (e.g. a zero-noise double). Least
  /// squares only — cml needs a density. Not serialized.
  std::optional<std::function<NoiseSampler()>> noise_override;

  /// Throws std::invalid_argument on an inconsistent specification
  /// (no rows, reps < 1, cml requested with a sampling-only noise, ...).
  void validate() const;
};

/// Aggregates for one (true psi, n, method) cell. Estimate vectors are
/// stacked (rho, theta); least-squares cells aggregate the raw (pre-clamp)
/// step-2 values so boundary clamping does not bias the summary.
struct CellReport {
  int row = 0;  ///< index into ExperimentSpec::truths
  int n = 0;
  Method method = Method::cls;
  ParamVector truth;
  int reps = 0;
  int failures = 0;
  Eigen::VectorXd mean;  ///< over successful replications
  Eigen::VectorXd sd;    ///< sample SD (n-1 divisor)
  Eigen::VectorXd bias;  ///< mean - truth
  std::string first_error;  ///< diagnostic from the earliest failed replication
};

struct MCReport {
  std::string name;
  std::vector<std::string> param_names;  ///< stacked display names
  std::vector<CellReport> cells;
};

/// Runs every (row, n) cell: replication r of cell c simulates with seed
/// replication_seed(master, c, r), fits each requested method on the same
/// series, and aggregates. Failed replications (divergence, singular systems,
/// non-convergence) are counted and excluded from the moments; they never
/// abort the cell. `jobs` <= 0 means one worker per hardware thread. Output
/// is identical for any job count.
MCReport run_experiment(const ExperimentSpec& spec, int jobs = 0);

// Density-curve experiments: one simulated path per sample size, fitted by
// least squares; kernel curves of the residual density and its derivative
// with the exact-density overlay.

struct FigureSpec {
  std::string name;
  ModelSpec model;
  ParamVector truth;
  NoiseModel noise = NoiseModel::gaussian();
  std::vector<int> n_list;
  std::uint64_t seed = 0;
  int burn_in = 500;
  std::vector<int> orders{0, 1};
  BandwidthRule rule = BandwidthRule::min_spread;
  /// Evaluation window; defaults to residual mean +/- 4.5 SD per curve.
  std::optional<GridSpec> grid;
};

struct FigureCurve {
  int n = 0;
  KernelEstimate estimate;  ///< truth overlay filled when the noise has a density
};

struct FigureBundle {
  std::string name;
  std::vector<FigureCurve> curves;  ///< ordered by (n, order)
};

/// Simulates one series per n (seed = replication_seed(master, n-index, 0)),
/// fits by least squares, and tabulates the residual kernel curves for every
/// requested order. Degenerate inputs (zero residual spread) propagate as
/// invalid_argument from the bandwidth rule.
FigureBundle run_figure_experiment(const FigureSpec& spec);

}  // namespace nhar
