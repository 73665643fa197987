#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nhar/cls.hpp"
#include "nhar/kde.hpp"
#include "nhar/model.hpp"
#include "nhar/montecarlo.hpp"
#include "nhar/noise.hpp"

namespace nhar::io {

// File formats used by the command-line tool: JSON for configuration and fit
// results (every document carries "schema": 1), CSV for series, curves and
// replication reports ('.' decimal separator, '\n' line endings). Parse
// problems throw std::invalid_argument naming the offending key.

// ---- model / noise configuration -----------------------------------------

struct ModelFile {
  ModelSpec spec;
  std::optional<ParamVector> params;
  std::optional<NoiseModel> noise;
};

/// Reads {"schema":1, "mean":{...}, "vol":{...}, "params":{...}?, "noise":{...}?}.
ModelFile read_model_file(const std::string& path);

/// Noise from a CLI-style token: "gaussian", "laplace" or "student_t:NU".
NoiseModel noise_from_token(const std::string& token);
std::string noise_to_token(const NoiseModel& noise);

// ---- fit results ----------------------------------------------------------

/// Serialized fit result, embedding the model so downstream commands can
/// recompute residuals: psi_hat/psi_raw, objective, convergence plus clamp
/// flags, covariance matrix (when estimated) and standard errors
/// sqrt(diag/n), warnings.
std::string result_to_json_text(const EstimationResult& result, const ModelSpec& spec,
                                int n);

struct FitDocument {
  ModelSpec spec;
  ParamVector psi_hat;
  Method method = Method::cls;
};

FitDocument read_fit_result(const std::string& path);

// ---- experiments ----------------------------------------------------------

/// Either a replication-table experiment or a figure (curve) experiment,
/// distinguished by "kind": "table" | "figures".
struct ExperimentFile {
  std::optional<ExperimentSpec> table;
  std::optional<FigureSpec> figures;
};

ExperimentFile read_experiment_file(const std::string& path);

// ---- CSV ------------------------------------------------------------------

/// Columns t,x,presample with presample rows at t <= 0.
void write_series_csv(const std::string& path, const SeriesWindow& series);

struct SeriesData {
  std::vector<double> pre;
  std::vector<double> obs;
};

/// Accepts files written by write_series_csv as well as bare t,x / x files
/// (no presample column: every row is an observation).
SeriesData read_series_csv(const std::string& path);

/// Builds the estimation window, borrowing the first q observations as
/// conditioning values when the file carries no presample rows.
SeriesWindow series_for_lags(const SeriesData& data, int q);

/// Header comment "# order=..,bandwidth=..,n=..", then x,estimate[,truth].
void write_curve_csv(const std::string& path, const KernelEstimate& curve);

/// One row per cell: truth_*, n, method, mean_*, sd_*, bias_*, failures.
void write_report_csv(const std::string& path, const MCReport& report);

}  // namespace nhar::io
