#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nhar/noise.hpp"
#include "nhar/rng.hpp"

namespace nhar {

// Model class: X_i = m(rho; Z_{i-1}) + sigma(theta; Z_{i-1}) * eps_i with lag
// vector Z_{i-1} = (X_{i-1}, ..., X_{i-q}).

enum class MeanFamily { constant_zero, linear_ar, expar };
enum class VolFamily { constant, arch, garch11_trunc };

/// Mean family m(rho; z).
///  - constant_zero: m = 0, no parameters.
///  - linear_ar:     m = rho_1 z_1 + ... + rho_q z_q (no intercept).
///  - expar:         m = [rho_0 + rho_1 exp(-kappa z_1^2)] z_1 with kappa a
///    fixed hyperparameter. With fix_rho0 the linear coefficient is pinned to
///    zero and only the decay amplitude rho_1 is a parameter; that is the
///    protocol behind the n = 50 experiment table, where estimating both
///    coefficients is hopeless because the two regressors are nearly collinear
///    at the simulated scale.
struct MeanSpec {
  MeanFamily family = MeanFamily::constant_zero;
  int q = 1;              ///< linear_ar order
  double kappa = 0.0;     ///< expar decay rate (fixed, never estimated)
  bool fix_rho0 = false;  ///< expar: pin rho_0 = 0

  int param_count() const;
  int lag_order() const;
};

/// Volatility family sigma(theta; z).
///  - constant:      sigma = sqrt(theta_0).
///  - arch:          sigma = sqrt(theta_0 + theta_1 z_1^2 + ... + theta_q z_q^2).
///  - garch11_trunc: sigma^2 = c/(1-a) + b * sum_{j=1..L} a^{j-1} z_j^2 with
///    theta = (c, a, b), the ARCH(inf) form truncated at L terms.
struct VolSpec {
  VolFamily family = VolFamily::constant;
  int q = 1;           ///< arch order
  int trunc_lag = 50;  ///< garch11_trunc truncation L

  int param_count() const;
  int lag_order() const;
};

struct ModelSpec {
  MeanSpec mean;
  VolSpec vol;

  int mean_param_count() const { return mean.param_count(); }
  int vol_param_count() const { return vol.param_count(); }
  /// Effective lag order q = max over both families.
  int lag_order() const;
  /// Throws std::invalid_argument on nonsensical hyperparameters.
  void validate() const;
};

/// psi = (rho', theta')'.
struct ParamVector {
  Eigen::VectorXd rho;
  Eigen::VectorXd theta;
};

/// Feasibility region Psi. Mean parameters are unconstrained; volatility:
/// constant/arch need theta_0 > 0 and theta_j >= 0, garch11_trunc needs
/// c > 0, a >= 0, b >= 0, a + b < 1.
bool in_param_space(const ModelSpec& spec, const ParamVector& psi);
/// Throws std::invalid_argument (with the offending component) if outside Psi
/// or wrongly sized.
void require_in_param_space(const ModelSpec& spec, const ParamVector& psi);

/// Parameter display names, e.g. ("rho1") / ("theta0", "theta1") / ("c","a","b").
std::vector<std::string> rho_names(const MeanSpec& mean);
std::vector<std::string> theta_names(const VolSpec& vol);

/// View of a lag vector: lag(k) = X_{i-k}, k = 1..q, backed by contiguous
/// time-ascending storage. Cheap to copy.
class LagView {
public:
  LagView(const double* newest, int count) : newest_(newest), count_(count) {}
  /// X_{i-k} for the window's target X_i.
  double lag(int k) const { return newest_[1 - k]; }
  int count() const { return count_; }

private:
  const double* newest_;
  int count_;
};

/// Observations X_1..X_n plus the q conditioning values X_{1-q}..X_0 they
/// require, stored time-ascending. Estimators never consume pre-sample values
/// as targets, matching the theory's conditioning on Z_0.
class SeriesWindow {
public:
  /// pre = (X_{1-q}, ..., X_0) oldest first; obs = (X_1, ..., X_n).
  /// Throws std::invalid_argument on empty obs or non-finite values.
  SeriesWindow(std::vector<double> pre, std::vector<double> obs);

  int n() const { return static_cast<int>(values_.size()) - pre_count_; }
  int pre_count() const { return pre_count_; }

  /// X_i, 1 <= i <= n.
  double x(int i) const { return values_[static_cast<std::size_t>(pre_count_ + i - 1)]; }
  /// Z_{i-1} for target X_i; valid for lags 1..(pre_count + i - 1).
  LagView z(int i) const {
    const int newest = pre_count_ + i - 2;  // -1 only when q = 0 and i = 1
    return LagView(values_.data() + (newest < 0 ? 0 : newest), pre_count_ + i - 1);
  }
  /// Throws std::invalid_argument if fewer than q conditioning values exist.
  void require_lags(int q) const;

  const std::vector<double>& storage() const { return values_; }

private:
  std::vector<double> values_;  // pre ++ obs
  int pre_count_;
};

double mean_value(const MeanSpec& mean, const Eigen::VectorXd& rho, const LagView& z);
Eigen::VectorXd mean_gradient(const MeanSpec& mean, const Eigen::VectorXd& rho, const LagView& z);
Eigen::MatrixXd mean_hessian(const MeanSpec& mean, const Eigen::VectorXd& rho, const LagView& z);

/// sigma(theta; z), floored at kVolFloor (the positivity assumption on sigma
/// made by the asymptotic theory; optimizers may probe near-degenerate theta).
/// Each floor hit increments vol_floor_count(). Throws std::invalid_argument
/// if theta is outside Psi.
double vol_value(const VolSpec& vol, const Eigen::VectorXd& theta, const LagView& z);
Eigen::VectorXd vol_gradient(const VolSpec& vol, const Eigen::VectorXd& theta, const LagView& z);
Eigen::MatrixXd vol_hessian(const VolSpec& vol, const Eigen::VectorXd& theta, const LagView& z);

inline constexpr double kVolFloor = 1e-8;
std::uint64_t vol_floor_count();
void reset_vol_floor_count();

/// Draws one noise variate given the engine.
using NoiseSampler = std::function<double(Rng&)>;

/// Simulate from zero initial lags, drop `burn_in` values, return the last
/// q + n values. Throws SimulationDiverged if a value leaves the representable
/// range. Deterministic given seed.
SeriesWindow simulate_series(const ModelSpec& spec, const ParamVector& psi,
                             const NoiseModel& noise, int n, int burn_in, std::uint64_t seed);
/// Same recursion with an arbitrary sampler (test doubles, skewed noise, ...).
SeriesWindow simulate_series(const ModelSpec& spec, const ParamVector& psi,
                             const NoiseSampler& sampler, int n, int burn_in,
                             std::uint64_t seed);

}  // namespace nhar
