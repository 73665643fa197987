#pragma once

#include <vector>

#include "nhar/model.hpp"
#include "nhar/noise.hpp"

namespace nhar {

// Standardized residuals and Gaussian-kernel estimates of the noise density
// and its first two derivatives,
//   f_n^(p)(x) = (1/(n h^{p+1})) sum_i K^(p)((x - eps_i)/h),
// with the data-driven bandwidth h = c * n^{-1/9}.

/// How the bandwidth constant c is formed from the sample's spread measures
/// (sample SD s and interquartile range IQR):
///  - min_spread: c = 0.9 * min{s, IQR} / 1.34   (the rule the shipped
///    experiments use: the whole min is divided by 1.34)
///  - classical:  c = 0.9 * min{s, IQR / 1.34}   (the textbook variant)
enum class BandwidthRule { min_spread, classical };

struct GridSpec {
  double lo = -4.0;
  double hi = 4.0;
  int count = 401;
};

struct KernelEstimate {
  int order = 0;          ///< derivative order p
  double bandwidth = 0.0;
  int n = 0;              ///< residual count the estimate is based on
  std::vector<double> grid;    ///< strictly ascending
  std::vector<double> values;  ///< f_n^(p) on the grid
  std::vector<double> truth;   ///< optional overlay f^(p); empty if not requested
};

/// eps_i(psi) = [X_i - m(rho; Z_{i-1})] / sigma(theta; Z_{i-1}), i = 1..n.
/// psi must lie in Psi; sigma is floored, so the division is always defined.
std::vector<double> residuals(const SeriesWindow& series, const ParamVector& psi,
                              const ModelSpec& spec);

/// h = c * n^{-1/9}. Quartiles use linear interpolation of order statistics;
/// the SD uses the n-1 divisor. Requires n >= 5 and positive spread.
double bandwidth(const std::vector<double>& residuals,
                 BandwidthRule rule = BandwidthRule::min_spread);

/// Point evaluation of f_n^(p) for p in {0, 1, 2} with the standard Gaussian
/// kernel: K'(u) = -u K(u), K''(u) = (u^2 - 1) K(u).
double density_estimate(const std::vector<double>& residuals, double h, int p,
                        double x);

/// Evaluate f_n^(p) on a uniform grid, choosing h by `rule`. When `truth` is
/// non-null the corresponding exact density derivative is tabulated alongside
/// (unsupported for sampling-only noise families).
KernelEstimate density_curve(const std::vector<double>& residuals, int p,
                             const GridSpec& grid,
                             BandwidthRule rule = BandwidthRule::min_spread,
                             const NoiseModel* truth = nullptr);

/// 401 points spanning the residual mean +/- 4.5 sample SDs.
GridSpec default_grid(const std::vector<double>& residuals);

}  // namespace nhar
