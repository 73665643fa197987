#include "nhar/kde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nhar {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double kernel_deriv(int p, double u) {
  const double k = kInvSqrt2Pi * std::exp(-0.5 * u * u);
  switch (p) {
    case 0:
      return k;
    case 1:
      return -u * k;
    case 2:
      return (u * u - 1.0) * k;
    default:
      throw std::invalid_argument("kernel derivative order must be 0, 1 or 2");
  }
}

double sample_sd(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0));
}

// Linear interpolation of order statistics at position q*(n-1).
double quantile_linear(std::vector<double> sorted, double q) {
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) {
    return sorted.back();
  }
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Exact density derivative of order p via the score: f' = -phi_f * f and
// f'' = (phi_f^2 - phi_f') * f.
double truth_deriv(const NoiseModel& noise, int p, double x) {
  const double f = std::exp(noise.log_density(x));
  switch (p) {
    case 0:
      return f;
    case 1:
      return -noise.score_phi(x) * f;
    case 2: {
      const double phi = noise.score_phi(x);
      return (phi * phi - noise.score_phi_prime(x)) * f;
    }
    default:
      throw std::invalid_argument("density derivative order must be 0, 1 or 2");
  }
}

}  // namespace

std::vector<double> residuals(const SeriesWindow& series, const ParamVector& psi,
                              const ModelSpec& spec) {
  spec.validate();
  require_in_param_space(spec, psi);
  series.require_lags(spec.lag_order());
  std::vector<double> eps(static_cast<std::size_t>(series.n()));
  for (int i = 1; i <= series.n(); ++i) {
    const LagView z = series.z(i);
    const double sig = vol_value(spec.vol, psi.theta, z);
    eps[static_cast<std::size_t>(i - 1)] =
        (series.x(i) - mean_value(spec.mean, psi.rho, z)) / sig;
  }
  return eps;
}

double bandwidth(const std::vector<double>& residuals, BandwidthRule rule) {
  const std::size_t n = residuals.size();
  if (n < 5) {
    throw std::invalid_argument("bandwidth rule needs at least 5 residuals");
  }
  const double sd = sample_sd(residuals);
  const double iqr =
      quantile_linear(residuals, 0.75) - quantile_linear(residuals, 0.25);
  double c = 0.0;
  switch (rule) {
    case BandwidthRule::min_spread:
      c = 0.9 * std::min(sd, iqr) / 1.34;
      break;
    case BandwidthRule::classical:
      c = 0.9 * std::min(sd, iqr / 1.34);
      break;
  }
  if (!(c > 0.0)) {
    throw std::invalid_argument("residual spread is zero: bandwidth undefined");
  }
  return c * std::pow(static_cast<double>(n), -1.0 / 9.0);
}

double density_estimate(const std::vector<double>& residuals, double h, int p,
                        double x) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("bandwidth must be positive");
  }
  if (p < 0 || p > 2) {
    throw std::invalid_argument("derivative order must be 0, 1 or 2");
  }
  if (residuals.empty()) {
    throw std::invalid_argument("no residuals supplied");
  }
  double total = 0.0;
  for (double e : residuals) {
    total += kernel_deriv(p, (x - e) / h);
  }
  const double n = static_cast<double>(residuals.size());
  return total / (n * std::pow(h, p + 1));
}

KernelEstimate density_curve(const std::vector<double>& residuals, int p,
                             const GridSpec& grid, BandwidthRule rule,
                             const NoiseModel* truth) {
  if (grid.count < 2) {
    throw std::invalid_argument("grid needs at least 2 points");
  }
  if (!(grid.lo < grid.hi)) {
    throw std::invalid_argument("grid bounds must satisfy lo < hi");
  }
  KernelEstimate out;
  out.order = p;
  out.bandwidth = bandwidth(residuals, rule);
  out.n = static_cast<int>(residuals.size());
  out.grid.resize(static_cast<std::size_t>(grid.count));
  out.values.resize(static_cast<std::size_t>(grid.count));
  if (truth != nullptr) {
    out.truth.resize(static_cast<std::size_t>(grid.count));
  }
  const double step = (grid.hi - grid.lo) / (grid.count - 1);
  for (int k = 0; k < grid.count; ++k) {
    const double x = grid.lo + step * k;
    out.grid[static_cast<std::size_t>(k)] = x;
    out.values[static_cast<std::size_t>(k)] =
        density_estimate(residuals, out.bandwidth, p, x);
    if (truth != nullptr) {
      out.truth[static_cast<std::size_t>(k)] = truth_deriv(*truth, p, x);
    }
  }
  return out;
}

GridSpec default_grid(const std::vector<double>& residuals) {
  if (residuals.size() < 2) {
    throw std::invalid_argument("need at least 2 residuals for a default grid");
  }
  double mean = 0.0;
  for (double v : residuals) mean += v;
  mean /= static_cast<double>(residuals.size());
  const double sd = sample_sd(residuals);
  GridSpec g;
  g.lo = mean - 4.5 * sd;
  g.hi = mean + 4.5 * sd;
  g.count = 401;
  return g;
}

}  // namespace nhar
