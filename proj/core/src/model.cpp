#include "nhar/model.hpp"

#include <cmath>
#include <stdexcept>

#include "nhar/errors.hpp"

namespace nhar {
namespace {

std::atomic<std::uint64_t> g_floor_count{0};

void check_dim(const Eigen::VectorXd& v, int want, const char* what) {
  if (v.size() != want) {
    throw std::invalid_argument(std::string(what) + ": expected length " +
                                std::to_string(want) + ", got " + std::to_string(v.size()));
  }
}

void check_lags(const LagView& z, int q) {
  if (z.count() < q) {
    throw std::invalid_argument("lag vector shorter than the model order");
  }
}

void check_theta(const VolSpec& vol, const Eigen::VectorXd& theta) {
  check_dim(theta, vol.param_count(), "theta");
  switch (vol.family) {
    case VolFamily::constant:
    case VolFamily::arch:
      if (!(theta[0] > 0.0)) throw std::invalid_argument("theta0 must be > 0");
      for (int j = 1; j < theta.size(); ++j) {
        if (theta[j] < 0.0) throw std::invalid_argument("theta" + std::to_string(j) + " must be >= 0");
      }
      break;
    case VolFamily::garch11_trunc:
      if (!(theta[0] > 0.0)) throw std::invalid_argument("garch c must be > 0");
      if (theta[1] < 0.0 || theta[2] < 0.0) throw std::invalid_argument("garch a, b must be >= 0");
      if (!(theta[1] + theta[2] < 1.0)) throw std::invalid_argument("garch requires a + b < 1");
      break;
  }
}

/// sigma^2 and, via out parameters, its gradient/Hessian in theta.
double vol_sq(const VolSpec& vol, const Eigen::VectorXd& theta, const LagView& z,
              Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  switch (vol.family) {
    case VolFamily::constant:
      if (grad) *grad = Eigen::VectorXd::Ones(1);
      if (hess) *hess = Eigen::MatrixXd::Zero(1, 1);
      return theta[0];
    case VolFamily::arch: {
      double s2 = theta[0];
      if (grad) {
        grad->resize(vol.q + 1);
        (*grad)[0] = 1.0;
      }
      for (int j = 1; j <= vol.q; ++j) {
        const double zj2 = z.lag(j) * z.lag(j);
        s2 += theta[j] * zj2;
        if (grad) (*grad)[j] = zj2;
      }
      if (hess) *hess = Eigen::MatrixXd::Zero(vol.q + 1, vol.q + 1);
      return s2;
    }
    case VolFamily::garch11_trunc: {
      const double c = theta[0], a = theta[1], b = theta[2];
      const int L = vol.trunc_lag;
      const double one_minus_a = 1.0 - a;
      double sum = 0.0;       // sum a^{j-1} z_j^2
      double dsum = 0.0;      // d/da: sum (j-1) a^{j-2} z_j^2
      double ddsum = 0.0;     // d2/da2: sum (j-1)(j-2) a^{j-3} z_j^2
      double apow = 1.0;      // a^{j-1}
      for (int j = 1; j <= L; ++j) {
        const double zj2 = z.lag(j) * z.lag(j);
        sum += apow * zj2;
        if (j >= 2) {
          const double ap2 = (j == 2) ? 1.0 : std::pow(a, j - 2);
          dsum += (j - 1) * ap2 * zj2;
          if (j >= 3) ddsum += static_cast<double>(j - 1) * (j - 2) * std::pow(a, j - 3) * zj2;
        }
        apow *= a;
      }
      const double s2 = c / one_minus_a + b * sum;
      if (grad) {
        grad->resize(3);
        (*grad)[0] = 1.0 / one_minus_a;
        (*grad)[1] = c / (one_minus_a * one_minus_a) + b * dsum;
        (*grad)[2] = sum;
      }
      if (hess) {
        hess->setZero(3, 3);
        (*hess)(0, 1) = (*hess)(1, 0) = 1.0 / (one_minus_a * one_minus_a);
        (*hess)(1, 1) = 2.0 * c / (one_minus_a * one_minus_a * one_minus_a) + b * ddsum;
        (*hess)(1, 2) = (*hess)(2, 1) = dsum;
      }
      return s2;
    }
  }
  return 0.0;  // unreachable
}

}  // namespace

int MeanSpec::param_count() const {
  switch (family) {
    case MeanFamily::constant_zero: return 0;
    case MeanFamily::linear_ar: return q;
    case MeanFamily::expar: return fix_rho0 ? 1 : 2;
  }
  return 0;
}

int MeanSpec::lag_order() const {
  switch (family) {
    case MeanFamily::constant_zero: return 0;
    case MeanFamily::linear_ar: return q;
    case MeanFamily::expar: return 1;
  }
  return 0;
}

int VolSpec::param_count() const {
  switch (family) {
    case VolFamily::constant: return 1;
    case VolFamily::arch: return q + 1;
    case VolFamily::garch11_trunc: return 3;
  }
  return 0;
}

int VolSpec::lag_order() const {
  switch (family) {
    case VolFamily::constant: return 0;
    case VolFamily::arch: return q;
    case VolFamily::garch11_trunc: return trunc_lag;
  }
  return 0;
}

int ModelSpec::lag_order() const { return std::max(mean.lag_order(), vol.lag_order()); }

void ModelSpec::validate() const {
  if (mean.family == MeanFamily::linear_ar && mean.q < 1) {
    throw std::invalid_argument("linear_ar requires q >= 1");
  }
  if (mean.family == MeanFamily::expar && mean.kappa < 0.0) {
    throw std::invalid_argument("expar kappa must be >= 0");
  }
  if (vol.family == VolFamily::arch && vol.q < 1) {
    throw std::invalid_argument("arch requires q >= 1");
  }
  if (vol.family == VolFamily::garch11_trunc && vol.trunc_lag < 1) {
    throw std::invalid_argument("garch11_trunc requires trunc_lag >= 1");
  }
}

bool in_param_space(const ModelSpec& spec, const ParamVector& psi) {
  if (psi.rho.size() != spec.mean_param_count()) return false;
  try {
    check_theta(spec.vol, psi.theta);
  } catch (const std::invalid_argument&) {
    return false;
  }
  return true;
}

void require_in_param_space(const ModelSpec& spec, const ParamVector& psi) {
  check_dim(psi.rho, spec.mean_param_count(), "rho");
  check_theta(spec.vol, psi.theta);
}

std::vector<std::string> rho_names(const MeanSpec& mean) {
  switch (mean.family) {
    case MeanFamily::constant_zero: return {};
    case MeanFamily::linear_ar: {
      std::vector<std::string> out;
      for (int j = 1; j <= mean.q; ++j) out.push_back("rho" + std::to_string(j));
      return out;
    }
    case MeanFamily::expar:
      return mean.fix_rho0 ? std::vector<std::string>{"rho1"}
                           : std::vector<std::string>{"rho0", "rho1"};
  }
  return {};
}

std::vector<std::string> theta_names(const VolSpec& vol) {
  switch (vol.family) {
    case VolFamily::constant: return {"theta0"};
    case VolFamily::arch: {
      std::vector<std::string> out;
      for (int j = 0; j <= vol.q; ++j) out.push_back("theta" + std::to_string(j));
      return out;
    }
    case VolFamily::garch11_trunc: return {"c", "a", "b"};
  }
  return {};
}

SeriesWindow::SeriesWindow(std::vector<double> pre, std::vector<double> obs)
    : pre_count_(static_cast<int>(pre.size())) {
  if (obs.empty()) throw std::invalid_argument("SeriesWindow: no observations");
  values_ = std::move(pre);
  values_.insert(values_.end(), obs.begin(), obs.end());
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("SeriesWindow: non-finite value");
  }
}

void SeriesWindow::require_lags(int q) const {
  if (pre_count_ < q) {
    throw std::invalid_argument("series carries " + std::to_string(pre_count_) +
                                " pre-sample values but the model needs " + std::to_string(q));
  }
}

double mean_value(const MeanSpec& mean, const Eigen::VectorXd& rho, const LagView& z) {
  check_dim(rho, mean.param_count(), "rho");
  check_lags(z, mean.lag_order());
  switch (mean.family) {
    case MeanFamily::constant_zero:
      return 0.0;
    case MeanFamily::linear_ar: {
      double m = 0.0;
      for (int j = 1; j <= mean.q; ++j) m += rho[j - 1] * z.lag(j);
      return m;
    }
    case MeanFamily::expar: {
      const double z1 = z.lag(1);
      const double decay = std::exp(-mean.kappa * z1 * z1);
      return mean.fix_rho0 ? rho[0] * decay * z1 : (rho[0] + rho[1] * decay) * z1;
    }
  }
  return 0.0;
}

Eigen::VectorXd mean_gradient(const MeanSpec& mean, const Eigen::VectorXd& rho,
                              const LagView& z) {
  check_dim(rho, mean.param_count(), "rho");
  check_lags(z, mean.lag_order());
  switch (mean.family) {
    case MeanFamily::constant_zero:
      return Eigen::VectorXd(0);
    case MeanFamily::linear_ar: {
      Eigen::VectorXd g(mean.q);
      for (int j = 1; j <= mean.q; ++j) g[j - 1] = z.lag(j);
      return g;
    }
    case MeanFamily::expar: {
      const double z1 = z.lag(1);
      const double dz = std::exp(-mean.kappa * z1 * z1) * z1;
      if (mean.fix_rho0) {
        Eigen::VectorXd g(1);
        g[0] = dz;
        return g;
      }
      Eigen::VectorXd g(2);
      g[0] = z1;
      g[1] = dz;
      return g;
    }
  }
  return Eigen::VectorXd(0);
}

Eigen::MatrixXd mean_hessian(const MeanSpec& mean, const Eigen::VectorXd& rho,
                             const LagView& z) {
  check_dim(rho, mean.param_count(), "rho");
  check_lags(z, mean.lag_order());
  // Every built-in mean is linear in rho for fixed kappa.
  const int I = mean.param_count();
  return Eigen::MatrixXd::Zero(I, I);
}

std::uint64_t vol_floor_count() { return g_floor_count.load(std::memory_order_relaxed); }
void reset_vol_floor_count() { g_floor_count.store(0, std::memory_order_relaxed); }

double vol_value(const VolSpec& vol, const Eigen::VectorXd& theta, const LagView& z) {
  check_theta(vol, theta);
  check_lags(z, vol.lag_order());
  const double s2 = vol_sq(vol, theta, z, nullptr, nullptr);
  const double s = std::sqrt(std::max(s2, 0.0));
  if (s < kVolFloor) {
    g_floor_count.fetch_add(1, std::memory_order_relaxed);
    return kVolFloor;
  }
  return s;
}

Eigen::VectorXd vol_gradient(const VolSpec& vol, const Eigen::VectorXd& theta,
                             const LagView& z) {
  check_theta(vol, theta);
  check_lags(z, vol.lag_order());
  Eigen::VectorXd g2;
  const double s2 = vol_sq(vol, theta, z, &g2, nullptr);
  // d sigma / d theta = d(sigma^2)/d theta / (2 sigma); the floor only guards
  // degenerate evaluation points, derivatives assume the interior.
  const double s = std::max(std::sqrt(std::max(s2, 0.0)), kVolFloor);
  return g2 / (2.0 * s);
}

Eigen::MatrixXd vol_hessian(const VolSpec& vol, const Eigen::VectorXd& theta,
                            const LagView& z) {
  check_theta(vol, theta);
  check_lags(z, vol.lag_order());
  Eigen::VectorXd g2;
  Eigen::MatrixXd h2;
  const double s2 = vol_sq(vol, theta, z, &g2, &h2);
  const double s = std::max(std::sqrt(std::max(s2, 0.0)), kVolFloor);
  // sigma = sqrt(v): d2 sigma = d2v/(2 sigma) - dv dv' / (4 sigma^3).
  return h2 / (2.0 * s) - (g2 * g2.transpose()) / (4.0 * s * s * s);
}

namespace {

SeriesWindow simulate_impl(const ModelSpec& spec, const ParamVector& psi,
                           const NoiseSampler& sampler, int n, int burn_in,
                           std::uint64_t seed) {
  spec.validate();
  require_in_param_space(spec, psi);
  if (n < 1) throw std::invalid_argument("simulate_series: n must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("simulate_series: burn_in must be >= 0");

  const int q = spec.lag_order();
  Rng g(seed);
  // Zero initial lags, then burn_in + n recursion steps; the returned window
  // is the last q + n values of the whole sequence (including the zero start
  // if burn_in < q). At least one pad value keeps the lag pointer valid for
  // lag-free models.
  const int pad = std::max(q, 1);
  std::vector<double> seq(static_cast<std::size_t>(pad), 0.0);
  seq.reserve(static_cast<std::size_t>(pad + burn_in + n));
  const int steps = burn_in + n;
  for (int t = 0; t < steps; ++t) {
    const LagView z(seq.data() + seq.size() - 1, q);
    const double m = mean_value(spec.mean, psi.rho, z);
    const double s = vol_value(spec.vol, psi.theta, z);
    const double x = m + s * sampler(g);
    if (!std::isfinite(x) || std::abs(x) > 1e150) {
      throw SimulationDiverged("simulation diverged at step " + std::to_string(t + 1) +
                               " (|x| leaving the representable range)");
    }
    seq.push_back(x);
  }
  std::vector<double> pre(seq.end() - (q + n), seq.end() - n);
  std::vector<double> obs(seq.end() - n, seq.end());
  return SeriesWindow(std::move(pre), std::move(obs));
}

}  // namespace

SeriesWindow simulate_series(const ModelSpec& spec, const ParamVector& psi,
                             const NoiseModel& noise, int n, int burn_in,
                             std::uint64_t seed) {
  return simulate_impl(
      spec, psi, [&noise](Rng& g) { return noise.sample_one(g); }, n, burn_in, seed);
}

SeriesWindow simulate_series(const ModelSpec& spec, const ParamVector& psi,
                             const NoiseSampler& sampler, int n, int burn_in,
                             std::uint64_t seed) {
  return simulate_impl(spec, psi, sampler, n, burn_in, seed);
}

}  // namespace nhar
