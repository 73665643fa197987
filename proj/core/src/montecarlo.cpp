#include "nhar/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <thread>
#include <utility>

namespace nhar {

namespace {

// Compensated (Kahan) summation so aggregation error does not depend on the
// summation batch size.
class KahanSum {
public:
  void add(double v) {
    const double y = v - c_;
    const double t = sum_ + y;
    c_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    jobs = hw == 0 ? 1 : static_cast<int>(hw);
  }
  jobs = std::min(jobs, count);
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        body(i);
      }
    });
  }
  for (std::thread& t : workers) {
    t.join();
  }
}

Eigen::VectorXd stack_params(const ParamVector& psi) {
  Eigen::VectorXd v(psi.rho.size() + psi.theta.size());
  v << psi.rho, psi.theta;
  return v;
}

struct RepSlot {
  bool ok = false;
  Eigen::VectorXd estimate;
  std::string error;
};

}  // namespace

void ExperimentSpec::validate() const {
  model.validate();
  if (truths.empty()) {
    throw std::invalid_argument("experiment has no parameter rows");
  }
  for (const ParamVector& truth : truths) {
    require_in_param_space(model, truth);
  }
  if (n_list.empty()) {
    throw std::invalid_argument("experiment has no sample sizes");
  }
  for (int n : n_list) {
    if (n <= model.mean_param_count() + model.vol_param_count()) {
      throw std::invalid_argument("sample size too small for the parameter count");
    }
  }
  if (reps < 1) {
    throw std::invalid_argument("reps must be >= 1");
  }
  if (methods.empty()) {
    throw std::invalid_argument("experiment requests no estimation methods");
  }
  for (Method m : methods) {
    if (m == Method::cml && !noise.cml_eligible()) {
      throw std::invalid_argument(
          "cml requested but the noise family is sampling-only");
    }
    if (m == Method::cml && noise_override.has_value()) {
      throw std::invalid_argument(
          "cml requested together with a sampler override (no density)");
    }
  }
  if (burn_in < 0) {
    throw std::invalid_argument("burn_in must be nonnegative");
  }
}

MCReport run_experiment(const ExperimentSpec& spec, int jobs) {
  spec.validate();
  MCReport report;
  report.name = spec.name;
  for (const std::string& s : rho_names(spec.model.mean)) {
    report.param_names.push_back(s);
  }
  for (const std::string& s : theta_names(spec.model.vol)) {
    report.param_names.push_back(s);
  }
  const int dim = spec.model.mean_param_count() + spec.model.vol_param_count();
  const int n_count = static_cast<int>(spec.n_list.size());

  for (int row = 0; row < static_cast<int>(spec.truths.size()); ++row) {
    for (int ni = 0; ni < n_count; ++ni) {
      const int n = spec.n_list[static_cast<std::size_t>(ni)];
      const std::uint64_t cell =
          static_cast<std::uint64_t>(row) * static_cast<std::uint64_t>(n_count) +
          static_cast<std::uint64_t>(ni);
      // One slot per (method, rep): results are written by index, so the
      // aggregate below is independent of worker scheduling.
      std::vector<std::vector<RepSlot>> slots(
          spec.methods.size(),
          std::vector<RepSlot>(static_cast<std::size_t>(spec.reps)));

      parallel_for(spec.reps, jobs, [&](int rep) {
        const std::uint64_t rep_seed =
            replication_seed(spec.seed, cell, static_cast<std::uint64_t>(rep));
        std::optional<SeriesWindow> series;
        std::string sim_error;
        try {
          const ParamVector& truth = spec.truths[static_cast<std::size_t>(row)];
          if (spec.noise_override.has_value()) {
            NoiseSampler sampler = (*spec.noise_override)();
            series.emplace(simulate_series(spec.model, truth, sampler, n,
                                           spec.burn_in, rep_seed));
          } else {
            series.emplace(simulate_series(spec.model, truth, spec.noise, n,
                                           spec.burn_in, rep_seed));
          }
        } catch (const std::exception& ex) {
          sim_error = ex.what();
        }
        for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
          RepSlot& slot = slots[mi][static_cast<std::size_t>(rep)];
          if (!series) {
            slot.error = sim_error;
            continue;
          }
          try {
            if (spec.methods[mi] == Method::cls) {
              FitOptions options;
              options.with_covariance = false;
              EstimationResult fit =
                  fit_cls(*series, spec.model, WeightSpec{}, options);
              if (!fit.converged) {
                slot.error = "least-squares step did not converge";
                continue;
              }
              slot.estimate = stack_params(fit.psi_raw);
            } else {
              CmlOptions options;
              options.with_covariance = false;
              EstimationResult fit = fit_cml(*series, spec.model, spec.noise, options);
              if (!fit.converged) {
                slot.error = "likelihood maximization did not converge";
                continue;
              }
              slot.estimate = stack_params(fit.psi_hat);
            }
            slot.ok = true;
          } catch (const std::exception& ex) {
            slot.error = ex.what();
          }
        }
      });

      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        CellReport out;
        out.row = row;
        out.n = n;
        out.method = spec.methods[mi];
        out.truth = spec.truths[static_cast<std::size_t>(row)];
        out.reps = spec.reps;
        std::vector<KahanSum> sums(static_cast<std::size_t>(dim));
        int ok_count = 0;
        for (const RepSlot& slot : slots[mi]) {
          if (!slot.ok) {
            ++out.failures;
            if (out.first_error.empty()) {
              out.first_error = slot.error;
            }
            continue;
          }
          ++ok_count;
          for (int k = 0; k < dim; ++k) {
            sums[static_cast<std::size_t>(k)].add(slot.estimate[k]);
          }
        }
        out.mean = Eigen::VectorXd::Constant(dim, std::nan(""));
        out.sd = Eigen::VectorXd::Constant(dim, std::nan(""));
        out.bias = Eigen::VectorXd::Constant(dim, std::nan(""));
        if (ok_count > 0) {
          for (int k = 0; k < dim; ++k) {
            out.mean[k] = sums[static_cast<std::size_t>(k)].value() / ok_count;
          }
          out.bias = out.mean - stack_params(out.truth);
        }
        if (ok_count > 1) {
          std::vector<KahanSum> sq(static_cast<std::size_t>(dim));
          for (const RepSlot& slot : slots[mi]) {
            if (!slot.ok) continue;
            for (int k = 0; k < dim; ++k) {
              const double d = slot.estimate[k] - out.mean[k];
              sq[static_cast<std::size_t>(k)].add(d * d);
            }
          }
          for (int k = 0; k < dim; ++k) {
            out.sd[k] =
                std::sqrt(sq[static_cast<std::size_t>(k)].value() / (ok_count - 1));
          }
        }
        report.cells.push_back(std::move(out));
      }
    }
  }
  return report;
}

FigureBundle run_figure_experiment(const FigureSpec& spec) {
  spec.model.validate();
  require_in_param_space(spec.model, spec.truth);
  if (spec.n_list.empty()) {
    throw std::invalid_argument("figure experiment has no sample sizes");
  }
  for (int p : spec.orders) {
    if (p < 0 || p > 2) {
      throw std::invalid_argument("curve order must be 0, 1 or 2");
    }
  }
  FigureBundle bundle;
  bundle.name = spec.name;
  const bool has_density = spec.noise.cml_eligible();
  for (std::size_t ni = 0; ni < spec.n_list.size(); ++ni) {
    const int n = spec.n_list[ni];
    const std::uint64_t seed =
        replication_seed(spec.seed, static_cast<std::uint64_t>(ni), 0);
    SeriesWindow series =
        simulate_series(spec.model, spec.truth, spec.noise, n, spec.burn_in, seed);
    FitOptions options;
    options.with_covariance = false;
    const EstimationResult fit = fit_cls(series, spec.model, WeightSpec{}, options);
    const std::vector<double> eps = residuals(series, fit.psi_hat, spec.model);
    const GridSpec grid = spec.grid ? *spec.grid : default_grid(eps);
    for (int p : spec.orders) {
      FigureCurve curve;
      curve.n = n;
      curve.estimate = density_curve(eps, p, grid, spec.rule,
                                     has_density ? &spec.noise : nullptr);
      bundle.curves.push_back(std::move(curve));
    }
  }
  return bundle;
}

}  // namespace nhar
