#include "nhar/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "nhar/errors.hpp"

namespace nhar::io {

namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& message) {
  throw std::invalid_argument(message);
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    bad_config("cannot open file: " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    bad_config(path + ": " + ex.what());
  }
}

void check_schema(const json& j, const std::string& path) {
  if (!j.contains("schema") || !j["schema"].is_number_integer() ||
      j["schema"].get<int>() != 1) {
    bad_config(path + ": missing or unsupported \"schema\" (expected 1)");
  }
}

// Round-trippable, locale-independent double formatting for CSV.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& key) {
  if (!j.is_array()) {
    bad_config("\"" + key + "\" must be an array of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index k = 0;
  for (const json& item : j) {
    if (!item.is_number()) {
      bad_config("\"" + key + "\" must contain only numbers");
    }
    v[k++] = item.get<double>();
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    out.push_back(v[k]);
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    out.push_back(std::move(row));
  }
  return out;
}

MeanSpec mean_from_json(const json& j) {
  MeanSpec mean;
  const std::string family = j.at("family").get<std::string>();
  if (family == "constant_zero") {
    mean.family = MeanFamily::constant_zero;
  } else if (family == "linear_ar") {
    mean.family = MeanFamily::linear_ar;
  } else if (family == "expar") {
    mean.family = MeanFamily::expar;
  } else {
    bad_config("unknown mean family \"" + family + "\"");
  }
  mean.q = j.value("q", 1);
  mean.kappa = j.value("kappa", 0.0);
  mean.fix_rho0 = j.value("fix_rho0", false);
  return mean;
}

json mean_to_json(const MeanSpec& mean) {
  json j;
  switch (mean.family) {
    case MeanFamily::constant_zero:
      j["family"] = "constant_zero";
      break;
    case MeanFamily::linear_ar:
      j["family"] = "linear_ar";
      j["q"] = mean.q;
      break;
    case MeanFamily::expar:
      j["family"] = "expar";
      j["kappa"] = mean.kappa;
      j["fix_rho0"] = mean.fix_rho0;
      break;
  }
  return j;
}

VolSpec vol_from_json(const json& j) {
  VolSpec vol;
  const std::string family = j.at("family").get<std::string>();
  if (family == "constant") {
    vol.family = VolFamily::constant;
  } else if (family == "arch") {
    vol.family = VolFamily::arch;
  } else if (family == "garch11_trunc") {
    vol.family = VolFamily::garch11_trunc;
  } else {
    bad_config("unknown volatility family \"" + family + "\"");
  }
  vol.q = j.value("q", 1);
  vol.trunc_lag = j.value("trunc_lag", 50);
  return vol;
}

json vol_to_json(const VolSpec& vol) {
  json j;
  switch (vol.family) {
    case VolFamily::constant:
      j["family"] = "constant";
      break;
    case VolFamily::arch:
      j["family"] = "arch";
      j["q"] = vol.q;
      break;
    case VolFamily::garch11_trunc:
      j["family"] = "garch11_trunc";
      j["trunc_lag"] = vol.trunc_lag;
      break;
  }
  return j;
}

ModelSpec model_from_json(const json& j) {
  ModelSpec spec;
  spec.mean = mean_from_json(j.at("mean"));
  spec.vol = vol_from_json(j.at("vol"));
  spec.validate();
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  json j;
  j["mean"] = mean_to_json(spec.mean);
  j["vol"] = vol_to_json(spec.vol);
  return j;
}

ParamVector params_from_json(const json& j) {
  ParamVector psi;
  psi.rho = j.contains("rho") ? vector_from_json(j.at("rho"), "rho")
                              : Eigen::VectorXd(0);
  psi.theta = vector_from_json(j.at("theta"), "theta");
  return psi;
}

json params_to_json(const ParamVector& psi) {
  json j;
  j["rho"] = vector_to_json(psi.rho);
  j["theta"] = vector_to_json(psi.theta);
  return j;
}

NoiseModel noise_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "gaussian") {
    return NoiseModel::gaussian();
  }
  if (family == "laplace") {
    return NoiseModel::laplace();
  }
  if (family == "student_t") {
    if (!j.contains("nu")) {
      bad_config("student_t noise needs \"nu\"");
    }
    return NoiseModel::student_t(j.at("nu").get<double>());
  }
  bad_config("unknown noise family \"" + family + "\"");
}

json noise_to_json(const NoiseModel& noise) {
  json j;
  switch (noise.family()) {
    case NoiseFamily::gaussian:
      j["family"] = "gaussian";
      break;
    case NoiseFamily::laplace:
      j["family"] = "laplace";
      break;
    case NoiseFamily::student_t:
      j["family"] = "student_t";
      j["nu"] = noise.nu();
      break;
  }
  return j;
}

std::string method_to_string(Method m) {
  return m == Method::cls ? "cls" : "cml";
}

Method method_from_string(const std::string& s) {
  if (s == "cls") return Method::cls;
  if (s == "cml") return Method::cml;
  bad_config("unknown method \"" + s + "\" (expected \"cls\" or \"cml\")");
}

}  // namespace

ModelFile read_model_file(const std::string& path) {
  const json j = load_json(path);
  try {
    check_schema(j, path);
    ModelFile file;
    file.spec = model_from_json(j);
    if (j.contains("params")) {
      file.params = params_from_json(j.at("params"));
    }
    if (j.contains("noise")) {
      file.noise = noise_from_json(j.at("noise"));
    }
    return file;
  } catch (const json::exception& ex) {
    bad_config(path + ": " + ex.what());
  }
}

NoiseModel noise_from_token(const std::string& token) {
  const std::size_t colon = token.find(':');
  const std::string family = token.substr(0, colon);
  if (family == "gaussian") {
    return NoiseModel::gaussian();
  }
  if (family == "laplace") {
    return NoiseModel::laplace();
  }
  if (family == "student_t") {
    if (colon == std::string::npos) {
      bad_config("student_t needs degrees of freedom, e.g. student_t:8");
    }
    return NoiseModel::student_t(std::stod(token.substr(colon + 1)));
  }
  bad_config("unknown noise \"" + token + "\"");
}

std::string noise_to_token(const NoiseModel& noise) {
  switch (noise.family()) {
    case NoiseFamily::gaussian:
      return "gaussian";
    case NoiseFamily::laplace:
      return "laplace";
    case NoiseFamily::student_t:
      return "student_t:" + fmt_double(noise.nu());
  }
  return "gaussian";
}

std::string result_to_json_text(const EstimationResult& result, const ModelSpec& spec,
                                int n) {
  json j;
  j["schema"] = 1;
  j["method"] = method_to_string(result.method);
  j["n"] = n;
  j["model"] = model_to_json(spec);
  j["psi_hat"] = params_to_json(result.psi_hat);
  j["psi_raw"] = params_to_json(result.psi_raw);
  j["objective"] = result.objective;
  j["converged"] = result.converged;
  j["constraint_active"] = result.constraint_active;
  j["theta_clamped"] = result.theta_clamped;
  j["warnings"] = result.warnings;

  const Eigen::MatrixXd* cov = nullptr;
  if (result.cls_covariance) {
    json c;
    c["kind"] = "delta";
    c["matrix"] = matrix_to_json(result.cls_covariance->delta_hat);
    c["phi11"] = matrix_to_json(result.cls_covariance->phi11_hat);
    c["phi22"] = matrix_to_json(result.cls_covariance->phi22_hat);
    c["eps_third"] = result.cls_covariance->eps_third_hat;
    c["eps_fourth_central"] = result.cls_covariance->eps_fourth_central_hat;
    j["covariance"] = std::move(c);
    cov = &result.cls_covariance->delta_hat;
  } else if (result.cml_covariance) {
    json c;
    c["kind"] = "sandwich";
    c["matrix"] = matrix_to_json(result.cml_covariance->sandwich);
    c["info"] = matrix_to_json(result.cml_covariance->info_hat);
    c["lambda"] = matrix_to_json(result.cml_covariance->lambda_hat);
    j["covariance"] = std::move(c);
    cov = &result.cml_covariance->sandwich;
  }
  if (cov != nullptr) {
    // Standard errors of psi_hat itself: sqrt of diag(limit covariance)/n.
    const Eigen::Index ic = result.psi_hat.rho.size();
    const Eigen::Index jc = result.psi_hat.theta.size();
    json se;
    json se_rho = json::array();
    json se_theta = json::array();
    for (Eigen::Index k = 0; k < ic; ++k) {
      se_rho.push_back(std::sqrt((*cov)(k, k) / n));
    }
    for (Eigen::Index k = 0; k < jc; ++k) {
      se_theta.push_back(std::sqrt((*cov)(ic + k, ic + k) / n));
    }
    se["rho"] = std::move(se_rho);
    se["theta"] = std::move(se_theta);
    j["se"] = std::move(se);
  }
  return j.dump(2) + "\n";
}

FitDocument read_fit_result(const std::string& path) {
  const json j = load_json(path);
  try {
    check_schema(j, path);
    FitDocument doc;
    doc.spec = model_from_json(j.at("model"));
    doc.psi_hat = params_from_json(j.at("psi_hat"));
    doc.method = method_from_string(j.at("method").get<std::string>());
    return doc;
  } catch (const json::exception& ex) {
    bad_config(path + ": " + ex.what());
  }
}

ExperimentFile read_experiment_file(const std::string& path) {
  const json j = load_json(path);
  try {
    check_schema(j, path);
    const std::string kind = j.at("kind").get<std::string>();
    ExperimentFile file;
    if (kind == "table") {
      ExperimentSpec spec;
      spec.name = j.value("name", std::string("experiment"));
      spec.model = model_from_json(j.at("model"));
      if (j.contains("noise")) {
        spec.noise = noise_from_json(j.at("noise"));
      }
      spec.truths.clear();
      for (const json& row : j.at("rows")) {
        spec.truths.push_back(params_from_json(row));
      }
      spec.n_list.clear();
      for (const json& n : j.at("n_list")) {
        spec.n_list.push_back(n.get<int>());
      }
      spec.reps = j.value("reps", 1000);
      if (j.contains("methods")) {
        spec.methods.clear();
        for (const json& m : j.at("methods")) {
          spec.methods.push_back(method_from_string(m.get<std::string>()));
        }
      }
      spec.seed = j.value("seed", 0ULL);
      spec.burn_in = j.value("burn_in", 500);
      spec.validate();
      file.table = std::move(spec);
    } else if (kind == "figures") {
      FigureSpec spec;
      spec.name = j.value("name", std::string("figures"));
      spec.model = model_from_json(j.at("model"));
      if (j.contains("noise")) {
        spec.noise = noise_from_json(j.at("noise"));
      }
      spec.truth = params_from_json(j.at("params"));
      spec.n_list.clear();
      for (const json& n : j.at("n_list")) {
        spec.n_list.push_back(n.get<int>());
      }
      spec.seed = j.value("seed", 0ULL);
      spec.burn_in = j.value("burn_in", 500);
      if (j.contains("orders")) {
        spec.orders.clear();
        for (const json& p : j.at("orders")) {
          spec.orders.push_back(p.get<int>());
        }
      }
      const std::string rule = j.value("bandwidth_rule", std::string("min_spread"));
      if (rule == "min_spread") {
        spec.rule = BandwidthRule::min_spread;
      } else if (rule == "classical") {
        spec.rule = BandwidthRule::classical;
      } else {
        bad_config("unknown bandwidth_rule \"" + rule + "\"");
      }
      if (j.contains("grid")) {
        GridSpec grid;
        grid.lo = j.at("grid").at("lo").get<double>();
        grid.hi = j.at("grid").at("hi").get<double>();
        grid.count = j.at("grid").at("count").get<int>();
        spec.grid = grid;
      }
      file.figures = std::move(spec);
    } else {
      bad_config(path + ": unknown experiment kind \"" + kind + "\"");
    }
    return file;
  } catch (const json::exception& ex) {
    bad_config(path + ": " + ex.what());
  }
}

void write_series_csv(const std::string& path, const SeriesWindow& series) {
  std::ofstream out(path);
  if (!out) {
    bad_config("cannot write file: " + path);
  }
  out << "t,x,presample\n";
  const int pre = series.pre_count();
  const std::vector<double>& values = series.storage();
  for (int k = 0; k < static_cast<int>(values.size()); ++k) {
    const int t = k - pre + 1;
    out << t << ',' << fmt_double(values[static_cast<std::size_t>(k)]) << ','
        << (t <= 0 ? 1 : 0) << '\n';
  }
}

SeriesData read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    bad_config("cannot open file: " + path);
  }
  SeriesData data;
  std::string line;
  bool header_done = false;
  int x_col = -1;
  int presample_col = -1;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      fields.push_back(field);
    }
    if (!header_done) {
      header_done = true;
      // A header row contains column names; a bare numeric file has none.
      bool is_header = false;
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (fields[c] == "x") {
          x_col = static_cast<int>(c);
          is_header = true;
        } else if (fields[c] == "presample") {
          presample_col = static_cast<int>(c);
          is_header = true;
        } else if (fields[c] == "t") {
          is_header = true;
        }
      }
      if (is_header) {
        if (x_col < 0) {
          bad_config(path + ": header has no \"x\" column");
        }
        continue;
      }
      x_col = fields.size() > 1 ? 1 : 0;  // bare t,x or single-column file
    }
    if (static_cast<int>(fields.size()) <= x_col) {
      bad_config(path + ": line " + std::to_string(line_no) + " has too few fields");
    }
    double value = 0.0;
    try {
      value = std::stod(fields[static_cast<std::size_t>(x_col)]);
    } catch (const std::exception&) {
      bad_config(path + ": line " + std::to_string(line_no) + " is not numeric");
    }
    bool is_pre = false;
    if (presample_col >= 0 && presample_col < static_cast<int>(fields.size())) {
      is_pre = fields[static_cast<std::size_t>(presample_col)] == "1";
    }
    (is_pre ? data.pre : data.obs).push_back(value);
  }
  if (data.obs.empty()) {
    bad_config(path + ": no observations found");
  }
  return data;
}

SeriesWindow series_for_lags(const SeriesData& data, int q) {
  if (static_cast<int>(data.pre.size()) >= q) {
    return SeriesWindow(data.pre, data.obs);
  }
  if (!data.pre.empty()) {
    bad_config("presample has fewer values than the model's lag order");
  }
  if (static_cast<int>(data.obs.size()) <= q) {
    bad_config("series too short to provide the model's conditioning lags");
  }
  const std::vector<double> pre(data.obs.begin(), data.obs.begin() + q);
  const std::vector<double> obs(data.obs.begin() + q, data.obs.end());
  return SeriesWindow(pre, obs);
}

void write_curve_csv(const std::string& path, const KernelEstimate& curve) {
  std::ofstream out(path);
  if (!out) {
    bad_config("cannot write file: " + path);
  }
  out << "# order=" << curve.order << ",bandwidth=" << fmt_double(curve.bandwidth)
      << ",n=" << curve.n << '\n';
  const bool with_truth = !curve.truth.empty();
  out << (with_truth ? "x,estimate,truth\n" : "x,estimate\n");
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    out << fmt_double(curve.grid[k]) << ',' << fmt_double(curve.values[k]);
    if (with_truth) {
      out << ',' << fmt_double(curve.truth[k]);
    }
    out << '\n';
  }
}

void write_report_csv(const std::string& path, const MCReport& report) {
  std::ofstream out(path);
  if (!out) {
    bad_config("cannot write file: " + path);
  }
  out << "# experiment=" << report.name << '\n';
  for (const std::string& p : report.param_names) {
    out << "truth_" << p << ',';
  }
  out << "n,method,";
  for (const std::string& p : report.param_names) {
    out << "mean_" << p << ',';
  }
  for (const std::string& p : report.param_names) {
    out << "sd_" << p << ',';
  }
  for (const std::string& p : report.param_names) {
    out << "bias_" << p << ',';
  }
  out << "failures\n";
  for (const CellReport& cell : report.cells) {
    const Eigen::VectorXd truth = [&] {
      Eigen::VectorXd v(cell.truth.rho.size() + cell.truth.theta.size());
      v << cell.truth.rho, cell.truth.theta;
      return v;
    }();
    for (Eigen::Index k = 0; k < truth.size(); ++k) {
      out << fmt_double(truth[k]) << ',';
    }
    out << cell.n << ',' << method_to_string(cell.method) << ',';
    for (Eigen::Index k = 0; k < cell.mean.size(); ++k) {
      out << fmt_double(cell.mean[k]) << ',';
    }
    for (Eigen::Index k = 0; k < cell.sd.size(); ++k) {
      out << fmt_double(cell.sd[k]) << ',';
    }
    for (Eigen::Index k = 0; k < cell.bias.size(); ++k) {
      out << fmt_double(cell.bias[k]) << ',';
    }
    out << cell.failures << '\n';
  }
}

}  // namespace nhar::io
