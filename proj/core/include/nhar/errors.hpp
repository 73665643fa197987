#pragma once

#include <stdexcept>
#include <string>

namespace nhar {

/// A simulated value left the representable range (explosive parameters).
class SimulationDiverged : public std::runtime_error {
public:
  explicit SimulationDiverged(const std::string& what) : std::runtime_error(what) {}
};

/// A linear system required by an estimator is rank-deficient.
class SingularSystem : public std::runtime_error {
public:
  explicit SingularSystem(const std::string& what) : std::runtime_error(what) {}
};

/// An estimated information/Hessian block is numerically singular, so no
/// covariance can be reported.
class SingularInformation : public std::runtime_error {
public:
  explicit SingularInformation(const std::string& what) : std::runtime_error(what) {}
};

/// The requested combination is outside the supported surface
/// (e.g. likelihood fitting with a sampling-only noise family).
class UnsupportedOperation : public std::runtime_error {
public:
  explicit UnsupportedOperation(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nhar
