#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace vspsfc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ErrorKind {
  NonPhysical,
  SpeedBoundViolation,
  OutOfChart,
  DegenerateOperatingPoint,
  DimensionMismatch,
  SingularInnovation,
  EmptyTrace,
  MismatchedScenarios,
  NoFeasiblePoint,
  ConfigInvalid,
  SimulationAbort,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonPhysical: return "NonPhysical";
    case ErrorKind::SpeedBoundViolation: return "SpeedBoundViolation";
    case ErrorKind::OutOfChart: return "OutOfChart";
    case ErrorKind::DegenerateOperatingPoint: return "DegenerateOperatingPoint";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularInnovation: return "SingularInnovation";
    case ErrorKind::EmptyTrace: return "EmptyTrace";
    case ErrorKind::MismatchedScenarios: return "MismatchedScenarios";
    case ErrorKind::NoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::SimulationAbort: return "SimulationAbort";
  }
  return "Unknown";
}

}  // namespace vspsfc
