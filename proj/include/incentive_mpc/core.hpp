#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace incentive_mpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteObjective : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConeViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InfeasibleStep : public std::runtime_error {
 public:
  InfeasibleStep(const std::string& condition, const std::string& detail)
      : std::runtime_error(condition + ": " + detail), condition_(condition) {}
  const std::string& condition() const { return condition_; }

 private:
  std::string condition_;
};

inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": size " + std::to_string(a) +
                         " != " + std::to_string(b));
  }
}

}  // namespace incentive_mpc
