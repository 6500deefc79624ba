#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace assmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Thrown for violated preconditions and invalid configurations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace assmc
