#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace ersc {

// Small state/control vectors never exceed kMaxDim entries; the fixed upper
// bound keeps per-step evaluations free of heap allocation.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxDim, kMaxDim>;

// Node-indexed quantities (one entry per grid node).
using NodeVector = Eigen::VectorXd;

/// Invalid input or configuration. Maps to CLI exit status 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative solver failed to reach its tolerance. Maps to CLI exit status 3.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generator sparsity graph is not strongly connected.
class ReducibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read or written. Maps to CLI exit status 5.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ersc
