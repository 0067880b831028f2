#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dlearn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid tuning parameter (penalty, step size, forgetting factor, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unusable topology.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a model precondition (non-PD covariance, zero density, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of budget. Carries the last residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + format(residual) + ")"), residual_(residual) {}

  double residual() const { return residual_; }

 private:
  static std::string format(double value) {
    std::ostringstream os;
    os << value;
    return os.str();
  }
  double residual_;
};

/// A node's local solve failed inside a network run.
class NodeSolveError : public Error {
 public:
  NodeSolveError(std::size_t node, std::size_t iteration, const std::string& cause)
      : Error("node " + std::to_string(node) + " failed at iteration " +
              std::to_string(iteration) + ": " + cause),
        node_(node),
        iteration_(iteration) {}

  std::size_t node() const { return node_; }
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t node_;
  std::size_t iteration_;
};

}  // namespace dlearn
