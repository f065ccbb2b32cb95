#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nlrec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not match what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A rank-deficient input where full rank is required (retraction, sensing matrix).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during a solve.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Backtracking exhausted its budget without sufficient decrease.
class LineSearchFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                          const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

}  // namespace nlrec
