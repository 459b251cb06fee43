#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bliss {

using Index = Eigen::Index;

/// Row-major dense matrix; one embedding per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base of every error the toolkit raises on bad input or numerics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, tables, dictionaries).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument combination supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kVersion = "1.0.0";

}  // namespace bliss
