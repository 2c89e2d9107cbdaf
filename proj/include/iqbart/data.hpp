#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace iqbart {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::vector<double> column(std::size_t j) const;
};

/// Covariates x (n x d) and responses y (n x k).
struct Dataset {
  Matrix x;
  Matrix y;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;

  std::size_t size() const { return x.rows; }
  /// Throws InputError on shape mismatch, NonFiniteError on NaN/inf.
  void validate() const;
};

}  // namespace iqbart
