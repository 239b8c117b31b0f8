#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace pharl {

// Dense row-major matrix of doubles. Rows are the unit of access everywhere
// in this codebase (one row per window / embedding / parameter vector).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {}

  double* row(int i) { return data.data() + std::size_t(i) * cols; }
  const double* row(int i) const { return data.data() + std::size_t(i) * cols; }

  std::span<double> row_span(int i) { return {row(i), std::size_t(cols)}; }
  std::span<const double> row_span(int i) const {
    return {row(i), std::size_t(cols)};
  }

  double& at(int i, int j) { return data[std::size_t(i) * cols + j]; }
  double at(int i, int j) const { return data[std::size_t(i) * cols + j]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return dot(a.data(), b.data(), int(a.size()));
}

inline double norm2(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

inline double squared_distance(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace pharl
