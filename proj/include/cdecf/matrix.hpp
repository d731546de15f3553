#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace cdecf {

/// Dense row-major f64 matrix. The workhorse container for embedding states,
/// solver stages and gradients.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t r) {
    assert(r < rows);
    return data.data() + r * cols;
  }
  const double* row(std::size_t r) const {
    assert(r < rows);
    return data.data() + r * cols;
  }
  double& at(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double at(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  std::size_t size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
};

inline bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  assert(a.same_shape(b));
  double md = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    md = std::max(md, std::abs(a.data[i] - b.data[i]));
  return md;
}

}  // namespace cdecf
