#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fsl/errors.hpp"

namespace fsl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Rows hold feature vectors throughout the
// library; a 0x0 matrix is a valid empty value.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<Vec>& rows) {
    Matrix m;
    if (rows.empty()) return m;
    m.rows_ = rows.size();
    m.cols_ = rows.front().size();
    m.data_.reserve(m.rows_ * m.cols_);
    for (const Vec& r : rows) {
      if (r.size() != m.cols_)
        raise(errc::shape_error, "ragged rows: expected " + std::to_string(m.cols_) +
                                     " columns, got " + std::to_string(r.size()));
      m.data_.insert(m.data_.end(), r.begin(), r.end());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vec row_copy(std::size_t i) const {
    auto r = row(i);
    return Vec(r.begin(), r.end());
  }

  void set_row(std::size_t i, std::span<const double> v) {
    if (v.size() != cols_) raise(errc::shape_error, "row length mismatch");
    std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }

  void append_row(std::span<const double> v) {
    if (rows_ == 0 && cols_ == 0) cols_ = v.size();
    if (v.size() != cols_) raise(errc::shape_error, "row length mismatch");
    data_.insert(data_.end(), v.begin(), v.end());
    ++rows_;
  }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(std::span<const double>(m.data())); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) raise(errc::shape_error, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) raise(errc::shape_error, "squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Per-coordinate mean of the rows.
inline Vec mean_row(const Matrix& m) {
  if (m.empty()) raise(errc::empty_set, "mean_row of empty matrix");
  Vec mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += r[j];
  }
  for (double& x : mean) x /= static_cast<double>(m.rows());
  return mean;
}

// Numerically stable softmax (max subtraction).
inline Vec softmax(std::span<const double> logits) {
  if (logits.empty()) raise(errc::invalid_input, "softmax of empty vector");
  if (!all_finite(logits)) raise(errc::invalid_input, "softmax: non-finite logit");
  double m = logits[0];
  for (double x : logits) m = std::max(m, x);
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

inline Vec softmax(const Vec& logits) { return softmax(std::span<const double>(logits)); }

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) raise(errc::shape_error, "cosine_similarity: length mismatch");
  double na = norm(a);
  double nb = norm(b);
  if (na == 0.0 || nb == 0.0) raise(errc::degenerate_vector, "cosine_similarity: zero-norm input");
  double c = dot(a, b) / (na * nb);
  // rounding can push |c| a hair past 1
  return std::clamp(c, -1.0, 1.0);
}

// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax_lowest(std::span<const double> v) {
  if (v.empty()) raise(errc::invalid_input, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace fsl
