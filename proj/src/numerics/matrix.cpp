#include "streamflow/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "streamflow/error.hpp"

namespace streamflow::numerics {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::Config, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                       std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                       std::to_string(b.cols()));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::Config, "matrix data length " + std::to_string(data_.size()) + " != " +
                                       std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<float>> init) {
  rows_ = init.size();
  cols_ = rows_ == 0 ? 0 : init.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : init) {
    if (r.size() != cols_) throw Error(ErrorKind::Config, "ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

Matrix Matrix::row_vector(std::span<const float> values) {
  return Matrix(1, values.size(), std::vector<float>(values.begin(), values.end()));
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw Error(ErrorKind::Config, "slice_rows out of range");
  return Matrix(end - begin, cols_,
                std::vector<float>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                   data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

Matrix Matrix::slice_cols(std::size_t begin, std::size_t end) const {
  if (begin > end || end > cols_) throw Error(ErrorKind::Config, "slice_cols out of range");
  Matrix out(rows_, end - begin);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_ + begin),
              data_.begin() + static_cast<std::ptrdiff_t>(r * cols_ + end), out.row(r).begin());
  }
  return out;
}

void Matrix::set_rows(std::size_t begin, const Matrix& src) {
  if (src.cols() != cols_ || begin + src.rows() > rows_) throw Error(ErrorKind::Config, "set_rows out of range");
  std::copy(src.data_.begin(), src.data_.end(), data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_));
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Matrix::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

bool Matrix::bitwise_equal(const Matrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

BoolMatrix BoolMatrix::transposed() const {
  BoolMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t.set(c, r, (*this)(r, c));
  return t;
}

std::size_t BoolMatrix::count_true() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  add_inplace(out, b);
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

Matrix scale(const Matrix& a, float s) {
  Matrix out = a;
  for (float& v : out.values()) v *= s;
  return out;
}

void add_inplace(Matrix& dst, const Matrix& src) {
  require_same_shape(dst, src, "add");
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

void axpy_inplace(Matrix& dst, float alpha, const Matrix& src) {
  require_same_shape(dst, src, "axpy");
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += alpha * src.data()[i];
}

void add_row_broadcast(Matrix& dst, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != dst.cols()) throw Error(ErrorKind::Config, "add_row_broadcast: shape mismatch");
  for (std::size_t r = 0; r < dst.rows(); ++r) {
    auto out = dst.row(r);
    for (std::size_t c = 0; c < dst.cols(); ++c) out[c] += row(0, c);
  }
}

Matrix column_sums(const Matrix& a) {
  Matrix out(1, a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) out(0, c) += in[c];
  }
  return out;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorKind::Config, "concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

float max_abs(const Matrix& a) {
  float m = 0.0f;
  for (float v : a.values()) m = std::max(m, std::fabs(v));
  return m;
}

float max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace streamflow::numerics
