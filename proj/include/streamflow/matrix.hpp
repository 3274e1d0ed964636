#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace streamflow::numerics {

/// Dense row-major float32 matrix. Vectors are 1×n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);
  Matrix(std::initializer_list<std::initializer_list<float>> init);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  /// Copy of rows [begin, end).
  Matrix slice_rows(std::size_t begin, std::size_t end) const;
  /// Copy of columns [begin, end).
  Matrix slice_cols(std::size_t begin, std::size_t end) const;
  void set_rows(std::size_t begin, const Matrix& src);
  Matrix transposed() const;

  void fill(float value);
  bool all_finite() const;

  /// Bitwise equality of shape and contents (distinguishes +0/-0, NaN payloads).
  bool bitwise_equal(const Matrix& other) const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Row-major boolean matrix; true means attention is allowed.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  BoolMatrix(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  bool operator()(std::size_t r, std::size_t c) const noexcept { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) noexcept { bits_[r * cols_ + c] = v ? 1 : 0; }

  std::span<const std::uint8_t> row(std::size_t r) const noexcept {
    return {bits_.data() + r * cols_, cols_};
  }

  BoolMatrix transposed() const;
  std::size_t count_true() const;

  friend bool operator==(const BoolMatrix& a, const BoolMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Elementwise helpers. Shapes must match; mismatches throw a configuration error.
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, float s);
void add_inplace(Matrix& dst, const Matrix& src);
void axpy_inplace(Matrix& dst, float alpha, const Matrix& src);
/// Adds a 1×cols row vector to every row.
void add_row_broadcast(Matrix& dst, const Matrix& row);
/// Column sums as a 1×cols matrix, rows reduced in order.
Matrix column_sums(const Matrix& a);
Matrix concat_cols(const Matrix& a, const Matrix& b);
float max_abs(const Matrix& a);
float max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace streamflow::numerics
