#pragma once

// OpenMP-parallel dense kernels. Every output element is produced by exactly
// one thread with a fixed reduction order, so results are bitwise identical
// for any thread count and match the serial versions in reference.hpp.

#include "streamflow/matrix.hpp"

namespace streamflow::numerics {

void set_num_threads(int threads);
int num_threads();

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

/// Row softmax restricted to allowed entries. Disallowed outputs are exactly 0.
/// Throws an invariant error if a row has no allowed entry.
Matrix masked_softmax_rows(const Matrix& scores, const BoolMatrix& mask);
Matrix softmax_rows(const Matrix& scores);

struct LayerNormResult {
  Matrix normalized;
  std::vector<float> inv_std;  // per row
};

LayerNormResult layer_norm_with_stats(const Matrix& x, float eps);
Matrix layer_norm(const Matrix& x, float eps);
/// Backward of an affine-free layer norm given the normalized output and the
/// per-row inverse std.
Matrix layer_norm_backward(const Matrix& grad_normalized, const LayerNormResult& forward);

float gelu(float x) noexcept;
float gelu_derivative(float x) noexcept;
float silu(float x) noexcept;
float silu_derivative(float x) noexcept;

Matrix gelu(const Matrix& x);
Matrix silu(const Matrix& x);

inline constexpr float kLayerNormEps = 1e-6f;

}  // namespace streamflow::numerics
