#pragma once

// Serial reference kernels. Same reduction order as kernels.hpp; kept for
// equivalence tests and as the baseline in the kernel benchmark.

#include "streamflow/matrix.hpp"

namespace streamflow::numerics::reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix masked_softmax_rows(const Matrix& scores, const BoolMatrix& mask);
Matrix layer_norm(const Matrix& x, float eps);

}  // namespace streamflow::numerics::reference
