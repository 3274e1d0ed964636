#include "streamflow/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "streamflow/error.hpp"

namespace streamflow::numerics::reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::Config, "reference::matmul: dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
      c(i, j) = acc;
    }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) { return matmul(a.transposed(), b); }

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) { return matmul(a, b.transposed()); }

Matrix masked_softmax_rows(const Matrix& scores, const BoolMatrix& mask) {
  if (scores.rows() != mask.rows() || scores.cols() != mask.cols())
    throw Error(ErrorKind::Config, "reference::masked_softmax_rows: shape mismatch");
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    float mx = std::numeric_limits<float>::lowest();
    bool any = false;
    for (std::size_t c = 0; c < scores.cols(); ++c)
      if (mask(r, c)) {
        mx = std::max(mx, scores(r, c));
        any = true;
      }
    if (!any) throw Error(ErrorKind::Invariant, "reference::masked_softmax_rows: fully masked row");
    float sum = 0.0f;
    for (std::size_t c = 0; c < scores.cols(); ++c)
      if (mask(r, c)) {
        out(r, c) = std::exp(scores(r, c) - mx);
        sum += out(r, c);
      }
    const float inv = 1.0f / sum;
    for (std::size_t c = 0; c < scores.cols(); ++c) out(r, c) = mask(r, c) ? out(r, c) * inv : 0.0f;
  }
  return out;
}

Matrix layer_norm(const Matrix& x, float eps) {
  Matrix out(x.rows(), x.cols());
  const double d = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= d;
    double var = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= d;
    const double rstd = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = static_cast<float>((x(r, c) - mean) * rstd);
  }
  return out;
}

}  // namespace streamflow::numerics::reference
