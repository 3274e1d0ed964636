#include "streamflow/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "streamflow/error.hpp"

namespace streamflow::numerics {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 14;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Config, what);
}

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

void set_num_threads(int threads) { omp_set_num_threads(std::max(1, threads)); }

int num_threads() { return omp_get_max_threads(); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch " + shape(a) + " * " + shape(b));
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix c(n, m);
  const float* A = a.data();
  const float* B = b.data();
  float* C = c.data();
  // i-k-j order: each C(i,j) still accumulates over k left to right.
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWork)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    float* crow = C + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = A[i * k + p];
      const float* brow = B + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_at_b: dimension mismatch " + shape(a) + "^T * " + shape(b));
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  Matrix c(n, m);
  const float* A = a.data();
  const float* B = b.data();
  float* C = c.data();
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWork)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    float* crow = C + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const float api = A[p * n + i];
      const float* brow = B + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += api * brow[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_a_bt: dimension mismatch " + shape(a) + " * " + shape(b) + "^T");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Matrix c(n, m);
  const float* A = a.data();
  const float* B = b.data();
  float* C = c.data();
#pragma omp parallel for schedule(static) if (n * k * m >= kParallelWork)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const float* arow = A + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const float* brow = B + j * k;
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      C[i * m + j] = acc;
    }
  }
  return c;
}

Matrix masked_softmax_rows(const Matrix& scores, const BoolMatrix& mask) {
  require(scores.rows() == mask.rows() && scores.cols() == mask.cols(),
          "masked_softmax_rows: scores " + shape(scores) + " vs mask " + std::to_string(mask.rows()) + "x" +
              std::to_string(mask.cols()));
  const std::size_t n = scores.rows(), m = scores.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const auto bits = mask.row(r);
    if (std::none_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; })) {
      throw Error(ErrorKind::Invariant, "masked_softmax_rows: row " + std::to_string(r) + " is fully masked");
    }
  }
  Matrix out(n, m);
#pragma omp parallel for schedule(static) if (n * m >= kParallelWork)
  for (std::int64_t rr = 0; rr < static_cast<std::int64_t>(n); ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const auto s = scores.row(r);
    const auto bits = mask.row(r);
    auto o = out.row(r);
    // Disallowed scores act as the most negative finite value.
    float mx = std::numeric_limits<float>::lowest();
    for (std::size_t c = 0; c < m; ++c)
      if (bits[c]) mx = std::max(mx, s[c]);
    float sum = 0.0f;
    for (std::size_t c = 0; c < m; ++c) {
      if (bits[c]) {
        o[c] = std::exp(s[c] - mx);
        sum += o[c];
      }
    }
    const float inv = 1.0f / sum;
    for (std::size_t c = 0; c < m; ++c) o[c] = bits[c] ? o[c] * inv : 0.0f;
  }
  return out;
}

Matrix softmax_rows(const Matrix& scores) {
  return masked_softmax_rows(scores, BoolMatrix(scores.rows(), scores.cols(), true));
}

LayerNormResult layer_norm_with_stats(const Matrix& x, float eps) {
  require(x.cols() >= 1, "layer_norm: need at least one column");
  const std::size_t n = x.rows(), d = x.cols();
  LayerNormResult res{Matrix(n, d), std::vector<float>(n)};
#pragma omp parallel for schedule(static) if (n * d >= kParallelWork)
  for (std::int64_t rr = 0; rr < static_cast<std::int64_t>(n); ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const auto in = x.row(r);
    double mean = 0.0;
    for (float v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    auto out = res.normalized.row(r);
    for (std::size_t c = 0; c < d; ++c) out[c] = static_cast<float>((in[c] - mean) * rstd);
    res.inv_std[r] = static_cast<float>(rstd);
  }
  return res;
}

Matrix layer_norm(const Matrix& x, float eps) { return layer_norm_with_stats(x, eps).normalized; }

Matrix layer_norm_backward(const Matrix& grad_normalized, const LayerNormResult& forward) {
  const Matrix& xhat = forward.normalized;
  require(grad_normalized.rows() == xhat.rows() && grad_normalized.cols() == xhat.cols(),
          "layer_norm_backward: shape mismatch");
  const std::size_t n = xhat.rows(), d = xhat.cols();
  Matrix dx(n, d);
#pragma omp parallel for schedule(static) if (n * d >= kParallelWork)
  for (std::int64_t rr = 0; rr < static_cast<std::int64_t>(n); ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const auto g = grad_normalized.row(r);
    const auto h = xhat.row(r);
    double mean_g = 0.0, mean_gh = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      mean_g += g[c];
      mean_gh += static_cast<double>(g[c]) * h[c];
    }
    mean_g /= static_cast<double>(d);
    mean_gh /= static_cast<double>(d);
    const double rstd = forward.inv_std[r];
    auto out = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) out[c] = static_cast<float>(rstd * (g[c] - mean_g - h[c] * mean_gh));
  }
  return dx;
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;
}  // namespace

float gelu(float x) noexcept {
  return 0.5f * x * (1.0f + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

float gelu_derivative(float x) noexcept {
  const float u = kGeluC * (x + kGeluA * x * x * x);
  const float th = std::tanh(u);
  return 0.5f * (1.0f + th) + 0.5f * x * (1.0f - th * th) * kGeluC * (1.0f + 3.0f * kGeluA * x * x);
}

float silu(float x) noexcept { return x / (1.0f + std::exp(-x)); }

float silu_derivative(float x) noexcept {
  const float s = 1.0f / (1.0f + std::exp(-x));
  return s * (1.0f + x * (1.0f - s));
}

Matrix gelu(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) out.data()[i] = gelu(x.data()[i]);
  return out;
}

Matrix silu(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = silu(x.data()[i]);
  return out;
}

}  // namespace streamflow::numerics
