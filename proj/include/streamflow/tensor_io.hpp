#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "streamflow/matrix.hpp"

namespace streamflow::numerics {

/// SFTN file: "SFTN", u32 rank, rank × u32 dims (all little-endian), then
/// row-major little-endian float32 payload. Rank-2 headers are 16 bytes.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const Matrix& m);
/// Rank-1 tensors load as 1×n matrices.
Matrix read_matrix(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_vector(const std::filesystem::path& path);

}  // namespace streamflow::numerics
