#include "streamflow/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "streamflow/error.hpp"

namespace streamflow::numerics {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'F', 'T', 'N'};
constexpr std::uint32_t kMaxRank = 8;

static_assert(std::endian::native == std::endian::little, "SFTN I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw Error(ErrorKind::Format, "truncated SFTN header in " + path.string());
  }
  return v;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::size_t count = 1;
  for (auto d : tensor.dims) count *= d;
  if (count != tensor.data.size()) {
    throw Error(ErrorKind::Config, "tensor dims do not match data length for " + path.string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  out.write(reinterpret_cast<const char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(ErrorKind::Format, "bad SFTN magic in " + path.string());
  }
  const std::uint32_t rank = get_u32(in, path);
  if (rank > kMaxRank) throw Error(ErrorKind::Format, "unsupported SFTN rank " + std::to_string(rank) + " in " + path.string());
  Tensor t;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(get_u32(in, path));
    count *= t.dims.back();
  }
  t.data.resize(count);
  if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
    throw Error(ErrorKind::Format, "truncated SFTN payload in " + path.string());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::Format, "trailing bytes after SFTN payload in " + path.string());
  }
  return t;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  write_tensor(path, Tensor{{static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
                            std::vector<float>(m.values().begin(), m.values().end())});
}

Matrix read_matrix(const std::filesystem::path& path) {
  Tensor t = read_tensor(path);
  if (t.dims.size() == 1) return Matrix(1, t.dims[0], std::move(t.data));
  if (t.dims.size() == 2) return Matrix(t.dims[0], t.dims[1], std::move(t.data));
  throw Error(ErrorKind::Format, "expected rank 1 or 2 tensor in " + path.string());
}

void write_vector(const std::filesystem::path& path, std::span<const float> values) {
  write_tensor(path, Tensor{{static_cast<std::uint32_t>(values.size())}, std::vector<float>(values.begin(), values.end())});
}

std::vector<float> read_vector(const std::filesystem::path& path) {
  Tensor t = read_tensor(path);
  if (t.dims.size() == 1 || (t.dims.size() == 2 && t.dims[0] == 1)) return std::move(t.data);
  throw Error(ErrorKind::Format, "expected a vector tensor in " + path.string());
}

}  // namespace streamflow::numerics
