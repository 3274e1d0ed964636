#include "streamflow/checkpoint.hpp"

#include <fstream>

#include "streamflow/error.hpp"
#include "streamflow/tensor_io.hpp"

namespace streamflow::backbone {

namespace {
constexpr const char* kFormat = "streamflow-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& config, const ModelParams& params) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  nlohmann::json tensors = nlohmann::json::array();
  params.for_each([&](const std::string& name, const Matrix& m) {
    const std::string file = name + ".sftn";
    numerics::write_matrix(dir / file, m);
    tensors.push_back({{"name", name}, {"file", file}, {"shape", {m.rows(), m.cols()}}});
  });
  nlohmann::json manifest = {
      {"format", kFormat}, {"version", kVersion}, {"config", config_to_json(config)}, {"tensors", tensors}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  if (manifest.value("format", std::string()) != kFormat) {
    throw Error(ErrorKind::Format, path.string() + ": field 'format' is not '" + kFormat + "'");
  }
  if (!manifest.contains("config")) throw Error(ErrorKind::Format, path.string() + ": missing field 'config'");
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    throw Error(ErrorKind::Format, path.string() + ": missing field 'tensors'");
  }
  Checkpoint ck{config_from_json(manifest["config"]), {}};
  // Allocate the expected shapes, then fill by name.
  ck.params = init_params(ck.config, 0).zeros_like();
  std::map<std::string, std::string> files;
  for (const auto& t : manifest["tensors"]) {
    if (!t.contains("name") || !t.contains("file")) throw Error(ErrorKind::Format, path.string() + ": tensor entry lacks name/file");
    files[t["name"].get<std::string>()] = t["file"].get<std::string>();
  }
  ck.params.for_each([&](const std::string& name, Matrix& m) {
    auto it = files.find(name);
    if (it == files.end()) throw Error(ErrorKind::Format, path.string() + ": missing tensor '" + name + "'");
    Matrix loaded = numerics::read_matrix(dir / it->second);
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
      throw Error(ErrorKind::Format, "tensor '" + name + "' has shape " + std::to_string(loaded.rows()) + "x" +
                                         std::to_string(loaded.cols()) + ", expected " + std::to_string(m.rows()) +
                                         "x" + std::to_string(m.cols()));
    }
    m = std::move(loaded);
  });
  return ck;
}

}  // namespace streamflow::backbone
