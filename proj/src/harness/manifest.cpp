#include <fstream>

#include "streamflow/harness.hpp"

#ifndef STREAMFLOW_GIT_DESCRIBE
#define STREAMFLOW_GIT_DESCRIBE "unknown"
#endif

namespace streamflow::harness {

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Input:
      return kExitUsage;
    case ErrorKind::Io:
    case ErrorKind::Format:
      return kExitIo;
    default:
      return kExitInvariant;
  }
}

std::string git_describe() { return STREAMFLOW_GIT_DESCRIBE; }

nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"format", "streamflow-run"},
          {"command", m.command},
          {"args", m.args},
          {"config", m.config},
          {"seeds", m.seeds},
          {"git_describe", m.git_describe},
          {"duration_seconds", m.duration_seconds},
          {"outputs", m.outputs}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "streamflow-run") throw Error(ErrorKind::Format, "not a run manifest");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.config = j.value("config", nlohmann::json::object());
    m.seeds = j.value("seeds", nlohmann::json::object());
    m.git_describe = j.value("git_describe", "");
    m.duration_seconds = j.value("duration_seconds", 0.0);
    m.outputs = j.value("outputs", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("run manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream out(dir / kManifestName);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / kManifestName).string());
  out << manifest_to_json(m).dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace streamflow::harness
