#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamflow/error.hpp"

namespace streamflow::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInvariant = 3;
inline constexpr int kExitIo = 4;

int exit_code_for(ErrorKind kind) noexcept;

inline constexpr const char* kManifestName = "run_manifest.json";

struct RunManifest {
  std::string command;
  /// Fully resolved argument list (global flags, subcommand, every option
  /// with its effective value). Replaying it reproduces the run.
  std::vector<std::string> args;
  nlohmann::json config;
  nlohmann::json seeds;
  std::string git_describe;
  double duration_seconds = 0.0;
  std::vector<std::string> outputs;  // relative to the manifest directory
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

std::string git_describe();

/// Entry point shared by the `streamflow` tool and in-process tests.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace streamflow::harness
