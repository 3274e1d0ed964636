#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "streamflow/checkpoint.hpp"
#include "streamflow/harness.hpp"
#include "streamflow/tensor_io.hpp"

using namespace streamflow;
using namespace streamflow::harness;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;
  Workspace() : root(fs::temp_directory_path() / "streamflow_cli_test") {
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "tokens.json") << "[1, 5, 9, 3, 3, 7, 12, 30, 2, 2, 8, 1, 0, 4, 4, 19, 21, 5]";
  }
  ~Workspace() { fs::remove_all(root); }

  std::string path(const std::string& name) const { return (root / name).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(cli({"--bogus"}).code == kExitUsage);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"generate"}).code == kExitUsage);
  CHECK(cli({"generate", "--tokens", "x.json", "--mode", "sideways"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("missing input files exit 4") {
  Workspace ws;
  const auto r = cli({"--out-dir", ws.path("g"), "generate", "--random", "--tokens", ws.path("nope.json")});
  CHECK(r.code == kExitIo);
  CHECK(cli({"--out-dir", ws.path("t"), "train", "--data", ws.path("missing")}).code == kExitIo);
}

TEST_CASE("analyze-rf reports analytic and empirical fields") {
  Workspace ws;
  const auto sr = cli({"--out-dir", ws.path("rf"), "analyze-rf", "--random", "--preset", "sr"});
  CHECK(sr.code == kExitOk);
  CHECK(sr.out == "past=2 future=1 span=96 frames; empirical: MATCH\n");

  const auto full = cli({"--out-dir", ws.path("rf_full"), "analyze-rf", "--random", "--preset", "full", "--layers", "4"});
  CHECK(full.code == kExitOk);
  CHECK(full.out.find("span=entire sequence; empirical: MATCH") != std::string::npos);

  std::ofstream(ws.root / "fig3.json") << R"({"layers": ["Forward", "Block", "Backward"], "block_size_frames": 24})";
  const auto fig3 = cli({"--out-dir", ws.path("rf3"), "analyze-rf", "--random", "--schedule", ws.path("fig3.json")});
  CHECK(fig3.code == kExitOk);
  CHECK(fig3.out == "past=1 future=1 span=72 frames; empirical: MATCH\n");
  CHECK(fs::exists(ws.root / "rf3" / kManifestName));
  CHECK(fs::exists(ws.root / "rf3" / "rf_report.json"));
}

TEST_CASE("batch and stream generate agree on a one-chunk input") {
  Workspace ws;
  const std::vector<std::string> common{"generate", "--random", "--tokens", ws.path("tokens.json"), "--chunk-blocks", "16"};
  auto batch = common, stream = common;
  batch.insert(batch.end(), {"--mode", "batch"});
  stream.insert(stream.end(), {"--mode", "stream"});
  batch.insert(batch.begin(), {"--out-dir", ws.path("b")});
  stream.insert(stream.begin(), {"--out-dir", ws.path("s")});
  REQUIRE(cli(batch).code == kExitOk);
  REQUIRE(cli(stream).code == kExitOk);
  CHECK(slurp(ws.root / "b" / "features.sftn") == slurp(ws.root / "s" / "features.sftn"));
  CHECK(numerics::read_matrix(ws.root / "b" / "features.sftn").rows() == 18 * 4);
  CHECK(fs::exists(ws.root / "s" / "chunks.csv"));
}

TEST_CASE("generate replays bitwise from its manifest") {
  Workspace ws;
  REQUIRE(cli({"--out-dir", ws.path("g"), "--seed", "11", "generate", "--random", "--tokens", ws.path("tokens.json"),
               "--mode", "stream", "--ode-steps", "3"})
              .code == kExitOk);
  const auto m = read_manifest(ws.root / "g" / kManifestName);
  CHECK(m.command == "generate");
  CHECK(m.seeds["seed"] == 11);
  CHECK(m.seeds["noise_seed"] == 11);
  CHECK(!m.git_describe.empty());
  CHECK(m.outputs == std::vector<std::string>{"chunks.csv", "features.sftn"});
  CHECK(cli({"--replay", ws.path("g/run_manifest.json"), "--out-dir", ws.path("r")}).code == kExitOk);
  CHECK(slurp(ws.root / "g" / "features.sftn") == slurp(ws.root / "r" / "features.sftn"));
  CHECK(read_manifest(ws.root / "r" / kManifestName).args == m.args);
}

TEST_CASE("make-data and zero-step training") {
  Workspace ws;
  REQUIRE(cli({"--out-dir", ws.path("d"), "--seed", "2", "make-data", "--utterances", "4"}).code == kExitOk);
  CHECK(fs::exists(ws.root / "d" / "corpus" / "manifest.json"));
  REQUIRE(cli({"--out-dir", ws.path("t"), "--seed", "5", "train", "--data", ws.path("d/corpus"), "--steps", "0"}).code ==
          kExitOk);
  const auto ck = backbone::load_checkpoint(ws.root / "t" / "checkpoint");
  CHECK(ck.params.bitwise_equal(backbone::init_params(ck.config, 5)));
  CHECK(slurp(ws.root / "t" / "loss.csv") == "step,loss\n");

  REQUIRE(cli({"--out-dir", ws.path("t2"), "--seed", "5", "train", "--data", ws.path("d/corpus"), "--steps", "3",
               "--batch-frames", "32"})
              .code == kExitOk);
  REQUIRE(cli({"--replay", ws.path("t2/run_manifest.json"), "--out-dir", ws.path("t3")}).code == kExitOk);
  CHECK(slurp(ws.root / "t2" / "loss.csv") == slurp(ws.root / "t3" / "loss.csv"));
}

TEST_CASE("bench writes a latency table") {
  Workspace ws;
  const auto r = cli({"--out-dir", ws.path("bench"), "bench", "--random", "--chunks", "10", "--ode-steps", "1",
                      "--repeats", "1"});
  CHECK((r.code == kExitOk || r.code == kExitInvariant));
  const auto csv = slurp(ws.root / "bench" / "latency.csv");
  CHECK(csv.rfind("chunk_index,frames,millis\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  CHECK(cli({"bench", "--random", "--chunks", "3"}).code == kExitUsage);
}
