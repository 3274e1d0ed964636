// Acceptance suite: one PASS/FAIL line per criterion. Run with no arguments
// for all twelve, or `--only N` for one.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "streamflow/harness.hpp"
#include "streamflow/probe.hpp"
#include "streamflow/stats.hpp"
#include "streamflow/streaming.hpp"
#include "streamflow/tensor_io.hpp"
#include "support/class_accuracy.hpp"
#include "support/gradcheck.hpp"
#include "support/mask_oracle.hpp"

using namespace streamflow;
using backbone::ModelConfig;
using backbone::ModelParams;
using masks::MaskKind;
using masks::MaskSchedule;
using numerics::Matrix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, std::uint64_t stream) {
  numerics::SeededRng rng(seed, stream);
  Matrix m(r, c);
  for (auto& v : m.values()) v = static_cast<float>(rng.next_gaussian());
  return m;
}

std::vector<std::uint32_t> random_ids(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  numerics::SeededRng rng(seed, 1);
  std::vector<std::uint32_t> ids(n);
  for (auto& v : ids) v = static_cast<std::uint32_t>(rng.next_below(vocab));
  return ids;
}

std::vector<float> random_speaker(std::size_t n, std::uint64_t seed) {
  numerics::SeededRng rng(seed, 2);
  std::vector<float> s(n);
  for (auto& v : s) v = static_cast<float>(rng.next_gaussian());
  return s;
}

double relative_error(const Matrix& got, const Matrix& want) {
  return numerics::max_abs_diff(got, want) / std::max(1e-30f, numerics::max_abs(want));
}

// -- 1 ----------------------------------------------------------------------
Outcome mask_exhaustive() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t checked = 0, wrong = 0;
  for (auto kind : testing::kAllKinds)
    for (std::size_t b : {1u, 2u, 3u, 8u, 24u})
      for (std::size_t n = 1; n <= 96; ++n) {
        const auto m = masks::build_mask(kind, n, b);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            wrong += m(i, j) != testing::mask_allows(kind, i, j, b);
            ++checked;
          }
      }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {wrong == 0 && secs < 10.0, fmt("%zu/%zu entries match the pair predicate; %.1f s", checked - wrong, checked, secs)};
}

// -- 2 ----------------------------------------------------------------------
bool probe_matches(const MaskSchedule& s, std::string* note) {
  ModelConfig c = ModelConfig::tiny().with_schedule(s);
  const auto params = backbone::init_random_params(c, 1000 + s.layers());
  const auto rf = masks::receptive_field(s);
  const std::size_t blocks = *rf.past_blocks + *rf.future_blocks + 5;
  const auto r = masks::empirical_receptive_field(params, c, s, blocks * s.block_size_frames, *rf.future_blocks + 2);
  if (note) *note = fmt("past=%zu future=%zu", *r.field.past_blocks, *r.field.future_blocks);
  return r.field == rf;
}

Outcome receptive_field_formula() {
  numerics::SeededRng rng(2024, 0);
  std::size_t ok = 0;
  const MaskKind kinds[] = {MaskKind::Block, MaskKind::Backward, MaskKind::Forward};
  for (int i = 0; i < 50; ++i) {
    MaskSchedule s;
    s.block_size_frames = 2 + rng.next_below(4);
    const std::size_t layers = 1 + rng.next_below(8);
    for (std::size_t l = 0; l < layers; ++l) s.layer_masks.push_back(kinds[rng.next_below(3)]);
    ok += probe_matches(s, nullptr);
  }
  std::string fig3_note, sr_note;
  const bool fig3 = probe_matches({{MaskKind::Forward, MaskKind::Block, MaskKind::Backward}, 8}, &fig3_note);
  const auto sr = masks::preset_schedule(masks::Preset::SR, masks::kFullSizeLayers, masks::kFullSizeBlockSize);
  const bool sr_ok = probe_matches(sr, &sr_note) && masks::receptive_field(sr).span_frames(24) == 96u;
  return {ok == 50 && fig3 && sr_ok, fmt("random %zu/50; fig3 %s (%s); SR b=24 L=22 %s (%s, span 96)", ok,
                                         fig3 ? "ok" : "FAIL", fig3_note.c_str(), sr_ok ? "ok" : "FAIL", sr_note.c_str())};
}

// -- 3 ----------------------------------------------------------------------
Outcome adaln_identity() {
  std::size_t ok = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const ModelConfig c = ModelConfig::tiny();
    const auto params = backbone::init_params(c, i);
    numerics::SeededRng rng(i, 9);
    const std::size_t frames = 8 * (1 + rng.next_below(8));
    const Matrix x = random_matrix(frames, c.hidden_dim, i, 3);
    const Matrix temb = backbone::timestep_embedding(static_cast<float>(rng.next_uniform()), params, c);
    bool all = true;
    for (std::size_t l = 0; l < c.layers; ++l) {
      const auto mask = masks::build_mask(c.schedule.layer_masks[l], frames, c.block_size());
      all &= backbone::dit_block_forward(x, temb, mask, params.layers[l], c).bitwise_equal(x);
    }
    ok += all;
  }
  return {ok == 20, fmt("%zu/20 inputs: every block returned its input bitwise", ok)};
}

// -- 4 ----------------------------------------------------------------------
Outcome gradient_check() {
  const ModelConfig c = ModelConfig::tiny();
  corpus::CorpusConfig cc;
  cc.num_utterances = 8;
  cc.min_tokens = 4;
  cc.max_tokens = 6;
  const auto data = corpus::synth_corpus(cc);
  flow::TrainConfig tc;
  tc.batch_frames = 40;
  std::size_t passed = 0, total = 0;
  double worst_seed = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto params = backbone::init_random_params(c, seed);
    const auto batch = flow::make_batch(data, c, tc, seed, 0);
    const auto r = testing::finite_difference_check(batch, params, c, 500, seed, 1e-3, 1e-2);
    passed += r.passed;
    total += r.coords.size();
    worst_seed = std::min(worst_seed, r.pass_fraction());
  }
  return {worst_seed >= 0.99, fmt("%zu/%zu coordinates below 1e-2 relative error; worst seed %.2f%%", passed, total,
                                  100.0 * worst_seed)};
}

// -- 5 ----------------------------------------------------------------------
Outcome cfg_affinity() {
  const ModelConfig c = ModelConfig::tiny();
  double worst = 0.0;
  bool bitwise = true;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto params = backbone::init_random_params(c, 50 + i);
    const std::size_t frames = 32;
    const Matrix x = random_matrix(frames, c.feature_dim, i, 4);
    const auto cond = backbone::assemble_condition(random_ids(frames, c.token_vocab, i),
                                                   random_speaker(c.speaker_dim, i), params, c);
    const float t = 0.1f * static_cast<float>(i);
    const Matrix o0 = flow::cfg_vector_field(x, t, cond, 0.0f, params, c);
    const Matrix oh = flow::cfg_vector_field(x, t, cond, 0.5f, params, c);
    const Matrix o1 = flow::cfg_vector_field(x, t, cond, 1.0f, params, c);
    bitwise &= o0.bitwise_equal(backbone::vector_field(x, t, cond, params, c));
    double scale = 0.0, dev = 0.0;
    for (std::size_t k = 0; k < o0.size(); ++k) {
      const double mid = 0.5 * (static_cast<double>(o0.data()[k]) + o1.data()[k]);
      dev = std::max(dev, std::abs(oh.data()[k] - mid));
      scale = std::max({scale, std::abs(static_cast<double>(o0.data()[k])), std::abs(static_cast<double>(o1.data()[k]))});
    }
    worst = std::max(worst, dev / scale);
  }
  return {bitwise && worst <= 1e-6,
          fmt("max collinearity deviation %.2e relative; alpha=0 bitwise conditional: %s", worst, bitwise ? "yes" : "no")};
}

// -- 6, 7 -------------------------------------------------------------------
Outcome streaming_equivalence(std::size_t steps, std::size_t mult, std::size_t inputs, double tol) {
  const ModelConfig c = ModelConfig::tiny();
  double worst = 0.0;
  std::size_t bitwise = 0, ok = 0;
  for (std::uint64_t i = 0; i < inputs; ++i) {
    const auto params = backbone::init_random_params(c, 100 + i);
    numerics::SeededRng rng(i, 5);
    const std::size_t frames = 8 * (10 + rng.next_below(8)) + rng.next_below(8);
    const auto ids = random_ids(frames, c.token_vocab, 200 + i);
    const auto spk = random_speaker(c.speaker_dim, 200 + i);
    streaming::StreamConfig sc;
    sc.sampler.steps = steps;
    sc.context_multiplier = mult;
    sc.noise_seed = 300 + i;
    const auto off = streaming::offline_generate(ids, spk, params, c, sc);
    const auto full = streaming::batch_generate(ids, spk, params, c, sc.sampler, sc.noise_seed);
    const double e = relative_error(off.features, full);
    worst = std::max(worst, e);
    bitwise += off.features.bitwise_equal(full);
    ok += e <= tol;
  }
  return {ok == inputs, fmt("%zu/%zu inputs within %.0e (worst %.2e, %zu bitwise identical)", ok, inputs, tol, worst,
                            bitwise)};
}

// -- 8 ----------------------------------------------------------------------
Outcome offline_stream_bitwise() {
  const ModelConfig c = ModelConfig::tiny();
  std::size_t ok = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    numerics::SeededRng rng(i, 6);
    const auto params = backbone::init_random_params(c, 400 + i);
    const auto ids = random_ids(8 * (4 + rng.next_below(10)) + rng.next_below(8), c.token_vocab, 500 + i);
    const auto spk = random_speaker(c.speaker_dim, 500 + i);
    streaming::StreamConfig sc;
    sc.chunk_blocks = 1 + rng.next_below(3);
    sc.context_multiplier = 1 + rng.next_below(2);
    sc.sampler.steps = 1 + rng.next_below(3);
    sc.noise_seed = 600 + i;
    sc.max_inflight_chunks = 1 + rng.next_below(3);
    const std::size_t piece = 1 + rng.next_below(9);
    const auto off = streaming::offline_generate(ids, spk, params, c, sc);
    streaming::ConditionStream source;
    std::thread producer([&] {
      for (std::size_t k = 0; k < ids.size(); k += piece)
        source.push(std::span(ids).subspan(k, std::min(piece, ids.size() - k)));
      source.close();
    });
    const auto live = streaming::stream_generate(source, spk, params, c, sc);
    producer.join();
    ok += live.features.bitwise_equal(off.features) && live.chunks.size() == off.chunks.size();
  }
  return {ok == 10, fmt("%zu/10 random runs identical bitwise", ok)};
}

// -- 9 ----------------------------------------------------------------------
Outcome latency_shape() {
  const auto start = std::chrono::steady_clock::now();
  const ModelConfig sr = ModelConfig::tiny();
  const ModelConfig causal = sr.with_schedule(masks::preset_schedule(masks::Preset::Causal, sr.layers, sr.block_size()));
  const auto params = backbone::init_random_params(sr, 7);
  streaming::StreamConfig sc;
  sc.sampler.steps = 2;
  sc.sampler.cfg_alpha = 0.0f;
  auto series = [](const std::vector<streaming::LatencyRow>& rows) {
    std::vector<double> ms;
    for (const auto& r : rows) ms.push_back(r.millis);
    return ms;
  };
  const auto sliding = series(
      streaming::measure_chunk_latency(params, sr, sc, 100, streaming::LatencyMode::SlidingWindow, 5));
  const auto growing = series(
      streaming::measure_chunk_latency(params, causal, sc, 100, streaming::LatencyMode::CausalCumulative, 1));
  std::vector<double> index(100);
  for (std::size_t i = 0; i < 100; ++i) index[i] = static_cast<double>(i);
  const double slope = numerics::linear_slope(sliding), med = numerics::median(sliding);
  const double rho = numerics::spearman(index, growing);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = std::abs(slope) < 0.01 * med && rho > 0.9 && secs < 300.0;
  return {pass, fmt("sliding slope %.4f ms/chunk vs median %.3f ms (%.2f%%); causal spearman %.3f "
                    "(%.1f -> %.1f ms); %.0f s",
                    slope, med, 100.0 * std::abs(slope) / med, rho, growing.front(), growing.back(), secs)};
}

// -- 10 ---------------------------------------------------------------------
Outcome first_packet() {
  const auto sr = masks::receptive_field(masks::preset_schedule(masks::Preset::SR, 22, 24));
  const std::size_t sr_need = streaming::frames_required(0, 24, 2, sr, 1);
  bool ok = sr_need == 72;

  // Live driver on the tiny model: nothing with one frame short, exactly one
  // chunk once the required frames are present.
  const ModelConfig c = ModelConfig::tiny();
  const auto params = backbone::init_random_params(c, 8);
  const auto spk = random_speaker(c.speaker_dim, 8);
  std::size_t live_ok = 0, cases = 0;
  for (std::size_t chunk : {1u, 2u, 3u})
    for (std::size_t mult : {1u, 2u}) {
      streaming::StreamConfig sc;
      sc.chunk_blocks = chunk;
      sc.context_multiplier = mult;
      sc.sampler.steps = 1;
      sc.stall_timeout = std::chrono::milliseconds(200);
      const auto rf = masks::receptive_field(c.schedule);
      const std::size_t need = streaming::frames_required(0, c.block_size(), chunk, rf, mult);
      const bool arithmetic = need == (chunk + mult * *rf.future_blocks) * c.block_size();
      const auto ids = random_ids(need, c.token_vocab, chunk * 10 + mult);
      bool both = arithmetic;
      for (std::size_t have : {need - 1, need}) {
        streaming::ConditionStream source;
        source.push(std::span(ids).first(have));
        std::size_t emitted = 0;
        try {
          streaming::stream_generate(source, spk, params, c, sc,
                                     [&](const streaming::ChunkRecord&, const Matrix&) { ++emitted; });
        } catch (const Error& e) {
          both &= e.kind() == ErrorKind::Timeout;
        }
        both &= emitted == (have == need ? 1u : 0u);
      }
      live_ok += both;
      ++cases;
    }
  ok &= live_ok == cases;
  return {ok, fmt("SR b=24 chunk=2 mult=1 needs %zu frames; live driver exact in %zu/%zu tiny cases", sr_need, live_ok,
                  cases)};
}

// -- 11 ---------------------------------------------------------------------
Outcome toy_training() {
  numerics::set_num_threads(1);
  const auto start = std::chrono::steady_clock::now();
  const corpus::CorpusConfig cc;
  const auto data = corpus::synth_corpus(cc);
  const ModelConfig c = ModelConfig::tiny();
  flow::TrainConfig tc;
  tc.steps = 2000;
  const auto result = flow::train_loop(data, c, tc, 1);
  const double initial = result.trace.front().loss;
  double final_loss = 0.0;
  for (std::size_t i = result.trace.size() - 50; i < result.trace.size(); ++i) final_loss += result.trace[i].loss;
  final_loss /= 50.0;

  // Same fixed batches (no condition drop) before and after training.
  flow::TrainConfig eval = tc;
  eval.cond_drop_rate = 0.0;
  const auto init = backbone::init_params(c, 1);
  double eval_before = 0.0, eval_after = 0.0;
  for (std::size_t k = 0; k < 8; ++k) {
    const auto batch = flow::make_batch(data, c, eval, 999, k);
    eval_before += flow::cfm_loss_value(batch, init, c) / 8.0;
    eval_after += flow::cfm_loss_value(batch, result.params, c) / 8.0;
  }
  const auto acc = testing::class_accuracy(cc, result.params, c, flow::SamplerConfig{10, 0.5f, 0}, 100, 5000);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = final_loss < 0.5 * initial && eval_after < 0.5 * eval_before && acc.accuracy() >= 0.95 &&
                    secs < 900.0;
  return {pass, fmt("loss %.3f -> %.3f (last-50 mean), fixed-batch %.3f -> %.3f; class accuracy %.1f%% over %zu "
                    "tokens in 100 samples; %.0f s",
                    initial, final_loss, eval_before, eval_after, 100.0 * acc.accuracy(), acc.total, secs)};
}

// -- 12 ---------------------------------------------------------------------
Outcome manifest_replay() {
  const fs::path root = fs::temp_directory_path() / "streamflow_acceptance_replay";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "tokens.json") << "[3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3, 8, 4, 6, 2, 6, 4]";
  const std::vector<float> spk{0.5f, -0.25f, 1.0f, 0.0f};
  numerics::write_vector(root / "speaker.sftn", spk);
  auto run = [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return harness::run_cli(args, out, err);
  };
  auto same = [](const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    const std::string sa{std::istreambuf_iterator<char>(fa), {}}, sb{std::istreambuf_iterator<char>(fb), {}};
    return !sa.empty() && sa == sb;
  };
  std::size_t ok = 0, total = 0;
  for (const std::string mode : {"batch", "stream"}) {
    const auto dir = root / mode, again = root / (mode + "_replay");
    const int first = run({"--out-dir", dir.string(), "--seed", "21", "generate", "--random", "--mode", mode, "--tokens",
                           (root / "tokens.json").string(), "--speaker", (root / "speaker.sftn").string(),
                           "--chunk-blocks", "2", "--ode-steps", "4"});
    const int second = run({"--replay", (dir / harness::kManifestName).string(), "--out-dir", again.string()});
    ok += first == 0 && second == 0 && same(dir / "features.sftn", again / "features.sftn");
    ++total;
  }
  fs::remove_all(root);
  return {ok == total, fmt("%zu/%zu generate runs replayed bitwise from their manifests", ok, total)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StreamFlow acceptance suite"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "mask correctness", mask_exhaustive},
      {2, "receptive-field formula", receptive_field_formula},
      {3, "adaLN-zero identity", adaln_identity},
      {4, "OT-CFM gradient check", gradient_check},
      {5, "CFG affinity", cfg_affinity},
      {6, "streaming equivalence, steps=1 mult=1", [] { return streaming_equivalence(1, 1, 20, 1e-5); }},
      {7, "streaming equivalence, steps=4 mult=4", [] { return streaming_equivalence(4, 4, 10, 1e-4); }},
      {8, "offline/stream bitwise equality", offline_stream_bitwise},
      {9, "latency shape", latency_shape},
      {10, "first-packet arithmetic", first_packet},
      {11, "toy training", toy_training},
      {12, "manifest reproducibility", manifest_replay},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
