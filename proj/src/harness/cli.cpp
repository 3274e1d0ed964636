#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "streamflow/checkpoint.hpp"
#include "streamflow/corpus.hpp"
#include "streamflow/flow.hpp"
#include "streamflow/harness.hpp"
#include "streamflow/kernels.hpp"
#include "streamflow/probe.hpp"
#include "streamflow/stats.hpp"
#include "streamflow/streaming.hpp"
#include "streamflow/tensor_io.hpp"

namespace streamflow::harness {

namespace fs = std::filesystem;
using backbone::ModelConfig;
using backbone::ModelParams;

namespace {

struct Globals {
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string replay;
};

// Per-run bookkeeping shared by the subcommands.
struct RunContext {
  Globals g;
  fs::path out_dir;
  std::ostream* out = nullptr;
  std::vector<std::string> outputs;
  std::map<std::string, std::string> resolved;  // overrides recorded in the manifest
  nlohmann::json seeds = nlohmann::json::object();

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    fs::path p = out_dir / name;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + p.parent_path().string());
    return p;
  }
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + p.string());
  return f;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, p.string() + ": " + e.what());
  }
}

std::vector<std::uint32_t> read_tokens(const fs::path& p) {
  const auto j = read_json(p);
  try {
    return j.get<std::vector<std::uint32_t>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Format, p.string() + ": expected a JSON list of non-negative integers");
  }
}

// -- model source ----------------------------------------------------------

struct ModelOptions {
  std::string checkpoint;
  bool random = false;
  std::string preset;  // empty: keep the checkpoint / default schedule
  std::string schedule;
  std::size_t layers = 4;
  std::size_t block_size = 8;
};

void add_model_options(CLI::App* cmd, ModelOptions& m, std::set<std::string>& paths, std::size_t layers,
                       std::size_t block) {
  m.layers = layers;
  m.block_size = block;
  cmd->add_option("--checkpoint", m.checkpoint, "checkpoint directory");
  cmd->add_flag("--random", m.random, "use randomly initialized weights (seeded by --seed)");
  cmd->add_option("--preset", m.preset, "mask preset: sr, lr, full, causal");
  cmd->add_option("--schedule", m.schedule, "mask schedule JSON file");
  cmd->add_option("--layers", m.layers, "layers for --random models")->check(CLI::PositiveNumber);
  cmd->add_option("--block-size", m.block_size, "block size in frames for --random models")->check(CLI::PositiveNumber);
  paths.insert("--checkpoint");
  paths.insert("--schedule");
}

std::optional<masks::MaskSchedule> requested_schedule(const ModelOptions& m, std::size_t layers, std::size_t block) {
  if (!m.schedule.empty()) return masks::load_schedule(m.schedule);
  if (!m.preset.empty()) return masks::preset_schedule(masks::parse_preset(m.preset), layers, block);
  return std::nullopt;
}

backbone::Checkpoint load_model(const ModelOptions& m, std::uint64_t seed) {
  if (!m.checkpoint.empty() && m.random) throw Error(ErrorKind::Config, "--checkpoint and --random are exclusive");
  if (!m.checkpoint.empty()) {
    auto ck = backbone::load_checkpoint(m.checkpoint);
    if (auto s = requested_schedule(m, ck.config.layers, ck.config.block_size())) {
      if (s->layers() != ck.config.layers)
        throw Error(ErrorKind::Config, "schedule has " + std::to_string(s->layers()) + " layers, checkpoint has " +
                                           std::to_string(ck.config.layers));
      ck.config = ck.config.with_schedule(*s);
    }
    return ck;
  }
  ModelConfig config = ModelConfig::tiny();
  auto s = requested_schedule(m, m.layers, m.block_size);
  config = config.with_schedule(s ? *s : masks::preset_schedule(masks::Preset::SR, m.layers, m.block_size));
  config.validate();
  return {config, backbone::init_random_params(config, seed)};
}

// -- make-data -------------------------------------------------------------

struct MakeDataOptions {
  std::string config;
  std::size_t utterances = 64;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 16;
  double noise_std = 0.1;
  std::string out = "corpus";
};

void cmd_make_data(RunContext& ctx, const MakeDataOptions& o, CLI::App* cmd) {
  corpus::CorpusConfig c;
  if (!o.config.empty()) c = corpus::config_from_json(read_json(o.config));
  if (o.config.empty() || cmd->count("--utterances")) c.num_utterances = o.utterances;
  if (o.config.empty() || cmd->count("--min-tokens")) c.min_tokens = o.min_tokens;
  if (o.config.empty() || cmd->count("--max-tokens")) c.max_tokens = o.max_tokens;
  if (o.config.empty() || cmd->count("--noise-std")) c.noise_std = o.noise_std;
  c.seed = ctx.g.seed;
  c.validate();
  corpus::Corpus data{c, corpus::synth_corpus(c)};
  const auto dir = ctx.output(o.out);
  corpus::write_corpus(dir, data);
  *ctx.out << "wrote " << data.utterances.size() << " utterances to " << dir.string() << '\n';
}

// -- train -----------------------------------------------------------------

struct TrainOptions {
  std::string data;
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::size_t batch_frames = 192;
  double cond_drop = 0.3;
  std::string preset = "sr";
  std::size_t layers = 4;
  std::size_t block_size = 8;
  std::size_t log_every = 50;
  std::string checkpoint_out = "checkpoint";
  std::string loss_csv = "loss.csv";
};

ModelConfig model_for_corpus(const corpus::CorpusConfig& c, const TrainOptions& o) {
  ModelConfig m = ModelConfig::tiny();
  m.feature_dim = c.feature_dim;
  m.token_vocab = c.token_vocab;
  m.speaker_dim = c.speaker_dim;
  m.upsample_factor = c.upsample_factor;
  m = m.with_schedule(masks::preset_schedule(masks::parse_preset(o.preset), o.layers, o.block_size));
  m.validate();
  return m;
}

void cmd_train(RunContext& ctx, const TrainOptions& o) {
  const auto data = corpus::read_corpus(o.data);
  const ModelConfig model = model_for_corpus(data.config, o);
  flow::TrainConfig tc;
  tc.steps = o.steps;
  tc.learning_rate = o.lr;
  tc.batch_frames = o.batch_frames;
  tc.cond_drop_rate = o.cond_drop;
  tc.log_every = o.log_every;
  tc.validate();
  auto result = flow::train_loop(data.utterances, model, tc, ctx.g.seed, [&](const flow::LossPoint& p) {
    *ctx.out << "step " << p.step << " loss " << p.loss << '\n';
  });
  auto csv = open_out(ctx.output(o.loss_csv));
  csv << "step,loss\n" << std::setprecision(9);
  for (const auto& p : result.trace) csv << p.step << ',' << p.loss << '\n';
  backbone::save_checkpoint(ctx.output(o.checkpoint_out), model, result.params);
  if (!result.trace.empty())
    *ctx.out << "initial loss " << result.trace.front().loss << " final loss " << result.trace.back().loss << '\n';
}

// -- generate --------------------------------------------------------------

struct GenerateOptions {
  ModelOptions model;
  std::string mode = "batch";
  std::size_t chunk_blocks = 2;
  std::size_t context_mult = 1;
  std::size_t ode_steps = 10;
  float cfg_alpha = 0.5f;
  std::optional<std::uint64_t> noise_seed;
  std::size_t max_inflight = 1;
  std::string tokens;
  std::string speaker;
  std::string out = "features.sftn";
  std::string latency_csv = "chunks.csv";
};

void write_latency_csv(std::ofstream& csv, const std::vector<streaming::ChunkRecord>& chunks) {
  csv << "chunk_index,frames,millis\n" << std::setprecision(6) << std::fixed;
  for (const auto& c : chunks) csv << c.chunk_index << ',' << c.frames << ',' << c.millis << '\n';
}

void cmd_generate(RunContext& ctx, const GenerateOptions& o) {
  const auto ck = load_model(o.model, ctx.g.seed);
  const auto& config = ck.config;
  const auto tokens = read_tokens(o.tokens);
  if (tokens.empty()) throw Error(ErrorKind::Input, "token file is empty");
  const auto frame_ids = backbone::upsample_tokens(tokens, config.upsample_factor);
  std::vector<float> speaker(config.speaker_dim, 0.0f);
  if (!o.speaker.empty()) speaker = numerics::read_vector(o.speaker);

  streaming::StreamConfig sc;
  sc.chunk_blocks = o.chunk_blocks;
  sc.context_multiplier = o.context_mult;
  sc.sampler.steps = o.ode_steps;
  sc.sampler.cfg_alpha = o.cfg_alpha;
  sc.noise_seed = o.noise_seed.value_or(ctx.g.seed);
  sc.sampler.seed = sc.noise_seed;
  sc.max_inflight_chunks = o.max_inflight;
  sc.validate();
  ctx.resolved["--noise-seed"] = std::to_string(sc.noise_seed);
  ctx.seeds["noise_seed"] = sc.noise_seed;

  numerics::Matrix features;
  if (o.mode == "batch") {
    features = streaming::batch_generate(frame_ids, speaker, ck.params, config, sc.sampler, sc.noise_seed);
  } else if (o.mode == "stream") {
    streaming::ConditionStream source;
    std::thread producer([&] {
      const std::size_t step = config.upsample_factor;
      for (std::size_t i = 0; i < frame_ids.size(); i += step)
        source.push(std::span(frame_ids).subspan(i, std::min(step, frame_ids.size() - i)));
      source.close();
    });
    streaming::StreamResult result;
    try {
      result = streaming::stream_generate(source, speaker, ck.params, config, sc);
    } catch (...) {
      producer.join();
      throw;
    }
    producer.join();
    features = std::move(result.features);
    auto csv = open_out(ctx.output(o.latency_csv));
    write_latency_csv(csv, result.chunks);
  } else {
    throw Error(ErrorKind::Config, "--mode must be batch or stream");
  }
  numerics::write_matrix(ctx.output(o.out), features);
  *ctx.out << "generated " << features.rows() << " frames (" << o.mode << ")\n";
}

// -- analyze-rf ------------------------------------------------------------

struct AnalyzeOptions {
  ModelOptions model;
  std::uint64_t probe_seed = 7;
  std::string report = "rf_report.json";
};

std::string field_text(std::optional<std::size_t> v) { return v ? std::to_string(*v) : "unbounded"; }

int cmd_analyze_rf(RunContext& ctx, const AnalyzeOptions& o) {
  const auto ck = load_model(o.model, ctx.g.seed);
  const auto& config = ck.config;
  const auto& schedule = config.schedule;
  const std::size_t b = config.block_size();
  const auto rf = masks::receptive_field(schedule);
  const std::size_t p = rf.past_blocks.value_or(2), q = rf.future_blocks.value_or(2);
  const std::size_t blocks = p + q + 5;
  const std::size_t probe = rf.bounded() ? q + 2 : blocks / 2;
  const auto found = masks::empirical_receptive_field(ck.params, config, schedule, blocks * b, probe, o.probe_seed);

  bool match = true;
  if (rf.past_blocks) match &= found.field.past_blocks == rf.past_blocks;
  else match &= found.max_changed_block == blocks - 1;
  if (rf.future_blocks) match &= found.field.future_blocks == rf.future_blocks;
  else match &= found.min_changed_block == 0;

  const auto span = rf.span_frames(b);
  *ctx.out << "past=" << field_text(rf.past_blocks) << " future=" << field_text(rf.future_blocks)
           << " span=" << (span ? std::to_string(*span) + " frames" : std::string("entire sequence"))
           << "; empirical: " << (match ? "MATCH" : "MISMATCH") << '\n';
  if (!match)
    *ctx.out << "empirical past=" << field_text(found.field.past_blocks)
             << " future=" << field_text(found.field.future_blocks) << '\n';

  nlohmann::json report = {
      {"schedule", masks::schedule_to_json(schedule)},
      {"analytic", {{"past_blocks", rf.past_blocks ? nlohmann::json(*rf.past_blocks) : nlohmann::json(nullptr)},
                    {"future_blocks", rf.future_blocks ? nlohmann::json(*rf.future_blocks) : nlohmann::json(nullptr)},
                    {"span_frames", span ? nlohmann::json(*span) : nlohmann::json(nullptr)}}},
      {"empirical", {{"probe_block", probe},
                     {"sequence_blocks", blocks},
                     {"min_changed_block", found.min_changed_block},
                     {"max_changed_block", found.max_changed_block}}},
      {"match", match}};
  open_out(ctx.output(o.report)) << report.dump(2) << '\n';
  return match ? kExitOk : kExitInvariant;
}

// -- bench -----------------------------------------------------------------

struct BenchOptions {
  ModelOptions model;
  std::string mode = "sliding_window";
  std::size_t chunks = 100;
  std::size_t repeats = 3;
  std::size_t chunk_blocks = 2;
  std::size_t context_mult = 1;
  std::size_t ode_steps = 10;
  float cfg_alpha = 0.5f;
  std::string csv = "latency.csv";
  std::string summary = "bench_summary.json";
};

int cmd_bench(RunContext& ctx, BenchOptions o) {
  const auto mode = streaming::parse_latency_mode(o.mode);
  if (o.chunks < 10) throw Error(ErrorKind::Config, "--chunks must be >= 10");
  if (o.model.preset.empty() && o.model.schedule.empty())
    o.model.preset = mode == streaming::LatencyMode::CausalCumulative ? "causal" : "sr";
  ctx.resolved["--preset"] = o.model.preset;
  const auto ck = load_model(o.model, ctx.g.seed);
  streaming::StreamConfig sc;
  sc.chunk_blocks = o.chunk_blocks;
  sc.context_multiplier = o.context_mult;
  sc.sampler.steps = o.ode_steps;
  sc.sampler.cfg_alpha = o.cfg_alpha;
  sc.noise_seed = ctx.g.seed;
  const auto rows = streaming::measure_chunk_latency(ck.params, ck.config, sc, o.chunks, mode, o.repeats, ctx.g.seed);

  std::vector<double> millis;
  for (const auto& r : rows) millis.push_back(r.millis);
  std::vector<double> index(millis.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<double>(i);
  const double slope = numerics::linear_slope(millis);
  const double med = numerics::median(millis);
  const double rho = numerics::spearman(index, millis);
  const bool pass = mode == streaming::LatencyMode::SlidingWindow ? std::abs(slope) < 0.01 * med : rho > 0.9;

  auto csv = open_out(ctx.output(o.csv));
  csv << "chunk_index,frames,millis\n" << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) csv << r.chunk_index << ',' << r.frames << ',' << r.millis << '\n';
  nlohmann::json summary = {{"mode", streaming::to_string(mode)}, {"chunks", rows.size()}, {"slope_ms_per_chunk", slope},
                            {"median_ms", med}, {"spearman", rho}, {"pass", pass}};
  open_out(ctx.output(o.summary)) << summary.dump(2) << '\n';
  *ctx.out << streaming::to_string(mode) << ": median " << med << " ms, slope " << slope << " ms/chunk, spearman "
           << rho << " -> " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kExitOk : kExitInvariant;
}

// -- argument recording ----------------------------------------------------

std::string option_name(const CLI::Option* opt) {
  const auto& l = opt->get_lnames();
  return l.empty() ? opt->get_name() : "--" + l.front();
}

void record_options(const CLI::App* app, const std::set<std::string>& paths, const RunContext& ctx,
                    std::vector<std::string>& args, nlohmann::json& config) {
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = option_name(opt);
    if (name == "--help" || name == "--out-dir" || name == "--replay") continue;
    if (auto it = ctx.resolved.find(name); it != ctx.resolved.end()) {
      args.insert(args.end(), {name, it->second});
      config[name.substr(2)] = it->second;
      continue;
    }
    if (opt->get_expected_max() == 0) {
      config[name.substr(2)] = opt->count() > 0;
      if (opt->count() > 0) args.push_back(name);
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty() && !opt->get_default_str().empty()) values = {opt->get_default_str()};
    if (values.empty()) continue;
    for (auto& v : values) {
      if (paths.count(name)) v = fs::absolute(v).lexically_normal().string();
      args.insert(args.end(), {name, v});
    }
    config[name.substr(2)] = values.size() == 1 ? nlohmann::json(values.front()) : nlohmann::json(values);
  }
}

int run_parsed(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const std::optional<std::string>& out_dir_override) {
  CLI::App app{"StreamFlow: block-masked flow-matching decoder with streaming generation", "streamflow"};
  app.option_defaults()->always_capture_default();
  Globals g;
  app.add_option("--threads", g.threads, "OpenMP threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out-dir", g.out_dir, "directory for outputs and the run manifest");
  app.add_option("--replay", g.replay, "re-run the command recorded in a run manifest");
  app.require_subcommand(0, 1);
  std::set<std::string> paths;

  MakeDataOptions md;
  auto* c_make = app.add_subcommand("make-data", "synthesize the toy corpus");
  c_make->add_option("--config", md.config, "corpus config JSON");
  c_make->add_option("--utterances", md.utterances)->check(CLI::PositiveNumber);
  c_make->add_option("--min-tokens", md.min_tokens)->check(CLI::PositiveNumber);
  c_make->add_option("--max-tokens", md.max_tokens)->check(CLI::PositiveNumber);
  c_make->add_option("--noise-std", md.noise_std)->check(CLI::NonNegativeNumber);
  c_make->add_option("--out", md.out, "corpus directory, relative to --out-dir");
  paths.insert("--config");

  TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "OT-CFM training on a corpus");
  c_train->add_option("--data", tr.data, "corpus directory")->required();
  c_train->add_option("--steps", tr.steps)->check(CLI::NonNegativeNumber);
  c_train->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  c_train->add_option("--batch-frames", tr.batch_frames)->check(CLI::PositiveNumber);
  c_train->add_option("--cond-drop", tr.cond_drop)->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--preset", tr.preset);
  c_train->add_option("--layers", tr.layers)->check(CLI::PositiveNumber);
  c_train->add_option("--block-size", tr.block_size)->check(CLI::PositiveNumber);
  c_train->add_option("--log-every", tr.log_every);
  c_train->add_option("--checkpoint-out", tr.checkpoint_out);
  c_train->add_option("--loss-csv", tr.loss_csv);
  paths.insert("--data");

  GenerateOptions gen;
  auto* c_gen = app.add_subcommand("generate", "sample features for a token sequence");
  add_model_options(c_gen, gen.model, paths, 4, 8);
  c_gen->add_option("--mode", gen.mode)->check(CLI::IsMember({"batch", "stream"}));
  c_gen->add_option("--chunk-blocks", gen.chunk_blocks)->check(CLI::PositiveNumber);
  c_gen->add_option("--context-mult", gen.context_mult)->check(CLI::PositiveNumber);
  c_gen->add_option("--ode-steps", gen.ode_steps)->check(CLI::PositiveNumber);
  c_gen->add_option("--cfg-alpha", gen.cfg_alpha)->check(CLI::NonNegativeNumber);
  c_gen->add_option("--noise-seed", gen.noise_seed, "defaults to --seed");
  c_gen->add_option("--max-inflight", gen.max_inflight)->check(CLI::PositiveNumber);
  c_gen->add_option("--tokens", gen.tokens, "JSON list of token ids")->required();
  c_gen->add_option("--speaker", gen.speaker, "speaker embedding (SFTN vector)");
  c_gen->add_option("--out", gen.out, "features file, relative to --out-dir");
  c_gen->add_option("--latency-csv", gen.latency_csv, "per-chunk timings in stream mode");
  paths.insert({"--tokens", "--speaker"});

  AnalyzeOptions an;
  auto* c_rf = app.add_subcommand("analyze-rf", "analytic vs empirical receptive field");
  an.model.preset = "sr";
  add_model_options(c_rf, an.model, paths, masks::kFullSizeLayers, masks::kFullSizeBlockSize);
  c_rf->add_option("--probe-seed", an.probe_seed);
  c_rf->add_option("--report", an.report);

  BenchOptions be;
  auto* c_bench = app.add_subcommand("bench", "per-chunk latency over a long utterance");
  add_model_options(c_bench, be.model, paths, 4, 8);
  c_bench->add_option("--mode", be.mode)->check(CLI::IsMember({"sliding_window", "causal_cumulative", "sliding", "causal"}));
  c_bench->add_option("--chunks", be.chunks);
  c_bench->add_option("--repeats", be.repeats)->check(CLI::PositiveNumber);
  c_bench->add_option("--chunk-blocks", be.chunk_blocks)->check(CLI::PositiveNumber);
  c_bench->add_option("--context-mult", be.context_mult)->check(CLI::PositiveNumber);
  c_bench->add_option("--ode-steps", be.ode_steps)->check(CLI::PositiveNumber);
  c_bench->add_option("--cfg-alpha", be.cfg_alpha)->check(CLI::NonNegativeNumber);
  c_bench->add_option("--csv", be.csv);
  c_bench->add_option("--summary", be.summary);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  if (!g.replay.empty()) {
    if (!app.get_subcommands().empty()) {
      err << "--replay takes no subcommand\n";
      return kExitUsage;
    }
    const auto m = read_manifest(g.replay);
    const std::string dir = out_dir_override ? *out_dir_override
                            : app.count("--out-dir")  ? g.out_dir
                                                      : fs::path(g.replay).parent_path().string();
    return run_parsed(m.args, out, err, dir);
  }
  if (app.get_subcommands().empty()) {
    err << "a subcommand is required\n\n" << app.help();
    return kExitUsage;
  }
  if (out_dir_override) g.out_dir = *out_dir_override;

  CLI::App* cmd = app.get_subcommands().front();
  RunContext ctx;
  ctx.g = g;
  ctx.out_dir = g.out_dir;
  ctx.out = &out;
  ctx.seeds["seed"] = g.seed;
  numerics::set_num_threads(static_cast<int>(g.threads));
  const auto start = std::chrono::steady_clock::now();

  int code = kExitOk;
  const std::string name = cmd->get_name();
  if (name == "make-data") cmd_make_data(ctx, md, cmd);
  else if (name == "train") cmd_train(ctx, tr);
  else if (name == "generate") cmd_generate(ctx, gen);
  else if (name == "analyze-rf") code = cmd_analyze_rf(ctx, an);
  else code = cmd_bench(ctx, be);

  RunManifest m;
  m.command = name;
  m.config = nlohmann::json::object();
  record_options(&app, paths, ctx, m.args, m.config);
  m.args.push_back(name);
  nlohmann::json sub_config = nlohmann::json::object();
  record_options(cmd, paths, ctx, m.args, sub_config);
  m.config[name] = sub_config;
  m.seeds = ctx.seeds;
  m.git_describe = git_describe();
  m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  m.outputs = ctx.outputs;
  write_manifest(ctx.out_dir, m);
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run_parsed(args, out, err, std::nullopt);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace streamflow::harness
