#include "streamflow/streaming.hpp"

#include <algorithm>
#include <deque>
#include <future>
#include <limits>

#include "streamflow/error.hpp"
#include "streamflow/rng.hpp"

namespace streamflow::streaming {

using streamflow::Error;
using streamflow::ErrorKind;

void StreamConfig::validate() const {
  if (chunk_blocks == 0) throw Error(ErrorKind::Config, "chunk_blocks must be >= 1");
  if (context_multiplier == 0) throw Error(ErrorKind::Config, "context_multiplier must be >= 1");
  if (max_inflight_chunks == 0) throw Error(ErrorKind::Config, "max_inflight_chunks must be >= 1");
  sampler.validate();
}

std::size_t padded_length(std::size_t frames, std::size_t block_size) {
  if (block_size == 0) throw Error(ErrorKind::Config, "block size must be >= 1");
  return (frames + block_size - 1) / block_size * block_size;
}

namespace {

constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

// Plan for chunk c against a sequence of `total_blocks` padded blocks;
// total_blocks == kUnbounded means the length is not known yet.
ChunkPlan plan_at(std::size_t c, std::size_t total_frames, std::size_t total_blocks, std::size_t b,
                  std::size_t chunk_blocks, const masks::ReceptiveField& rf, std::size_t mult) {
  ChunkPlan plan;
  plan.chunk_index = c;
  const std::size_t emit_lo = c * chunk_blocks;
  const std::size_t emit_hi = std::min(emit_lo + chunk_blocks, total_blocks);
  const std::size_t want_left = rf.past_blocks ? mult * *rf.past_blocks : kUnbounded;
  const std::size_t want_right = rf.future_blocks ? mult * *rf.future_blocks : kUnbounded;
  plan.left_context_blocks = std::min(want_left, emit_lo);
  const std::size_t room_right = total_blocks == kUnbounded ? kUnbounded : total_blocks - emit_hi;
  plan.right_context_blocks = std::min(want_right, room_right);
  plan.window_start_frame = (emit_lo - plan.left_context_blocks) * b;
  plan.window_end_frame = (emit_hi + plan.right_context_blocks) * b;
  plan.emit_start_frame = emit_lo * b;
  plan.emit_end_frame = std::min(emit_hi * b, total_frames);
  return plan;
}

}  // namespace

std::vector<ChunkPlan> plan_chunks(std::size_t total_frames, std::size_t block_size, std::size_t chunk_blocks,
                                   const masks::ReceptiveField& rf, std::size_t context_multiplier) {
  if (total_frames == 0) throw Error(ErrorKind::Input, "plan_chunks: empty sequence");
  if (chunk_blocks == 0) throw Error(ErrorKind::Config, "chunk_blocks must be >= 1");
  if (context_multiplier == 0) throw Error(ErrorKind::Config, "context_multiplier must be >= 1");
  const std::size_t total_blocks = padded_length(total_frames, block_size) / block_size;
  std::vector<ChunkPlan> plans;
  for (std::size_t c = 0; c * chunk_blocks < total_blocks; ++c)
    plans.push_back(plan_at(c, total_frames, total_blocks, block_size, chunk_blocks, rf, context_multiplier));
  return plans;
}

std::size_t frames_required(std::size_t chunk_index, std::size_t block_size, std::size_t chunk_blocks,
                            const masks::ReceptiveField& rf, std::size_t context_multiplier) {
  if (!rf.future_blocks) return kUnbounded;
  return ((chunk_index + 1) * chunk_blocks + context_multiplier * *rf.future_blocks) * block_size;
}

Matrix window_noise(std::size_t start_frame, std::size_t end_frame, std::size_t feature_dim,
                    std::uint64_t noise_seed) {
  Matrix out(end_frame - start_frame, feature_dim);
  for (std::size_t f = start_frame; f < end_frame; ++f)
    for (std::size_t c = 0; c < feature_dim; ++c)
      out(f - start_frame, c) = static_cast<float>(numerics::SeededRng::gaussian_at(noise_seed, f, c));
  return out;
}

Matrix window_noise(const ChunkPlan& plan, std::size_t feature_dim, std::uint64_t noise_seed) {
  return window_noise(plan.window_start_frame, plan.window_end_frame, feature_dim, noise_seed);
}

std::vector<std::uint32_t> pad_frame_ids(std::span<const std::uint32_t> frame_ids, std::size_t block_size) {
  if (frame_ids.empty()) throw Error(ErrorKind::Input, "empty condition");
  std::vector<std::uint32_t> out(frame_ids.begin(), frame_ids.end());
  out.resize(padded_length(out.size(), block_size), out.back());
  return out;
}

ChunkOutput generate_chunk(const ChunkPlan& plan, const backbone::ConditionBundle& window_cond,
                           const ModelParams& params, const ModelConfig& config, const StreamConfig& stream) {
  if (window_cond.frames() != plan.window_frames())
    throw Error(ErrorKind::Input, "condition covers " + std::to_string(window_cond.frames()) + " frames, window has " +
                                      std::to_string(plan.window_frames()));
  const Matrix x0 = window_noise(plan, config.feature_dim, stream.noise_seed);
  const auto start = std::chrono::steady_clock::now();
  const Matrix x1 = flow::euler_sample(x0, window_cond, stream.sampler, params, config, plan.window_start_frame);
  const auto stop = std::chrono::steady_clock::now();
  ChunkOutput out;
  out.frames = x1.slice_rows(plan.emit_start_frame - plan.window_start_frame,
                             plan.emit_end_frame - plan.window_start_frame);
  out.millis = std::chrono::duration<double, std::milli>(stop - start).count();
  return out;
}

Matrix batch_generate(std::span<const std::uint32_t> frame_ids, std::span<const float> speaker,
                      const ModelParams& params, const ModelConfig& config, const flow::SamplerConfig& sampler,
                      std::uint64_t noise_seed) {
  const auto padded = pad_frame_ids(frame_ids, config.block_size());
  const auto cond = backbone::assemble_condition(padded, speaker, params, config);
  const Matrix x0 = window_noise(0, padded.size(), config.feature_dim, noise_seed);
  return flow::euler_sample(x0, cond, sampler, params, config, 0).slice_rows(0, frame_ids.size());
}

namespace {

backbone::ConditionBundle window_condition(const ChunkPlan& plan, std::span<const std::uint32_t> padded_ids,
                                           std::span<const float> speaker, const ModelParams& params,
                                           const ModelConfig& config) {
  return backbone::assemble_condition(padded_ids.subspan(plan.window_start_frame, plan.window_frames()), speaker,
                                      params, config);
}

Matrix concat(const std::vector<Matrix>& parts, std::size_t cols) {
  std::size_t rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (const auto& p : parts) {
    out.set_rows(at, p);
    at += p.rows();
  }
  return out;
}

}  // namespace

StreamResult offline_generate(std::span<const std::uint32_t> frame_ids, std::span<const float> speaker,
                              const ModelParams& params, const ModelConfig& config, const StreamConfig& stream) {
  stream.validate();
  const std::size_t b = config.block_size();
  const auto padded = pad_frame_ids(frame_ids, b);
  const auto plans = plan_chunks(frame_ids.size(), b, stream.chunk_blocks, masks::receptive_field(config.schedule),
                                 stream.context_multiplier);
  StreamResult result;
  std::vector<Matrix> parts;
  for (const auto& plan : plans) {
    auto out = generate_chunk(plan, window_condition(plan, padded, speaker, params, config), params, config, stream);
    result.chunks.push_back({plan.chunk_index, out.frames.rows(), out.millis, frame_ids.size()});
    parts.push_back(std::move(out.frames));
  }
  result.features = concat(parts, config.feature_dim);
  return result;
}

void ConditionStream::push(std::span<const std::uint32_t> frame_ids) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(ErrorKind::Input, "push after close");
    ids_.insert(ids_.end(), frame_ids.begin(), frame_ids.end());
  }
  cv_.notify_all();
}

void ConditionStream::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool ConditionStream::wait_for_frames(std::size_t frames, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return closed_ || ids_.size() >= frames; });
}

std::vector<std::uint32_t> ConditionStream::snapshot(bool* closed) const {
  std::lock_guard lock(mutex_);
  if (closed) *closed = closed_;
  return ids_;
}

StreamResult stream_generate(ConditionStream& source, std::span<const float> speaker, const ModelParams& params,
                             const ModelConfig& config, const StreamConfig& stream, const EmitCallback& emit) {
  stream.validate();
  const std::size_t b = config.block_size();
  const auto rf = masks::receptive_field(config.schedule);

  struct Pending {
    ChunkRecord record;
    std::future<ChunkOutput> result;
  };
  std::deque<Pending> inflight;
  StreamResult result;
  std::vector<Matrix> parts;

  auto drain_one = [&] {
    Pending p = std::move(inflight.front());
    inflight.pop_front();
    ChunkOutput out = p.result.get();
    p.record.frames = out.frames.rows();
    p.record.millis = out.millis;
    if (emit) emit(p.record, out.frames);
    result.chunks.push_back(p.record);
    parts.push_back(std::move(out.frames));
  };

  for (std::size_t c = 0;; ++c) {
    const std::size_t need = frames_required(c, b, stream.chunk_blocks, rf, stream.context_multiplier);
    if (!source.wait_for_frames(need, stream.stall_timeout))
      throw Error(ErrorKind::Timeout, "condition source stalled before chunk " + std::to_string(c));
    bool closed = false;
    const auto ids = source.snapshot(&closed);
    ChunkPlan plan;
    std::vector<std::uint32_t> padded;
    if (closed) {
      if (ids.empty()) throw Error(ErrorKind::Input, "stream closed without condition frames");
      const std::size_t total_blocks = padded_length(ids.size(), b) / b;
      if (c * stream.chunk_blocks >= total_blocks) break;
      plan = plan_at(c, ids.size(), total_blocks, b, stream.chunk_blocks, rf, stream.context_multiplier);
      padded = pad_frame_ids(ids, b);
    } else {
      plan = plan_at(c, kUnbounded, kUnbounded, b, stream.chunk_blocks, rf, stream.context_multiplier);
      padded = ids;
    }
    auto cond = window_condition(plan, padded, speaker, params, config);
    Pending p;
    p.record.chunk_index = c;
    p.record.available_frames = ids.size();
    if (stream.max_inflight_chunks == 1) {
      std::promise<ChunkOutput> done;
      done.set_value(generate_chunk(plan, cond, params, config, stream));
      p.result = done.get_future();
    } else {
      p.result = std::async(std::launch::async, [plan, cond = std::move(cond), &params, &config, &stream] {
        return generate_chunk(plan, cond, params, config, stream);
      });
    }
    inflight.push_back(std::move(p));
    while (inflight.size() >= stream.max_inflight_chunks) drain_one();
  }
  while (!inflight.empty()) drain_one();
  if (parts.empty()) throw Error(ErrorKind::Input, "stream produced no chunks");
  result.features = concat(parts, config.feature_dim);
  return result;
}

std::string_view to_string(LatencyMode mode) {
  return mode == LatencyMode::SlidingWindow ? "sliding_window" : "causal_cumulative";
}

LatencyMode parse_latency_mode(std::string_view name) {
  if (name == "sliding_window" || name == "sliding") return LatencyMode::SlidingWindow;
  if (name == "causal_cumulative" || name == "causal") return LatencyMode::CausalCumulative;
  throw Error(ErrorKind::Config, "unknown latency mode '" + std::string(name) + "'");
}

std::vector<LatencyRow> measure_chunk_latency(const ModelParams& params, const ModelConfig& config,
                                              const StreamConfig& stream, std::size_t total_chunks, LatencyMode mode,
                                              std::size_t repeats, std::uint64_t input_seed) {
  stream.validate();
  if (total_chunks == 0) throw Error(ErrorKind::Config, "total_chunks must be >= 1");
  if (repeats == 0) throw Error(ErrorKind::Config, "repeats must be >= 1");
  const std::size_t b = config.block_size();
  const std::size_t frames = total_chunks * stream.chunk_blocks * b;
  numerics::SeededRng rng(input_seed, 0);
  std::vector<std::uint32_t> ids(frames);
  for (auto& id : ids) id = static_cast<std::uint32_t>(rng.next_below(config.token_vocab));
  std::vector<float> speaker(config.speaker_dim);
  for (auto& s : speaker) s = static_cast<float>(rng.next_gaussian());
  const auto cond_all = backbone::assemble_condition(ids, speaker, params, config);

  auto plans = plan_chunks(frames, b, stream.chunk_blocks, masks::receptive_field(config.schedule),
                           stream.context_multiplier);
  std::vector<LatencyRow> rows;
  for (auto plan : plans) {
    if (mode == LatencyMode::CausalCumulative) {
      plan.left_context_blocks = plan.emit_start_frame / b;
      plan.window_start_frame = 0;
    }
    backbone::ConditionBundle cond{cond_all.cond.slice_rows(plan.window_start_frame, plan.window_end_frame)};
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < repeats; ++r)
      best = std::min(best, generate_chunk(plan, cond, params, config, stream).millis);
    rows.push_back({plan.chunk_index, plan.window_frames(), best});
  }
  return rows;
}

}  // namespace streamflow::streaming
