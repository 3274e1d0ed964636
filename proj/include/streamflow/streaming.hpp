#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <vector>

#include "streamflow/backbone.hpp"
#include "streamflow/flow.hpp"
#include "streamflow/masks.hpp"

namespace streamflow::streaming {

using backbone::ModelConfig;
using backbone::ModelParams;
using numerics::Matrix;

/// Frame ranges are half-open. Windows always start and end on block
/// boundaries of the padded sequence; emit ranges tile [0, total_frames).
struct ChunkPlan {
  std::size_t chunk_index = 0;
  std::size_t window_start_frame = 0;
  std::size_t window_end_frame = 0;
  std::size_t emit_start_frame = 0;
  std::size_t emit_end_frame = 0;
  std::size_t left_context_blocks = 0;
  std::size_t right_context_blocks = 0;

  std::size_t window_frames() const noexcept { return window_end_frame - window_start_frame; }
  std::size_t emit_frames() const noexcept { return emit_end_frame - emit_start_frame; }
  friend bool operator==(const ChunkPlan&, const ChunkPlan&) = default;
};

struct StreamConfig {
  std::size_t chunk_blocks = 2;
  std::size_t context_multiplier = 1;
  flow::SamplerConfig sampler;
  std::uint64_t noise_seed = 0;
  std::size_t max_inflight_chunks = 1;
  std::chrono::milliseconds stall_timeout{10000};

  void validate() const;
};

/// Smallest multiple of `block_size` that holds `frames`.
std::size_t padded_length(std::size_t frames, std::size_t block_size);

std::vector<ChunkPlan> plan_chunks(std::size_t total_frames, std::size_t block_size, std::size_t chunk_blocks,
                                   const masks::ReceptiveField& rf, std::size_t context_multiplier);

/// Condition frames that must exist before chunk `chunk_index` can run, when
/// the stream has not ended: the unclipped window end. Unbounded future
/// context never becomes ready before end of stream (returns SIZE_MAX).
std::size_t frames_required(std::size_t chunk_index, std::size_t block_size, std::size_t chunk_blocks,
                            const masks::ReceptiveField& rf, std::size_t context_multiplier);

/// Noise for global frames [start, end): entry (f, c) is a pure function of
/// (noise_seed, f, c), so overlapping windows agree bitwise.
Matrix window_noise(std::size_t start_frame, std::size_t end_frame, std::size_t feature_dim, std::uint64_t noise_seed);
Matrix window_noise(const ChunkPlan& plan, std::size_t feature_dim, std::uint64_t noise_seed);

/// Repeats the last frame id until the length is a multiple of `block_size`.
std::vector<std::uint32_t> pad_frame_ids(std::span<const std::uint32_t> frame_ids, std::size_t block_size);

struct ChunkOutput {
  Matrix frames;        // emit range only
  double millis = 0.0;  // sampler wall-clock
};

/// `window_cond` must cover exactly the window frames.
ChunkOutput generate_chunk(const ChunkPlan& plan, const backbone::ConditionBundle& window_cond,
                           const ModelParams& params, const ModelConfig& config, const StreamConfig& stream);

/// Non-streaming reference: one Euler solve over the padded sequence with the
/// same position-keyed noise, truncated to the true length.
Matrix batch_generate(std::span<const std::uint32_t> frame_ids, std::span<const float> speaker,
                      const ModelParams& params, const ModelConfig& config, const flow::SamplerConfig& sampler,
                      std::uint64_t noise_seed);

struct ChunkRecord {
  std::size_t chunk_index = 0;
  std::size_t frames = 0;            // emitted
  double millis = 0.0;
  std::size_t available_frames = 0;  // condition frames received when the chunk started
};

struct StreamResult {
  Matrix features;
  std::vector<ChunkRecord> chunks;
};

/// Chunk-by-chunk loop over a fully known condition.
StreamResult offline_generate(std::span<const std::uint32_t> frame_ids, std::span<const float> speaker,
                              const ModelParams& params, const ModelConfig& config, const StreamConfig& stream);

/// Thread-safe frame-id queue fed by a producer. `close` marks end of stream.
class ConditionStream {
 public:
  void push(std::span<const std::uint32_t> frame_ids);
  void close();

  /// Blocks until at least `frames` ids are present or the stream is closed.
  /// Returns false on timeout.
  bool wait_for_frames(std::size_t frames, std::chrono::milliseconds timeout);
  /// Copy of everything received so far and whether the stream is closed.
  std::vector<std::uint32_t> snapshot(bool* closed) const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<std::uint32_t> ids_;
  bool closed_ = false;
};

using EmitCallback = std::function<void(const ChunkRecord&, const Matrix&)>;

/// Emits each chunk as soon as its window's condition frames have arrived.
/// Up to max_inflight_chunks windows are solved concurrently; emission stays
/// in plan order. Throws a timeout error if the source stalls.
StreamResult stream_generate(ConditionStream& source, std::span<const float> speaker, const ModelParams& params,
                             const ModelConfig& config, const StreamConfig& stream, const EmitCallback& emit = {});

enum class LatencyMode { SlidingWindow, CausalCumulative };

std::string_view to_string(LatencyMode mode);
LatencyMode parse_latency_mode(std::string_view name);

struct LatencyRow {
  std::size_t chunk_index = 0;
  std::size_t frames = 0;  // window frames processed
  double millis = 0.0;
};

/// Per-chunk sampler time over a synthetic `total_chunks`-chunk utterance.
/// CausalCumulative re-runs every chunk with all history in the window.
/// Each chunk is timed `repeats` times and the minimum kept.
std::vector<LatencyRow> measure_chunk_latency(const ModelParams& params, const ModelConfig& config,
                                              const StreamConfig& stream, std::size_t total_chunks, LatencyMode mode,
                                              std::size_t repeats = 1, std::uint64_t input_seed = 0);

}  // namespace streamflow::streaming
