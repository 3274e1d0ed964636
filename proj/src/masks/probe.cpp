#include "streamflow/probe.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "streamflow/error.hpp"
#include "streamflow/rng.hpp"

namespace streamflow::masks {

ProbeResult empirical_receptive_field(const backbone::ModelParams& params, const backbone::ModelConfig& config,
                                      const MaskSchedule& schedule, std::size_t frames, std::size_t probe_block,
                                      std::uint64_t input_seed, float t) {
  const auto cfg = config.with_schedule(schedule);
  cfg.validate();
  const std::size_t b = schedule.block_size_frames;
  const std::size_t blocks = (frames + b - 1) / b;
  const auto rf = receptive_field(schedule);
  if (probe_block >= blocks) throw Error(ErrorKind::BoundaryProbe, "probe block lies outside the sequence");
  if (rf.bounded()) {
    const std::size_t p = *rf.past_blocks, q = *rf.future_blocks;
    // Changed outputs span [probe - q, probe + p]; keep one untouched block
    // on each side so clipping cannot hide part of the field.
    if (frames % b != 0 || blocks < p + q + 3 || probe_block < q + 1 || probe_block + p + 2 > blocks) {
      throw Error(ErrorKind::BoundaryProbe, "probe block " + std::to_string(probe_block) + " is too close to a boundary for field (past " +
                                                std::to_string(p) + ", future " + std::to_string(q) + ") in " +
                                                std::to_string(blocks) + " blocks");
    }
  }

  numerics::SeededRng rng(input_seed, 0);
  numerics::Matrix x(frames, cfg.feature_dim);
  for (float& v : x.values()) v = static_cast<float>(rng.next_gaussian());
  numerics::Matrix cond_m(frames, cfg.cond_dim());
  for (float& v : cond_m.values()) v = static_cast<float>(rng.next_gaussian());
  const backbone::ConditionBundle cond{cond_m};

  const auto base = backbone::vector_field(x, t, cond, params, cfg);
  numerics::Matrix perturbed = x;
  for (std::size_t f = probe_block * b; f < std::min(frames, (probe_block + 1) * b); ++f)
    for (float& v : perturbed.row(f)) v += 1.0f;
  const auto moved = backbone::vector_field(perturbed, t, cond, params, cfg);

  std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (std::memcmp(base.row(f).data(), moved.row(f).data(), base.cols() * sizeof(float)) != 0) {
      lo = std::min(lo, block_index(f, b));
      hi = std::max(hi, block_index(f, b));
    }
  }
  if (lo > hi) throw Error(ErrorKind::Invariant, "perturbation changed no output frame (identity model?)");
  // Backward masks pull information from earlier blocks, so an input change
  // spreads to later blocks: the past field shows up as downstream change.
  ProbeResult r;
  r.min_changed_block = lo;
  r.max_changed_block = hi;
  r.field.past_blocks = hi - probe_block;
  r.field.future_blocks = probe_block - lo;
  return r;
}

}  // namespace streamflow::masks
