#pragma once

#include <cstddef>
#include <cstdint>

#include "streamflow/backbone.hpp"
#include "streamflow/masks.hpp"

namespace streamflow::masks {

struct ProbeResult {
  ReceptiveField field;
  std::size_t min_changed_block = 0;
  std::size_t max_changed_block = 0;
};

/// Adds +1 to every channel of the frames in `probe_block`, evaluates the
/// vector field once at `t` and reports which output blocks changed bitwise.
/// The returned field is expressed as offsets from the probe block. Throws a
/// boundary-probe error when the analytic field of `schedule` would not fit
/// around the probe inside `frames`.
ProbeResult empirical_receptive_field(const backbone::ModelParams& params, const backbone::ModelConfig& config,
                                      const MaskSchedule& schedule, std::size_t frames, std::size_t probe_block,
                                      std::uint64_t input_seed = 7, float t = 0.5f);

}  // namespace streamflow::masks
