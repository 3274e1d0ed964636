#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamflow/matrix.hpp"

namespace streamflow::masks {

using numerics::BoolMatrix;

/// Block, Backward and Forward are the three block-wise masks. Causal (every
/// earlier block) and Full (no mask) exist only to emulate the non-streaming
/// and history-accumulating baselines.
enum class MaskKind { Block, Backward, Forward, Causal, Full };

std::string_view to_string(MaskKind kind);
MaskKind parse_mask_kind(std::string_view name);

constexpr std::size_t block_index(std::size_t frame, std::size_t block_size) noexcept { return frame / block_size; }

/// n×n mask; entry (i, j) is true when frame i may attend to frame j. A final
/// partial block is treated as a (shorter) block.
BoolMatrix build_mask(MaskKind kind, std::size_t n, std::size_t block_size);

struct MaskSchedule {
  std::vector<MaskKind> layer_masks;  // 0-based layer order
  std::size_t block_size_frames = 1;

  std::size_t layers() const noexcept { return layer_masks.size(); }
  /// Throws a configuration error if empty or block size is zero.
  void validate() const;
  friend bool operator==(const MaskSchedule&, const MaskSchedule&) = default;
};

/// Number of past/future blocks a single network application can see.
/// `std::nullopt` means unbounded (Causal past, Full past and future).
struct ReceptiveField {
  std::optional<std::size_t> past_blocks;
  std::optional<std::size_t> future_blocks;

  bool bounded() const noexcept { return past_blocks.has_value() && future_blocks.has_value(); }
  /// (p + q + 1) · b frames, or nullopt when unbounded.
  std::optional<std::size_t> span_frames(std::size_t block_size) const;
  friend bool operator==(const ReceptiveField&, const ReceptiveField&) = default;
};

ReceptiveField receptive_field(const MaskSchedule& schedule);

enum class Preset { SR, LR, Full, Causal };

std::string_view to_string(Preset preset);
Preset parse_preset(std::string_view name);

inline constexpr std::size_t kFullSizeLayers = 22;
inline constexpr std::size_t kFullSizeBlockSize = 24;

/// Builds a schedule from 1-based layer positions; positions not listed are Block.
MaskSchedule schedule_from_positions(std::size_t layers, std::size_t block_size,
                                     const std::vector<std::size_t>& backward_1based,
                                     const std::vector<std::size_t>& forward_1based);

/// Preset for an arbitrary depth. At 22 layers SR is Forward@1, Backward@7,14
/// and LR adds Forward@22. Other depths place Backward layers at round(7L/22)
/// and round(14L/22), moved to the next free layer on collision.
MaskSchedule preset_schedule(Preset preset, std::size_t layers, std::size_t block_size);

nlohmann::json schedule_to_json(const MaskSchedule& schedule);
MaskSchedule schedule_from_json(const nlohmann::json& j);
MaskSchedule load_schedule(const std::filesystem::path& path);
void save_schedule(const std::filesystem::path& path, const MaskSchedule& schedule);

}  // namespace streamflow::masks
