#include "streamflow/masks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "streamflow/error.hpp"

namespace streamflow::masks {

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::Block: return "block";
    case MaskKind::Backward: return "backward";
    case MaskKind::Forward: return "forward";
    case MaskKind::Causal: return "causal";
    case MaskKind::Full: return "full";
  }
  return "?";
}

MaskKind parse_mask_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  for (auto k : {MaskKind::Block, MaskKind::Backward, MaskKind::Forward, MaskKind::Causal, MaskKind::Full}) {
    if (lower == to_string(k)) return k;
  }
  throw Error(ErrorKind::Format, "unknown mask kind '" + std::string(name) + "'");
}

BoolMatrix build_mask(MaskKind kind, std::size_t n, std::size_t block_size) {
  if (n == 0 || block_size == 0) throw Error(ErrorKind::Config, "build_mask: n and block size must be >= 1");
  BoolMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bi = block_index(i, block_size);
    // Allowed key blocks form a contiguous range [lo, hi].
    std::size_t lo = bi, hi = bi;
    switch (kind) {
      case MaskKind::Block: break;
      case MaskKind::Backward: lo = bi == 0 ? 0 : bi - 1; break;
      case MaskKind::Forward: hi = bi + 1; break;
      case MaskKind::Causal: lo = 0; break;
      case MaskKind::Full: lo = 0; hi = n; break;
    }
    const std::size_t begin = lo * block_size;
    const std::size_t end = std::min(n, (hi + 1) * block_size);
    for (std::size_t j = begin; j < end; ++j) m.set(i, j, true);
  }
  return m;
}

void MaskSchedule::validate() const {
  if (block_size_frames == 0) throw Error(ErrorKind::Config, "schedule block_size_frames must be >= 1");
  if (layer_masks.empty()) throw Error(ErrorKind::Config, "schedule must have at least one layer");
}

std::optional<std::size_t> ReceptiveField::span_frames(std::size_t block_size) const {
  if (!bounded()) return std::nullopt;
  return (*past_blocks + *future_blocks + 1) * block_size;
}

ReceptiveField receptive_field(const MaskSchedule& schedule) {
  schedule.validate();
  ReceptiveField rf{0, 0};
  for (auto k : schedule.layer_masks) {
    switch (k) {
      case MaskKind::Block: break;
      case MaskKind::Backward:
        if (rf.past_blocks) ++*rf.past_blocks;
        break;
      case MaskKind::Forward:
        if (rf.future_blocks) ++*rf.future_blocks;
        break;
      case MaskKind::Causal: rf.past_blocks.reset(); break;
      case MaskKind::Full:
        rf.past_blocks.reset();
        rf.future_blocks.reset();
        break;
    }
  }
  return rf;
}

std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::SR: return "sr";
    case Preset::LR: return "lr";
    case Preset::Full: return "full";
    case Preset::Causal: return "causal";
  }
  return "?";
}

Preset parse_preset(std::string_view name) {
  for (auto p : {Preset::SR, Preset::LR, Preset::Full, Preset::Causal}) {
    if (name == to_string(p)) return p;
  }
  throw Error(ErrorKind::Config, "unknown preset '" + std::string(name) + "' (expected sr|lr|full|causal)");
}

MaskSchedule schedule_from_positions(std::size_t layers, std::size_t block_size,
                                     const std::vector<std::size_t>& backward_1based,
                                     const std::vector<std::size_t>& forward_1based) {
  MaskSchedule s{std::vector<MaskKind>(layers, MaskKind::Block), block_size};
  auto place = [&](std::size_t pos, MaskKind kind) {
    if (pos < 1 || pos > layers) throw Error(ErrorKind::Config, "layer position " + std::to_string(pos) + " out of range");
    if (s.layer_masks[pos - 1] != MaskKind::Block) {
      throw Error(ErrorKind::Config, "layer position " + std::to_string(pos) + " assigned twice");
    }
    s.layer_masks[pos - 1] = kind;
  };
  for (auto p : forward_1based) place(p, MaskKind::Forward);
  for (auto p : backward_1based) place(p, MaskKind::Backward);
  s.validate();
  return s;
}

MaskSchedule preset_schedule(Preset preset, std::size_t layers, std::size_t block_size) {
  if (layers == 0) throw Error(ErrorKind::Config, "preset needs at least one layer");
  switch (preset) {
    case Preset::Full: return MaskSchedule{std::vector<MaskKind>(layers, MaskKind::Full), block_size};
    case Preset::Causal: return MaskSchedule{std::vector<MaskKind>(layers, MaskKind::Causal), block_size};
    case Preset::SR:
    case Preset::LR: break;
  }
  const bool lr = preset == Preset::LR;
  const std::size_t needed = lr ? 4 : 3;
  if (layers < needed) {
    throw Error(ErrorKind::Config, std::string(to_string(preset)) + " preset needs at least " + std::to_string(needed) +
                                       " layers, got " + std::to_string(layers));
  }
  std::vector<std::size_t> forward{1};
  if (lr) forward.push_back(layers);
  std::vector<bool> taken(layers + 1, false);
  for (auto f : forward) taken[f] = true;
  std::vector<std::size_t> backward;
  for (double frac : {7.0 / 22.0, 14.0 / 22.0}) {
    auto pos = static_cast<std::size_t>(std::lround(frac * static_cast<double>(layers)));
    pos = std::clamp<std::size_t>(pos, 1, layers);
    while (taken[pos]) pos = pos % layers + 1;
    taken[pos] = true;
    backward.push_back(pos);
  }
  return schedule_from_positions(layers, block_size, backward, forward);
}

nlohmann::json schedule_to_json(const MaskSchedule& schedule) {
  nlohmann::json layers = nlohmann::json::array();
  for (auto k : schedule.layer_masks) layers.push_back(std::string(to_string(k)));
  return {{"layers", layers}, {"block_size_frames", schedule.block_size_frames}};
}

MaskSchedule schedule_from_json(const nlohmann::json& j) {
  MaskSchedule s;
  const nlohmann::json* layers = &j;
  if (j.is_object()) {
    if (!j.contains("layers")) throw Error(ErrorKind::Format, "schedule: missing field 'layers'");
    if (!j.contains("block_size_frames")) throw Error(ErrorKind::Format, "schedule: missing field 'block_size_frames'");
    if (!j["block_size_frames"].is_number_unsigned()) {
      throw Error(ErrorKind::Format, "schedule: field 'block_size_frames' must be a positive integer");
    }
    s.block_size_frames = j["block_size_frames"].get<std::size_t>();
    layers = &j["layers"];
  } else {
    throw Error(ErrorKind::Format, "schedule: expected an object with 'layers' and 'block_size_frames'");
  }
  if (!layers->is_array()) throw Error(ErrorKind::Format, "schedule: field 'layers' must be a list");
  for (const auto& e : *layers) {
    if (!e.is_string()) throw Error(ErrorKind::Format, "schedule: layer entries must be strings");
    s.layer_masks.push_back(parse_mask_kind(e.get<std::string>()));
  }
  s.validate();
  return s;
}

MaskSchedule load_schedule(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open schedule " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "schedule " + path.string() + ": " + e.what());
  }
  return schedule_from_json(j);
}

void save_schedule(const std::filesystem::path& path, const MaskSchedule& schedule) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write schedule " + path.string());
  out << schedule_to_json(schedule).dump(2) << '\n';
}

}  // namespace streamflow::masks
