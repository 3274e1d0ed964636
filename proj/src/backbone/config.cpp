#include "streamflow/backbone.hpp"

#include "streamflow/error.hpp"

namespace streamflow::backbone {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
  if (layers == 0) fail("layers must be >= 1");
  if (heads == 0 || hidden_dim % heads != 0) fail("hidden_dim must be divisible by heads");
  if (hidden_dim % 2 != 0) fail("hidden_dim must be even (sinusoidal features)");
  if (feature_dim == 0) fail("feature_dim must be >= 1");
  if (token_vocab == 0) fail("token_vocab must be >= 1");
  if (upsample_factor == 0) fail("upsample_factor must be >= 1");
  if (mlp_ratio == 0) fail("mlp_ratio must be >= 1");
  if (!(dropout >= 0.0f && dropout < 1.0f)) fail("dropout must lie in [0, 1)");
  schedule.validate();
  if (schedule.layers() != layers) {
    fail("schedule has " + std::to_string(schedule.layers()) + " layers, model has " + std::to_string(layers));
  }
}

ModelConfig ModelConfig::with_schedule(masks::MaskSchedule s) const {
  ModelConfig c = *this;
  c.layers = s.layers();
  c.schedule = std::move(s);
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.schedule = masks::preset_schedule(masks::Preset::SR, c.layers, 8);
  return c;
}

ModelConfig ModelConfig::full_size() {
  ModelConfig c;
  c.layers = masks::kFullSizeLayers;
  c.hidden_dim = 1024;
  c.heads = 16;
  c.feature_dim = 80;
  c.token_vocab = 4096;
  c.token_embed_dim = 512;
  c.speaker_dim = 192;
  c.upsample_factor = 4;
  c.dropout = 0.1f;
  c.schedule = masks::preset_schedule(masks::Preset::SR, masks::kFullSizeLayers, masks::kFullSizeBlockSize);
  return c;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"hidden_dim", c.hidden_dim},
          {"heads", c.heads},
          {"feature_dim", c.feature_dim},
          {"token_vocab", c.token_vocab},
          {"token_embed_dim", c.token_embed_dim},
          {"speaker_dim", c.speaker_dim},
          {"upsample_factor", c.upsample_factor},
          {"mlp_ratio", c.mlp_ratio},
          {"dropout", c.dropout},
          {"positional", c.positional ? "on" : "off"},
          {"schedule", masks::schedule_to_json(c.schedule)}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto count = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) throw Error(ErrorKind::Format, std::string("model config: missing field '") + key + "'");
    if (!j[key].is_number_unsigned()) {
      throw Error(ErrorKind::Format, std::string("model config: field '") + key + "' must be a non-negative integer");
    }
    dst = j[key].get<std::size_t>();
  };
  count("layers", c.layers);
  count("hidden_dim", c.hidden_dim);
  count("heads", c.heads);
  count("feature_dim", c.feature_dim);
  count("token_vocab", c.token_vocab);
  count("token_embed_dim", c.token_embed_dim);
  count("speaker_dim", c.speaker_dim);
  count("upsample_factor", c.upsample_factor);
  count("mlp_ratio", c.mlp_ratio);
  if (!j.contains("dropout") || !j["dropout"].is_number()) {
    throw Error(ErrorKind::Format, "model config: field 'dropout' must be a number");
  }
  c.dropout = j["dropout"].get<float>();
  const auto pos = j.value("positional", std::string("on"));
  if (pos != "on" && pos != "off") throw Error(ErrorKind::Format, "model config: field 'positional' must be on|off");
  c.positional = pos == "on";
  if (!j.contains("schedule")) throw Error(ErrorKind::Format, "model config: missing field 'schedule'");
  c.schedule = masks::schedule_from_json(j["schedule"]);
  c.validate();
  return c;
}

}  // namespace streamflow::backbone
