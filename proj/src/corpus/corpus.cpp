#include "streamflow/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "streamflow/error.hpp"
#include "streamflow/rng.hpp"
#include "streamflow/tensor_io.hpp"

namespace streamflow::corpus {

namespace {

// RNG stream layout: utterances use their index; shared tables use high streams.
constexpr std::uint64_t kPrototypeStream = 1ULL << 40;
constexpr std::uint64_t kSpeakerMapStream = (1ULL << 40) + 1;
constexpr const char* kFormat = "streamflow-corpus";

std::string utt_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt%05zu", i);
  return buf;
}

}  // namespace

void CorpusConfig::validate() const {
  auto fail = [](const std::string& w) { throw Error(ErrorKind::Config, "corpus config: " + w); };
  if (token_vocab < 2) fail("token_vocab must be >= 2");
  if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
  if (min_tokens == 0 || min_tokens > max_tokens) fail("need 1 <= min_tokens <= max_tokens");
  if (feature_dim == 0 || upsample_factor == 0) fail("feature_dim and upsample_factor must be >= 1");
  if (!(trend_period_frames > 0.0)) fail("trend_period_frames must be > 0");
}

nlohmann::json config_to_json(const CorpusConfig& c) {
  return {{"num_utterances", c.num_utterances}, {"min_tokens", c.min_tokens},
          {"max_tokens", c.max_tokens},         {"token_vocab", c.token_vocab},
          {"feature_dim", c.feature_dim},       {"speaker_dim", c.speaker_dim},
          {"upsample_factor", c.upsample_factor}, {"noise_std", c.noise_std},
          {"trend_amplitude", c.trend_amplitude}, {"trend_period_frames", c.trend_period_frames},
          {"speaker_scale", c.speaker_scale},   {"seed", c.seed}};
}

CorpusConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Format, "corpus config must be a JSON object");
  CorpusConfig c;
  auto count = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned()) {
      throw Error(ErrorKind::Format, std::string("corpus config: field '") + key + "' must be a non-negative integer");
    }
    dst = j[key].get<std::remove_reference_t<decltype(dst)>>();
  };
  auto real = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw Error(ErrorKind::Format, std::string("corpus config: field '") + key + "' must be a number");
    dst = j[key].get<double>();
  };
  count("num_utterances", c.num_utterances);
  count("min_tokens", c.min_tokens);
  count("max_tokens", c.max_tokens);
  count("token_vocab", c.token_vocab);
  count("feature_dim", c.feature_dim);
  count("speaker_dim", c.speaker_dim);
  count("upsample_factor", c.upsample_factor);
  count("seed", c.seed);
  real("noise_std", c.noise_std);
  real("trend_amplitude", c.trend_amplitude);
  real("trend_period_frames", c.trend_period_frames);
  real("speaker_scale", c.speaker_scale);
  c.validate();
  return c;
}

Matrix prototypes(const CorpusConfig& config) {
  numerics::SeededRng rng(config.seed, kPrototypeStream);
  Matrix p(config.token_vocab, config.feature_dim);
  for (float& v : p.values()) v = static_cast<float>(rng.next_gaussian());
  return p;
}

std::vector<float> speaker_offset(const CorpusConfig& config, const std::vector<float>& speaker) {
  // offset = scale · u (vᵀ s) with fixed unit-variance u, v.
  numerics::SeededRng rng(config.seed, kSpeakerMapStream);
  std::vector<double> u(config.feature_dim), v(config.speaker_dim);
  for (auto& e : u) e = rng.next_gaussian();
  for (auto& e : v) e = rng.next_gaussian() / std::sqrt(std::max<double>(1.0, static_cast<double>(config.speaker_dim)));
  double proj = 0.0;
  for (std::size_t i = 0; i < std::min(v.size(), speaker.size()); ++i) proj += v[i] * speaker[i];
  std::vector<float> out(config.feature_dim);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = static_cast<float>(config.speaker_scale * u[c] * proj);
  return out;
}

Matrix class_targets(const CorpusConfig& config, const std::vector<float>& speaker) {
  Matrix t = prototypes(config);
  const auto off = speaker_offset(config, speaker);
  for (std::size_t k = 0; k < t.rows(); ++k)
    for (std::size_t c = 0; c < t.cols(); ++c) t(k, c) += off[c];
  return t;
}

double separability(const CorpusConfig& config) {
  const Matrix p = prototypes(config);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < p.rows(); ++a)
    for (std::size_t b = a + 1; b < p.rows(); ++b) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) d2 += (p(a, c) - p(b, c)) * (p(a, c) - p(b, c));
      total += std::sqrt(d2);
      ++pairs;
    }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

Utterance synth_utterance(const CorpusConfig& config, std::size_t index) {
  config.validate();
  if (index >= config.num_utterances) {
    throw Error(ErrorKind::Input, "utterance index " + std::to_string(index) + " >= " + std::to_string(config.num_utterances));
  }
  if (config.noise_std > 0.0 && separability(config) <= 5.0 * config.noise_std) {
    throw Error(ErrorKind::Invariant, "prototype separation " + std::to_string(separability(config)) +
                                          " is not above 5x noise_std " + std::to_string(config.noise_std));
  }
  numerics::SeededRng rng(config.seed, index);
  Utterance u;
  const std::size_t span = config.max_tokens - config.min_tokens + 1;
  const std::size_t len = config.min_tokens + static_cast<std::size_t>(rng.next_below(span));
  for (std::size_t i = 0; i < len; ++i) u.tokens.push_back(static_cast<std::uint32_t>(rng.next_below(config.token_vocab)));
  u.speaker.resize(config.speaker_dim);
  for (auto& s : u.speaker) s = static_cast<float>(rng.next_gaussian());
  const double phase = 2.0 * std::numbers::pi * rng.next_uniform();

  const Matrix proto = prototypes(config);
  const auto offset = speaker_offset(config, u.speaker);
  const std::size_t frames = len * config.upsample_factor;
  u.features = Matrix(frames, config.feature_dim);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto k = u.tokens[f / config.upsample_factor];
    for (std::size_t c = 0; c < config.feature_dim; ++c) {
      const double trend = config.trend_amplitude *
                           std::sin(2.0 * std::numbers::pi * static_cast<double>(f) / config.trend_period_frames + phase +
                                    0.7 * static_cast<double>(c));
      const double noise = config.noise_std * rng.next_gaussian();
      u.features(f, c) = static_cast<float>(proto(k, c) + trend + noise + offset[c]);
    }
  }
  return u;
}

std::vector<Utterance> synth_corpus(const CorpusConfig& config) {
  std::vector<Utterance> out;
  out.reserve(config.num_utterances);
  for (std::size_t i = 0; i < config.num_utterances; ++i) out.push_back(synth_utterance(config, i));
  return out;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create corpus directory " + dir.string() + ": " + ec.message());
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    const std::string stem = utt_stem(i);
    {
      std::ofstream out(dir / (stem + ".tokens.json"));
      if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / (stem + ".tokens.json")).string());
      out << nlohmann::json(u.tokens).dump() << '\n';
    }
    numerics::write_matrix(dir / (stem + ".features.sftn"), u.features);
    numerics::write_vector(dir / (stem + ".speaker.sftn"), u.speaker);
    entries.push_back({{"tokens", stem + ".tokens.json"},
                       {"features", stem + ".features.sftn"},
                       {"speaker", stem + ".speaker.sftn"},
                       {"frames", u.features.rows()}});
  }
  const nlohmann::json manifest = {
      {"format", kFormat}, {"version", 1}, {"config", config_to_json(corpus.config)}, {"utterances", entries}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Corpus read_corpus(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  auto field = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key)) {
      throw Error(ErrorKind::Format, path.string() + ": missing field '" + key + "'");
    }
    return obj[key];
  };
  if (field(m, "format") != kFormat) throw Error(ErrorKind::Format, path.string() + ": field 'format' is not '" + std::string(kFormat) + "'");
  Corpus c;
  c.config = config_from_json(field(m, "config"));
  const auto& entries = field(m, "utterances");
  if (!entries.is_array()) throw Error(ErrorKind::Format, path.string() + ": field 'utterances' must be a list");
  for (const auto& e : entries) {
    Utterance u;
    const auto tok_path = dir / field(e, "tokens").get<std::string>();
    std::ifstream tin(tok_path);
    if (!tin) throw Error(ErrorKind::Io, "cannot open " + tok_path.string());
    try {
      nlohmann::json tj;
      tin >> tj;
      u.tokens = tj.get<std::vector<std::uint32_t>>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::Format, tok_path.string() + ": " + ex.what());
    }
    u.features = numerics::read_matrix(dir / field(e, "features").get<std::string>());
    u.speaker = numerics::read_vector(dir / field(e, "speaker").get<std::string>());
    if (u.features.rows() != u.tokens.size() * c.config.upsample_factor) {
      throw Error(ErrorKind::Format, path.string() + ": field 'frames' inconsistent with tokens for " + tok_path.string());
    }
    c.utterances.push_back(std::move(u));
  }
  return c;
}

}  // namespace streamflow::corpus
