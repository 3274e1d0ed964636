#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamflow/matrix.hpp"

namespace streamflow::corpus {

using numerics::Matrix;

struct CorpusConfig {
  std::size_t num_utterances = 64;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 16;
  std::size_t token_vocab = 32;
  std::size_t feature_dim = 8;
  std::size_t speaker_dim = 4;
  std::size_t upsample_factor = 4;
  double noise_std = 0.1;
  double trend_amplitude = 0.2;
  double trend_period_frames = 64.0;
  double speaker_scale = 0.5;
  std::uint64_t seed = 1234;

  void validate() const;
};

nlohmann::json config_to_json(const CorpusConfig& c);
/// Missing fields keep their defaults; wrong types are format errors.
CorpusConfig config_from_json(const nlohmann::json& j);

struct Utterance {
  std::vector<std::uint32_t> tokens;
  std::vector<float> speaker;
  Matrix features;  // (tokens × upsample_factor) × feature_dim

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// Per-token class prototypes (vocab × feature_dim), fixed by the seed.
Matrix prototypes(const CorpusConfig& config);
/// Feature offset contributed by a speaker vector (rank-one map).
std::vector<float> speaker_offset(const CorpusConfig& config, const std::vector<float>& speaker);
/// Class-k target for an utterance spoken by `speaker`: prototype + speaker offset.
Matrix class_targets(const CorpusConfig& config, const std::vector<float>& speaker);
/// Mean pairwise Euclidean distance between prototypes.
double separability(const CorpusConfig& config);

/// Frame f of token k = prototype[k] + sinusoidal trend + N(0, noise_std²) +
/// speaker offset. Throws an invariant error if prototypes are not separated by
/// more than 5 noise standard deviations.
Utterance synth_utterance(const CorpusConfig& config, std::size_t index);
std::vector<Utterance> synth_corpus(const CorpusConfig& config);

struct Corpus {
  CorpusConfig config;
  std::vector<Utterance> utterances;
};

/// Layout: manifest.json plus per-utterance `uttNNNNN.tokens.json`,
/// `uttNNNNN.features.sftn` and `uttNNNNN.speaker.sftn`.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace streamflow::corpus
