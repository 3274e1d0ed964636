#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "streamflow/corpus.hpp"
#include "streamflow/error.hpp"

using namespace streamflow;
using namespace streamflow::corpus;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("noise-free corpus repeats class targets exactly") {
  CorpusConfig c;
  c.noise_std = 0.0;
  c.trend_amplitude = 0.0;
  c.num_utterances = 5;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto u = synth_utterance(c, i);
    const auto targets = class_targets(c, u.speaker);
    REQUIRE(u.features.rows() == u.tokens.size() * c.upsample_factor);
    for (std::size_t f = 0; f < u.features.rows(); ++f)
      for (std::size_t j = 0; j < c.feature_dim; ++j)
        CHECK(u.features(f, j) == targets(u.tokens[f / c.upsample_factor], j));
  }
}

TEST_CASE("utterances are deterministic and shaped") {
  CorpusConfig c;
  CHECK(synth_utterance(c, 3) == synth_utterance(c, 3));
  CHECK(!(synth_utterance(c, 3) == synth_utterance(c, 4)));
  for (const auto& u : synth_corpus(c)) {
    CHECK(u.tokens.size() >= c.min_tokens);
    CHECK(u.tokens.size() <= c.max_tokens);
    CHECK(u.features.rows() == u.tokens.size() * c.upsample_factor);
    CHECK(u.features.cols() == c.feature_dim);
    CHECK(u.speaker.size() == c.speaker_dim);
    for (auto t : u.tokens) CHECK(t < c.token_vocab);
  }
  CHECK_THROWS_AS(synth_utterance(c, c.num_utterances), Error);
}

TEST_CASE("a larger corpus extends a smaller one") {
  CorpusConfig small, large;
  large.num_utterances = small.num_utterances + 10;
  CHECK(synth_utterance(small, 5) == synth_utterance(large, 5));
}

TEST_CASE("prototypes are well separated") {
  CorpusConfig c;
  CHECK(separability(c) > 5.0 * c.noise_std);
  c.noise_std = 10.0;
  try {
    synth_utterance(c, 0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Invariant);
  }
}

TEST_CASE("corpus config validation and JSON") {
  CorpusConfig c;
  c.noise_std = 0.3;
  c.seed = 99;
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(config_from_json(nlohmann::json::object()).num_utterances == CorpusConfig{}.num_utterances);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"noise_std", "loud"}}), Error);
  c.token_vocab = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = CorpusConfig{};
  c.noise_std = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("corpus files round trip") {
  TempDir tmp("streamflow_corpus_rt");
  CorpusConfig c;
  c.num_utterances = 10;
  const Corpus data{c, synth_corpus(c)};
  write_corpus(tmp.path, data);
  const auto back = read_corpus(tmp.path);
  REQUIRE(back.utterances.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(back.utterances[i].tokens == data.utterances[i].tokens);
    CHECK(back.utterances[i].speaker == data.utterances[i].speaker);
    CHECK(back.utterances[i].features.bitwise_equal(data.utterances[i].features));
  }
  CHECK(config_to_json(back.config) == config_to_json(c));
}

TEST_CASE("empty corpus is a valid manifest") {
  TempDir tmp("streamflow_corpus_empty");
  CorpusConfig c;
  c.num_utterances = 0;
  write_corpus(tmp.path, {c, {}});
  CHECK(read_corpus(tmp.path).utterances.empty());
}

TEST_CASE("corrupt corpus files are format errors naming the file") {
  TempDir tmp("streamflow_corpus_bad");
  CorpusConfig c;
  c.num_utterances = 2;
  write_corpus(tmp.path, {c, synth_corpus(c)});
  const auto victim = tmp.path / "utt00001.features.sftn";
  std::filesystem::resize_file(victim, std::filesystem::file_size(victim) - 3);
  try {
    read_corpus(tmp.path);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
    CHECK(std::string(e.what()).find("utt00001.features.sftn") != std::string::npos);
  }

  {
    std::ofstream m(tmp.path / "manifest.json");
    m << R"({"format": "streamflow-corpus", "config": {}})";
  }
  try {
    read_corpus(tmp.path);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
    CHECK(std::string(e.what()).find("utterances") != std::string::npos);
  }
}
