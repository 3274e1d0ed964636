#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "streamflow/backbone.hpp"
#include "streamflow/checkpoint.hpp"
#include "streamflow/error.hpp"
#include "streamflow/kernels.hpp"
#include "support/reference_model.hpp"

using namespace streamflow;
using namespace streamflow::backbone;
using numerics::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  numerics::SeededRng rng(seed, 17);
  Matrix m(r, c);
  for (auto& v : m.values()) v = static_cast<float>(scale * rng.next_gaussian());
  return m;
}

ConditionBundle random_condition(std::size_t frames, const ModelParams& p, const ModelConfig& c, std::uint64_t seed) {
  numerics::SeededRng rng(seed, 3);
  std::vector<std::uint32_t> ids(frames);
  for (auto& id : ids) id = static_cast<std::uint32_t>(rng.next_below(c.token_vocab));
  std::vector<float> spk(c.speaker_dim);
  for (auto& s : spk) s = static_cast<float>(rng.next_gaussian());
  return assemble_condition(ids, spk, p, c);
}

std::size_t closed_form_count(const ModelConfig& c) {
  const std::size_t H = c.hidden_dim, M = c.mlp_ratio * H, F = c.feature_dim;
  const std::size_t per_layer = 4 * (H * H + H) + (H * M + M) + (M * H + H) + (H * 6 * H + 6 * H);
  return c.token_vocab * c.token_embed_dim + (F + c.cond_dim()) * H + H + 2 * (H * H + H) + c.layers * per_layer +
         (H * 2 * H + 2 * H) + (H * F + F);
}

}  // namespace

TEST_CASE("upsample tokens") {
  CHECK(upsample_tokens(std::vector<std::uint32_t>{7}, 4) == std::vector<std::uint32_t>{7, 7, 7, 7});
  CHECK(upsample_tokens(std::vector<std::uint32_t>{}, 3).empty());
  CHECK(upsample_tokens(std::vector<std::uint32_t>{1, 2}, 2) == std::vector<std::uint32_t>{1, 1, 2, 2});
}

TEST_CASE("assemble condition") {
  const auto c = ModelConfig::tiny();
  const auto p = init_params(c, 1);
  const std::vector<std::uint32_t> ids{3, 3, 9, 0};
  const auto zero = assemble_condition(ids, std::vector<float>(c.speaker_dim, 0.0f), p, c);
  CHECK(zero.frames() == 4);
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t j = c.token_embed_dim; j < c.cond_dim(); ++j) CHECK(zero.cond(f, j) == 0.0f);
  CHECK(zero.cond.slice_rows(0, 1).bitwise_equal(zero.cond.slice_rows(1, 2)));
  for (std::size_t j = 0; j < c.token_embed_dim; ++j) CHECK(zero.cond(2, j) == p.token_embedding(9, j));

  const auto null = null_condition(4, c);
  CHECK(null.cond.rows() == 4);
  CHECK(null.cond.cols() == c.cond_dim());
  for (float v : null.cond.values()) CHECK(v == 0.0f);

  auto expect_input = [&](auto&& fn) {
    try {
      fn();
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Input);
    }
  };
  expect_input([&] { assemble_condition(std::vector<std::uint32_t>{32}, std::vector<float>(4), p, c); });
  expect_input([&] { assemble_condition(ids, std::vector<float>(3), p, c); });
}

TEST_CASE("timestep embedding") {
  const auto c = ModelConfig::tiny();
  const auto p = init_random_params(c, 2);
  const Matrix e0 = timestep_embedding(0.0f, p, c), e1 = timestep_embedding(1.0f, p, c);
  CHECK(!e0.bitwise_equal(e1));
  CHECK(timestep_embedding(0.37f, p, c).bitwise_equal(timestep_embedding(0.37f, p, c)));
  numerics::SeededRng rng(4, 0);
  for (int i = 0; i < 1000; ++i) CHECK(timestep_embedding(static_cast<float>(rng.next_uniform()), p, c).all_finite());
  CHECK_THROWS_AS(timestep_embedding(1.5f, p, c), Error);
}

TEST_CASE("positional encoding is offset consistent") {
  const Matrix whole = positional_encoding(40, 16, 0);
  CHECK(positional_encoding(10, 16, 25).bitwise_equal(whole.slice_rows(25, 35)));
  CHECK(whole(0, 0) == 0.0f);
  CHECK(whole(0, 1) == 1.0f);
}

TEST_CASE("fresh DiT blocks are the identity") {
  const auto c = ModelConfig::tiny();
  const auto p = init_params(c, 5);
  const Matrix temb = timestep_embedding(0.3f, p, c);
  for (auto kind : {masks::MaskKind::Block, masks::MaskKind::Backward, masks::MaskKind::Full}) {
    const Matrix x = random_matrix(24, c.hidden_dim, 6, 3.0);
    const auto mask = masks::build_mask(kind, 24, c.block_size());
    for (const auto& layer : p.layers) CHECK(dit_block_forward(x, temb, mask, layer, c).bitwise_equal(x));
  }
}

TEST_CASE("Block-masked layer keeps blocks apart") {
  const auto c = ModelConfig::tiny();
  const auto p = init_random_params(c, 7);
  const Matrix temb = timestep_embedding(0.6f, p, c);
  const auto mask = masks::build_mask(masks::MaskKind::Block, 32, 8);
  const Matrix x = random_matrix(32, c.hidden_dim, 8);
  Matrix x2 = x;
  for (std::size_t f = 8; f < 16; ++f)
    for (float& v : x2.row(f)) v += 1.0f;
  const Matrix y = dit_block_forward(x, temb, mask, p.layers[0], c);
  const Matrix y2 = dit_block_forward(x2, temb, mask, p.layers[0], c);
  CHECK(y.slice_rows(0, 8).bitwise_equal(y2.slice_rows(0, 8)));
  CHECK(!y.slice_rows(8, 16).bitwise_equal(y2.slice_rows(8, 16)));
  CHECK(y.slice_rows(16, 32).bitwise_equal(y2.slice_rows(16, 32)));
}

TEST_CASE("single block: full and Block masks agree") {
  const auto c = ModelConfig::tiny();
  const auto p = init_random_params(c, 9);
  const Matrix temb = timestep_embedding(0.2f, p, c);
  const Matrix x = random_matrix(8, c.hidden_dim, 10);
  CHECK(dit_block_forward(x, temb, masks::build_mask(masks::MaskKind::Full, 8, 8), p.layers[1], c)
            .bitwise_equal(dit_block_forward(x, temb, masks::build_mask(masks::MaskKind::Block, 8, 8), p.layers[1], c)));
}

TEST_CASE("zero-init vector field is layer norm of the input projection") {
  const auto c = ModelConfig::tiny();
  const auto p = init_params(c, 11);
  const Matrix x = random_matrix(16, c.feature_dim, 12);
  const auto cond = random_condition(16, p, c, 13);
  const Matrix v = vector_field(x, 0.4f, cond, p, c);
  const Matrix pe = positional_encoding(16, c.hidden_dim, 0);
  for (std::size_t f = 0; f < 16; ++f) {
    std::vector<double> h(c.hidden_dim);
    for (std::size_t j = 0; j < c.hidden_dim; ++j) {
      double s = p.in_b(0, j) + pe(f, j);
      for (std::size_t k = 0; k < c.feature_dim; ++k) s += x(f, k) * p.in_w(k, j);
      for (std::size_t k = 0; k < c.cond_dim(); ++k) s += cond.cond(f, k) * p.in_w(c.feature_dim + k, j);
      h[j] = s;
    }
    double mean = 0, var = 0;
    for (double e : h) mean += e;
    mean /= h.size();
    for (double e : h) var += (e - mean) * (e - mean);
    var /= h.size();
    for (std::size_t o = 0; o < c.feature_dim; ++o) {
      double s = p.out_b(0, o);
      for (std::size_t j = 0; j < c.hidden_dim; ++j) s += (h[j] - mean) / std::sqrt(var + 1e-6) * p.out_w(j, o);
      CHECK(std::abs(v(f, o) - s) < 1e-4);
    }
  }
}

TEST_CASE("vector field matches the float64 reference network") {
  const auto c = ModelConfig::tiny();
  const auto p = init_random_params(c, 14);
  const Matrix x = random_matrix(24, c.feature_dim, 15);
  const auto cond = random_condition(24, p, c, 16);
  const Matrix v = vector_field(x, 0.7f, cond, p, c, 40);
  const auto ref = testing::reference_vector_field(testing::DMat(x), 0.7f, testing::DMat(cond.cond),
                                                   testing::to_double(p), c, 40);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < ref.d.size(); ++i) {
    worst = std::max(worst, std::abs(v.data()[i] - ref.d[i]));
    scale = std::max(scale, std::abs(ref.d[i]));
  }
  CHECK(worst <= 1e-4 * std::max(1.0, scale));
}

TEST_CASE("vector field is deterministic and thread-count invariant") {
  const auto c = ModelConfig::tiny();
  const auto p = init_random_params(c, 17);
  const Matrix x = random_matrix(40, c.feature_dim, 18);
  const auto cond = random_condition(40, p, c, 19);
  numerics::set_num_threads(1);
  const Matrix a = vector_field(x, 0.5f, cond, p, c);
  CHECK(vector_field(x, 0.5f, cond, p, c).bitwise_equal(a));
  numerics::set_num_threads(3);
  CHECK(vector_field(x, 0.5f, cond, p, c).bitwise_equal(a));
  numerics::set_num_threads(1);
}

TEST_CASE("tape forward equals inference forward") {
  const auto c = ModelConfig::tiny();
  const auto p = init_random_params(c, 20);
  const Matrix x = random_matrix(16, c.feature_dim, 21);
  const auto cond = random_condition(16, p, c, 22);
  const auto tape = forward_with_tape(x, 0.25f, cond, p, c);
  CHECK(tape.output.bitwise_equal(vector_field(x, 0.25f, cond, p, c)));
}

TEST_CASE("vector field shape at full-size feature width") {
  auto c = ModelConfig::full_size();
  c.hidden_dim = 64;
  c.heads = 4;
  c.token_vocab = 64;
  c.token_embed_dim = 32;
  c.speaker_dim = 16;
  const auto p = init_random_params(c, 23);
  const Matrix x = random_matrix(48, 80, 24);
  const Matrix v = vector_field(x, 0.5f, random_condition(48, p, c, 25), p, c);
  CHECK(v.rows() == 48);
  CHECK(v.cols() == 80);
  CHECK(v.all_finite());
}

TEST_CASE("init params") {
  const auto c = ModelConfig::tiny();
  const auto a = init_params(c, 3), b = init_params(c, 3), d = init_params(c, 4);
  CHECK(a.bitwise_equal(b));
  CHECK(!a.bitwise_equal(d));
  for (const auto& l : a.layers) {
    for (float v : l.ada_w.values()) CHECK(v == 0.0f);
    for (float v : l.ada_b.values()) CHECK(v == 0.0f);
  }
  for (float v : a.final_ada_w.values()) CHECK(v == 0.0f);
  CHECK(a.parameter_count() == closed_form_count(c));
  CHECK(ModelConfig::full_size().layers == 22);
  CHECK(init_params(c.with_schedule(masks::preset_schedule(masks::Preset::LR, 6, 8)), 1).parameter_count() ==
        closed_form_count(c.with_schedule(masks::preset_schedule(masks::Preset::LR, 6, 8))));
}

TEST_CASE("config validation and JSON") {
  auto c = ModelConfig::tiny();
  CHECK(config_from_json(config_to_json(c)).schedule == c.schedule);
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));
  c.heads = 3;
  try {
    c.validate();
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "streamflow_ckpt_test";
  std::filesystem::remove_all(dir);
  const auto c = ModelConfig::tiny();
  const auto p = init_random_params(c, 26);
  save_checkpoint(dir, c, p);
  const auto ck = load_checkpoint(dir);
  CHECK(ck.params.bitwise_equal(p));
  CHECK(config_to_json(ck.config) == config_to_json(c));
  std::filesystem::remove(dir / "output.weight.sftn");
  CHECK_THROWS_AS(load_checkpoint(dir), Error);
  std::filesystem::remove_all(dir);
}
