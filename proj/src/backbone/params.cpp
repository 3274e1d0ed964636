#include <cmath>

#include "streamflow/backbone.hpp"
#include "streamflow/error.hpp"

namespace streamflow::backbone {

namespace {

template <typename Params, typename Fn>
void visit(Params& p, Fn&& fn) {
  fn("token_embedding", p.token_embedding);
  fn("input.weight", p.in_w);
  fn("input.bias", p.in_b);
  fn("time.fc1.weight", p.t_w1);
  fn("time.fc1.bias", p.t_b1);
  fn("time.fc2.weight", p.t_w2);
  fn("time.fc2.bias", p.t_b2);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    fn(pre + "attn.wq", l.wq);
    fn(pre + "attn.bq", l.bq);
    fn(pre + "attn.wk", l.wk);
    fn(pre + "attn.bk", l.bk);
    fn(pre + "attn.wv", l.wv);
    fn(pre + "attn.bv", l.bv);
    fn(pre + "attn.wo", l.wo);
    fn(pre + "attn.bo", l.bo);
    fn(pre + "mlp.fc1.weight", l.w1);
    fn(pre + "mlp.fc1.bias", l.b1);
    fn(pre + "mlp.fc2.weight", l.w2);
    fn(pre + "mlp.fc2.bias", l.b2);
    fn(pre + "adaln.weight", l.ada_w);
    fn(pre + "adaln.bias", l.ada_b);
  }
  fn("final.adaln.weight", p.final_ada_w);
  fn("final.adaln.bias", p.final_ada_b);
  fn("output.weight", p.out_w);
  fn("output.bias", p.out_b);
}

ModelParams allocate(const ModelConfig& c) {
  const std::size_t H = c.hidden_dim, M = c.mlp_ratio * c.hidden_dim;
  ModelParams p;
  p.token_embedding = Matrix(c.token_vocab, c.token_embed_dim);
  p.in_w = Matrix(c.feature_dim + c.cond_dim(), H);
  p.in_b = Matrix(1, H);
  p.t_w1 = Matrix(H, H);
  p.t_b1 = Matrix(1, H);
  p.t_w2 = Matrix(H, H);
  p.t_b2 = Matrix(1, H);
  p.layers.resize(c.layers);
  for (auto& l : p.layers) {
    for (Matrix* w : {&l.wq, &l.wk, &l.wv, &l.wo}) *w = Matrix(H, H);
    for (Matrix* b : {&l.bq, &l.bk, &l.bv, &l.bo}) *b = Matrix(1, H);
    l.w1 = Matrix(H, M);
    l.b1 = Matrix(1, M);
    l.w2 = Matrix(M, H);
    l.b2 = Matrix(1, H);
    l.ada_w = Matrix(H, 6 * H);
    l.ada_b = Matrix(1, 6 * H);
  }
  p.final_ada_w = Matrix(H, 2 * H);
  p.final_ada_b = Matrix(1, 2 * H);
  p.out_w = Matrix(H, c.feature_dim);
  p.out_b = Matrix(1, c.feature_dim);
  return p;
}

bool is_modulation(const std::string& name) { return name.find("adaln") != std::string::npos; }
bool is_bias(const std::string& name) {
  return name.ends_with(".bias") || name.ends_with(".bq") || name.ends_with(".bk") || name.ends_with(".bv") ||
         name.ends_with(".bo");
}

void fill_gaussian(Matrix& m, numerics::SeededRng rng, float stddev) {
  for (float& v : m.values()) v = static_cast<float>(rng.next_gaussian()) * stddev;
}

}  // namespace

void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) { visit(*this, fn); }

void ModelParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  visit(*this, fn);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each([](const std::string&, Matrix& m) { m.fill(0.0f); });
  return z;
}

bool ModelParams::bitwise_equal(const ModelParams& other) const {
  std::vector<const Matrix*> mine, theirs;
  for_each([&](const std::string&, const Matrix& m) { mine.push_back(&m); });
  other.for_each([&](const std::string&, const Matrix& m) { theirs.push_back(&m); });
  if (mine.size() != theirs.size()) return false;
  for (std::size_t i = 0; i < mine.size(); ++i)
    if (!mine[i]->bitwise_equal(*theirs[i])) return false;
  return true;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p = allocate(config);
  std::uint64_t stream = 0;
  p.for_each([&](const std::string& name, Matrix& m) {
    numerics::SeededRng rng(seed, stream++);
    if (is_modulation(name) || is_bias(name)) return;  // stays zero
    const float stddev = name == "token_embedding" ? 1.0f : 1.0f / std::sqrt(static_cast<float>(m.rows()));
    fill_gaussian(m, rng, stddev);
  });
  return p;
}

ModelParams init_random_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = init_params(config, seed);
  std::uint64_t stream = 1u << 20;
  p.for_each([&](const std::string& name, Matrix& m) {
    numerics::SeededRng rng(seed, stream++);
    if (is_modulation(name)) {
      fill_gaussian(m, rng, name.ends_with("bias") ? 0.5f : 1.0f / std::sqrt(static_cast<float>(m.rows())));
    } else if (is_bias(name)) {
      fill_gaussian(m, rng, 0.1f);
    }
  });
  return p;
}

}  // namespace streamflow::backbone
