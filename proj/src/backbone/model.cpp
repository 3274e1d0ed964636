#include <cmath>
#include <map>
#include <numbers>

#include "streamflow/backbone.hpp"
#include "streamflow/error.hpp"

namespace streamflow::backbone {

using numerics::layer_norm_backward;
using numerics::layer_norm_with_stats;
using numerics::matmul;
using numerics::matmul_a_bt;
using numerics::matmul_at_b;

namespace {

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  numerics::add_row_broadcast(y, b);
  return y;
}

/// Accumulates weight/bias gradients and returns the input gradient.
Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw, Matrix& db) {
  numerics::add_inplace(dw, matmul_at_b(x, dy));
  numerics::add_inplace(db, numerics::column_sums(dy));
  return matmul_a_bt(dy, w);
}

/// Column segment [seg·H, (seg+1)·H) of a 1×kH modulation vector.
std::span<const float> segment(const Matrix& mod, std::size_t seg, std::size_t H) {
  return mod.row(0).subspan(seg * H, H);
}

Matrix modulate(const Matrix& xhat, std::span<const float> shift, std::span<const float> scl) {
  Matrix out(xhat.rows(), xhat.cols());
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    auto in = xhat.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < xhat.cols(); ++c) o[c] = in[c] * (1.0f + scl[c]) + shift[c];
  }
  return out;
}

/// Backward of modulate: returns d(xhat); accumulates d(shift), d(scale) into
/// the given segments of dmod.
Matrix modulate_backward(const Matrix& dy, const Matrix& xhat, std::span<const float> scl, std::span<float> dshift,
                         std::span<float> dscale) {
  Matrix dx(dy.rows(), dy.cols());
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto g = dy.row(r);
    auto h = xhat.row(r);
    auto o = dx.row(r);
    for (std::size_t c = 0; c < dy.cols(); ++c) {
      o[c] = g[c] * (1.0f + scl[c]);
      dscale[c] += g[c] * h[c];
      dshift[c] += g[c];
    }
  }
  return dx;
}

/// x + gate ⊙ y with the gate broadcast over rows.
Matrix gated_residual(const Matrix& x, std::span<const float> gate, const Matrix& y) {
  Matrix out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto o = out.row(r);
    auto in = y.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) o[c] += gate[c] * in[c];
  }
  return out;
}

Matrix time_features(float t, std::size_t dim) {
  Matrix f(1, dim);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    const double arg = 1000.0 * static_cast<double>(t) * freq;
    f(0, i) = static_cast<float>(std::cos(arg));
    f(0, half + i) = static_cast<float>(std::sin(arg));
  }
  return f;
}

Matrix dropout_keep(std::size_t rows, std::size_t cols, Dropout& d) {
  Matrix keep(rows, cols);
  const float s = 1.0f / (1.0f - d.rate);
  for (float& v : keep.values()) v = d.rng.next_uniform() < d.rate ? 0.0f : s;
  return keep;
}

void multiply_inplace(Matrix& x, const Matrix& keep) {
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] *= keep.data()[i];
}

Matrix layer_forward(const Matrix& x, const Matrix& c, const BoolMatrix& mask, const LayerParams& L,
                     const ModelConfig& cfg, LayerTape* tape, Dropout* dropout) {
  const std::size_t H = cfg.hidden_dim, n = x.rows(), dh = cfg.head_dim();
  if (x.cols() != H) throw Error(ErrorKind::Config, "dit block: input width " + std::to_string(x.cols()) + " != hidden " + std::to_string(H));
  if (mask.rows() != n || mask.cols() != n) throw Error(ErrorKind::Config, "dit block: mask shape does not match frames");
  const bool drop = dropout != nullptr && dropout->rate > 0.0f;

  Matrix mod = linear(c, L.ada_w, L.ada_b);
  auto ln1 = layer_norm_with_stats(x, numerics::kLayerNormEps);
  Matrix a = modulate(ln1.normalized, segment(mod, 0, H), segment(mod, 1, H));
  Matrix q = linear(a, L.wq, L.bq);
  Matrix k = linear(a, L.wk, L.bk);
  Matrix v = linear(a, L.wv, L.bv);

  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  Matrix o(n, H);
  std::vector<Matrix> probs, keeps;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Matrix qh = q.slice_cols(h * dh, (h + 1) * dh);
    Matrix kh = k.slice_cols(h * dh, (h + 1) * dh);
    Matrix vh = v.slice_cols(h * dh, (h + 1) * dh);
    Matrix s = matmul_a_bt(qh, kh);
    for (float& e : s.values()) e *= inv_sqrt;
    Matrix p = numerics::masked_softmax_rows(s, mask);
    Matrix pd = p;
    if (drop) {
      Matrix keep = dropout_keep(n, n, *dropout);
      multiply_inplace(pd, keep);
      if (tape) keeps.push_back(std::move(keep));
    }
    Matrix oh = matmul(pd, vh);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < dh; ++j) o(r, h * dh + j) = oh(r, j);
    if (tape) probs.push_back(std::move(p));
  }
  Matrix attn = linear(o, L.wo, L.bo);
  Matrix x1 = gated_residual(x, segment(mod, 2, H), attn);

  auto ln2 = layer_norm_with_stats(x1, numerics::kLayerNormEps);
  Matrix b = modulate(ln2.normalized, segment(mod, 3, H), segment(mod, 4, H));
  Matrix hpre = linear(b, L.w1, L.b1);
  Matrix g = numerics::gelu(hpre);
  Matrix keep;
  if (drop) {
    keep = dropout_keep(g.rows(), g.cols(), *dropout);
    multiply_inplace(g, keep);
  }
  Matrix m = linear(g, L.w2, L.b2);
  Matrix x2 = gated_residual(x1, segment(mod, 5, H), m);

  if (tape) {
    *tape = LayerTape{x,     std::move(ln1), std::move(mod),  std::move(a), std::move(q),  std::move(k),
                      std::move(v), std::move(probs), std::move(keeps), std::move(o), std::move(attn), std::move(x1),
                      std::move(ln2), std::move(b), std::move(hpre), std::move(keep), std::move(g), std::move(m)};
  }
  return x2;
}

/// Runs the full network; `tape` may be null for inference.
Matrix run_network(const Matrix& x_t, float t, const ConditionBundle& cond, const ModelParams& params,
                   const ModelConfig& cfg, std::size_t frame_offset, ForwardTape* tape, Dropout* dropout) {
  cfg.validate();
  if (x_t.cols() != cfg.feature_dim) {
    throw Error(ErrorKind::Input, "vector_field: x_t has " + std::to_string(x_t.cols()) + " channels, expected " +
                                      std::to_string(cfg.feature_dim));
  }
  if (cond.frames() != x_t.rows()) {
    throw Error(ErrorKind::Input, "vector_field: condition has " + std::to_string(cond.frames()) + " frames, x_t has " +
                                      std::to_string(x_t.rows()));
  }
  if (cond.cond.cols() != cfg.cond_dim()) throw Error(ErrorKind::Input, "vector_field: condition width mismatch");
  if (x_t.rows() == 0) throw Error(ErrorKind::Input, "vector_field: empty sequence");
  const std::size_t n = x_t.rows(), H = cfg.hidden_dim;

  Matrix input = numerics::concat_cols(x_t, cond.cond);
  Matrix h = linear(input, params.in_w, params.in_b);
  if (cfg.positional) numerics::add_inplace(h, positional_encoding(n, H, frame_offset));

  if (!(t >= 0.0f && t <= 1.0f)) throw Error(ErrorKind::Input, "timestep must lie in [0, 1], got " + std::to_string(t));
  Matrix tf = time_features(t, H);
  Matrix th1pre = linear(tf, params.t_w1, params.t_b1);
  Matrix th1 = numerics::silu(th1pre);
  Matrix temb = linear(th1, params.t_w2, params.t_b2);
  Matrix c = numerics::silu(temb);

  std::map<masks::MaskKind, BoolMatrix> mask_cache;
  if (tape) tape->layers.resize(cfg.layers);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    const auto kind = cfg.schedule.layer_masks[i];
    auto it = mask_cache.find(kind);
    if (it == mask_cache.end()) it = mask_cache.emplace(kind, masks::build_mask(kind, n, cfg.block_size())).first;
    h = layer_forward(h, c, it->second, params.layers[i], cfg, tape ? &tape->layers[i] : nullptr, dropout);
    if (!h.all_finite()) throw Error(ErrorKind::Numerical, "non-finite activation after layer " + std::to_string(i));
  }

  auto lnf = layer_norm_with_stats(h, numerics::kLayerNormEps);
  Matrix fmod = linear(c, params.final_ada_w, params.final_ada_b);
  Matrix y = modulate(lnf.normalized, segment(fmod, 0, H), segment(fmod, 1, H));
  Matrix out = linear(y, params.out_w, params.out_b);
  if (!out.all_finite()) throw Error(ErrorKind::Numerical, "non-finite activation in output projection");

  if (tape) {
    tape->input = std::move(input);
    tape->time_features = std::move(tf);
    tape->t_h1pre = std::move(th1pre);
    tape->t_h1 = std::move(th1);
    tape->temb = std::move(temb);
    tape->c = std::move(c);
    tape->lnf = std::move(lnf);
    tape->fmod = std::move(fmod);
    tape->y = std::move(y);
    tape->output = out;
  }
  return out;
}

}  // namespace

std::vector<std::uint32_t> upsample_tokens(std::span<const std::uint32_t> tokens, std::size_t factor) {
  if (factor == 0) throw Error(ErrorKind::Config, "upsample factor must be >= 1");
  std::vector<std::uint32_t> out;
  out.reserve(tokens.size() * factor);
  for (auto id : tokens) out.insert(out.end(), factor, id);
  return out;
}

ConditionBundle assemble_condition(std::span<const std::uint32_t> frame_ids, std::span<const float> speaker,
                                   const ModelParams& params, const ModelConfig& config) {
  if (speaker.size() != config.speaker_dim) {
    throw Error(ErrorKind::Input, "speaker embedding has " + std::to_string(speaker.size()) + " entries, expected " +
                                      std::to_string(config.speaker_dim));
  }
  const std::size_t E = config.token_embed_dim;
  ConditionBundle b{Matrix(frame_ids.size(), config.cond_dim())};
  for (std::size_t f = 0; f < frame_ids.size(); ++f) {
    const auto id = frame_ids[f];
    if (id >= config.token_vocab) {
      throw Error(ErrorKind::Input, "token id " + std::to_string(id) + " at frame " + std::to_string(f) +
                                        " is outside vocab " + std::to_string(config.token_vocab));
    }
    auto dst = b.cond.row(f);
    auto emb = params.token_embedding.row(id);
    std::copy(emb.begin(), emb.end(), dst.begin());
    std::copy(speaker.begin(), speaker.end(), dst.begin() + static_cast<std::ptrdiff_t>(E));
  }
  return b;
}

ConditionBundle null_condition(std::size_t frames, const ModelConfig& config) {
  return ConditionBundle{Matrix(frames, config.cond_dim())};
}

Matrix timestep_embedding(float t, const ModelParams& params, const ModelConfig& config) {
  if (!(t >= 0.0f && t <= 1.0f)) throw Error(ErrorKind::Input, "timestep must lie in [0, 1], got " + std::to_string(t));
  Matrix h = numerics::silu(linear(time_features(t, config.hidden_dim), params.t_w1, params.t_b1));
  return linear(h, params.t_w2, params.t_b2);
}

Matrix positional_encoding(std::size_t frames, std::size_t dim, std::size_t offset) {
  Matrix pe(frames, dim);
  for (std::size_t f = 0; f < frames; ++f) {
    const double pos = static_cast<double>(offset + f);
    for (std::size_t c = 0; c < dim; ++c) {
      const double freq = std::pow(10000.0, -static_cast<double>(c / 2 * 2) / static_cast<double>(dim));
      pe(f, c) = static_cast<float>(c % 2 == 0 ? std::sin(pos * freq) : std::cos(pos * freq));
    }
  }
  return pe;
}

Matrix dit_block_forward(const Matrix& x, const Matrix& time_embedding, const BoolMatrix& mask,
                         const LayerParams& layer, const ModelConfig& config) {
  if (time_embedding.rows() != 1 || time_embedding.cols() != config.hidden_dim) {
    throw Error(ErrorKind::Config, "dit block: time embedding must be 1x" + std::to_string(config.hidden_dim));
  }
  return layer_forward(x, numerics::silu(time_embedding), mask, layer, config, nullptr, nullptr);
}

Matrix vector_field(const Matrix& x_t, float t, const ConditionBundle& cond, const ModelParams& params,
                    const ModelConfig& config, std::size_t frame_offset) {
  return run_network(x_t, t, cond, params, config, frame_offset, nullptr, nullptr);
}

ForwardTape forward_with_tape(const Matrix& x_t, float t, const ConditionBundle& cond, const ModelParams& params,
                              const ModelConfig& config, std::size_t frame_offset, Dropout* dropout) {
  ForwardTape tape;
  run_network(x_t, t, cond, params, config, frame_offset, &tape, dropout);
  return tape;
}

void backward(const ModelParams& params, const ModelConfig& cfg, const ForwardTape& tape, const Matrix& grad_output,
              ModelParams& grads, Matrix* grad_input) {
  const std::size_t H = cfg.hidden_dim, dh = cfg.head_dim();
  if (grad_output.rows() != tape.output.rows() || grad_output.cols() != tape.output.cols()) {
    throw Error(ErrorKind::Config, "backward: gradient shape does not match output");
  }
  Matrix dc(1, H);

  // Output head.
  Matrix dy = linear_backward(tape.y, params.out_w, grad_output, grads.out_w, grads.out_b);
  Matrix dfmod(1, 2 * H);
  Matrix dxhat = modulate_backward(dy, tape.lnf.normalized, segment(tape.fmod, 1, H), dfmod.row(0).subspan(0, H),
                                   dfmod.row(0).subspan(H, H));
  Matrix dh_ = layer_norm_backward(dxhat, tape.lnf);
  numerics::add_inplace(dc, linear_backward(tape.c, params.final_ada_w, dfmod, grads.final_ada_w, grads.final_ada_b));

  for (std::size_t li = cfg.layers; li-- > 0;) {
    const LayerTape& T = tape.layers[li];
    const LayerParams& L = params.layers[li];
    LayerParams& G = grads.layers[li];
    Matrix dmod(1, 6 * H);
    auto dseg = [&](std::size_t s) { return dmod.row(0).subspan(s * H, H); };
    const auto gate_a = segment(T.mod, 2, H);
    const auto gate_m = segment(T.mod, 5, H);
    const std::size_t n = T.x_in.rows();

    // MLP branch: x2 = x1 + gate_m ⊙ m.
    Matrix dx1 = dh_;
    Matrix dm(n, H);
    {
      auto dgm = dseg(5);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < H; ++c) {
          dgm[c] += dh_(r, c) * T.m(r, c);
          dm(r, c) = dh_(r, c) * gate_m[c];
        }
    }
    Matrix dg = linear_backward(T.g, L.w2, dm, G.w2, G.b2);
    if (!T.mlp_keep.empty()) multiply_inplace(dg, T.mlp_keep);
    for (std::size_t i = 0; i < dg.size(); ++i) dg.data()[i] *= numerics::gelu_derivative(T.hpre.data()[i]);
    Matrix db = linear_backward(T.b, L.w1, dg, G.w1, G.b1);
    Matrix dxhat2 = modulate_backward(db, T.ln2.normalized, segment(T.mod, 4, H), dseg(3), dseg(4));
    numerics::add_inplace(dx1, layer_norm_backward(dxhat2, T.ln2));

    // Attention branch: x1 = x + gate_a ⊙ attn.
    Matrix dx = dx1;
    Matrix dattn(n, H);
    {
      auto dga = dseg(2);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < H; ++c) {
          dga[c] += dx1(r, c) * T.attn(r, c);
          dattn(r, c) = dx1(r, c) * gate_a[c];
        }
    }
    Matrix dO = linear_backward(T.o, L.wo, dattn, G.wo, G.bo);
    Matrix dq(n, H), dk(n, H), dv(n, H);
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      Matrix qh = T.q.slice_cols(h * dh, (h + 1) * dh);
      Matrix kh = T.k.slice_cols(h * dh, (h + 1) * dh);
      Matrix vh = T.v.slice_cols(h * dh, (h + 1) * dh);
      Matrix doh = dO.slice_cols(h * dh, (h + 1) * dh);
      const Matrix& p = T.probs[h];
      Matrix pd = p;
      if (!T.attn_keep.empty()) multiply_inplace(pd, T.attn_keep[h]);
      Matrix dvh = matmul_at_b(pd, doh);
      Matrix dp = matmul_a_bt(doh, vh);
      if (!T.attn_keep.empty()) multiply_inplace(dp, T.attn_keep[h]);
      // Softmax backward; masked entries have p = 0 and receive no gradient.
      Matrix ds(n, n);
      for (std::size_t r = 0; r < n; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < n; ++c) dot += static_cast<double>(dp(r, c)) * p(r, c);
        for (std::size_t c = 0; c < n; ++c)
          ds(r, c) = static_cast<float>(p(r, c) * (dp(r, c) - dot)) * inv_sqrt;
      }
      Matrix dqh = matmul(ds, kh);
      Matrix dkh = matmul_at_b(ds, qh);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < dh; ++j) {
          dq(r, h * dh + j) = dqh(r, j);
          dk(r, h * dh + j) = dkh(r, j);
          dv(r, h * dh + j) = dvh(r, j);
        }
    }
    Matrix da = linear_backward(T.a, L.wq, dq, G.wq, G.bq);
    numerics::add_inplace(da, linear_backward(T.a, L.wk, dk, G.wk, G.bk));
    numerics::add_inplace(da, linear_backward(T.a, L.wv, dv, G.wv, G.bv));
    Matrix dxhat1 = modulate_backward(da, T.ln1.normalized, segment(T.mod, 1, H), dseg(0), dseg(1));
    numerics::add_inplace(dx, layer_norm_backward(dxhat1, T.ln1));

    numerics::add_inplace(dc, linear_backward(tape.c, L.ada_w, dmod, G.ada_w, G.ada_b));
    dh_ = std::move(dx);
  }

  // Input projection (positional encoding is a constant).
  Matrix dinput = linear_backward(tape.input, params.in_w, dh_, grads.in_w, grads.in_b);
  if (grad_input) *grad_input = std::move(dinput);

  // Timestep MLP: c = silu(temb), temb = fc2(silu(fc1(features))).
  Matrix dtemb(1, H);
  for (std::size_t i = 0; i < H; ++i) dtemb(0, i) = dc(0, i) * numerics::silu_derivative(tape.temb(0, i));
  Matrix dth1 = linear_backward(tape.t_h1, params.t_w2, dtemb, grads.t_w2, grads.t_b2);
  for (std::size_t i = 0; i < H; ++i) dth1(0, i) *= numerics::silu_derivative(tape.t_h1pre(0, i));
  linear_backward(tape.time_features, params.t_w1, dth1, grads.t_w1, grads.t_b1);
}

}  // namespace streamflow::backbone
