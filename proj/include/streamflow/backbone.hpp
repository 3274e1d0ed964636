#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamflow/kernels.hpp"
#include "streamflow/masks.hpp"
#include "streamflow/matrix.hpp"
#include "streamflow/rng.hpp"

namespace streamflow::backbone {

using numerics::BoolMatrix;
using numerics::Matrix;

struct ModelConfig {
  std::size_t layers = 4;
  std::size_t hidden_dim = 64;
  std::size_t heads = 4;
  std::size_t feature_dim = 8;
  std::size_t token_vocab = 32;
  std::size_t token_embed_dim = 16;
  std::size_t speaker_dim = 4;
  std::size_t upsample_factor = 4;
  std::size_t mlp_ratio = 4;
  float dropout = 0.0f;
  bool positional = true;
  masks::MaskSchedule schedule;

  std::size_t cond_dim() const noexcept { return token_embed_dim + speaker_dim; }
  std::size_t head_dim() const noexcept { return hidden_dim / heads; }
  std::size_t block_size() const noexcept { return schedule.block_size_frames; }
  void validate() const;

  /// Copy with `schedule` installed and `layers` set to its length.
  ModelConfig with_schedule(masks::MaskSchedule s) const;

  /// Desk-scale model: 4 layers, hidden 64, 4 heads, 8 feature channels,
  /// vocab 32, 8-frame blocks, ×4 token upsampling, SR-style schedule.
  static ModelConfig tiny();
  /// Full-size shapes: 22 layers, hidden 1024, 16 heads, 80 mel channels,
  /// 24-frame blocks, SR schedule, dropout 0.1.
  static ModelConfig full_size();
};

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

struct LayerParams {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;  // attention
  Matrix w1, b1, w2, b2;                  // MLP
  Matrix ada_w, ada_b;                    // adaLN modulation: shift/scale/gate × attn/mlp
};

struct ModelParams {
  Matrix token_embedding;
  Matrix in_w, in_b;
  Matrix t_w1, t_b1, t_w2, t_b2;
  std::vector<LayerParams> layers;
  Matrix final_ada_w, final_ada_b;  // shift/scale for the output norm
  Matrix out_w, out_b;

  /// Visits every tensor with its checkpoint name, in a fixed order.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;
  std::size_t parameter_count() const;
  /// Same shapes, all zeros.
  ModelParams zeros_like() const;
  bool bitwise_equal(const ModelParams& other) const;
};

/// adaLN-zero initialization: every modulation projector is exactly zero,
/// other weights are N(0, 1/fan_in), biases zero. Reproducible from `seed`.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
/// Like init_params but with random modulation projectors, so the blocks are
/// not identities. Used for receptive-field probes and gradient checks.
ModelParams init_random_params(const ModelConfig& config, std::uint64_t seed);

// -- conditioning ----------------------------------------------------------

struct ConditionBundle {
  Matrix cond;  // frames × (token_embed_dim + speaker_dim)
  std::size_t frames() const noexcept { return cond.rows(); }
};

std::vector<std::uint32_t> upsample_tokens(std::span<const std::uint32_t> tokens, std::size_t factor);
ConditionBundle assemble_condition(std::span<const std::uint32_t> frame_ids, std::span<const float> speaker,
                                   const ModelParams& params, const ModelConfig& config);
/// All-zeros condition used for the unconditional branch and dropped samples.
ConditionBundle null_condition(std::size_t frames, const ModelConfig& config);

// -- network ---------------------------------------------------------------

/// Sinusoidal features of t through a 2-layer SiLU MLP; 1×hidden_dim.
Matrix timestep_embedding(float t, const ModelParams& params, const ModelConfig& config);
/// Per-frame sinusoidal position features for global frames [offset, offset+n).
Matrix positional_encoding(std::size_t frames, std::size_t dim, std::size_t offset);

Matrix dit_block_forward(const Matrix& x, const Matrix& time_embedding, const BoolMatrix& mask,
                         const LayerParams& layer, const ModelConfig& config);

/// v_t(x_t, cond). `frame_offset` is the global index of the first frame so a
/// window reproduces the positions it has inside the full sequence.
Matrix vector_field(const Matrix& x_t, float t, const ConditionBundle& cond, const ModelParams& params,
                    const ModelConfig& config, std::size_t frame_offset = 0);

// -- training support ------------------------------------------------------

struct LayerTape {
  Matrix x_in;
  numerics::LayerNormResult ln1;
  Matrix mod;  // 1×6H
  Matrix a, q, k, v;
  std::vector<Matrix> probs;      // per head, before dropout
  std::vector<Matrix> attn_keep;  // per head dropout scale (empty when off)
  Matrix o, attn, x1;
  numerics::LayerNormResult ln2;
  Matrix b, hpre, mlp_keep, g, m;
};

struct ForwardTape {
  Matrix input;  // concat(x_t, cond)
  Matrix time_features, t_h1pre, t_h1, temb, c;
  std::vector<LayerTape> layers;
  numerics::LayerNormResult lnf;
  Matrix fmod, y;
  Matrix output;
};

/// Training-time dropout source; nullptr or rate 0 disables dropout.
struct Dropout {
  float rate = 0.0f;
  numerics::SeededRng rng;
};

ForwardTape forward_with_tape(const Matrix& x_t, float t, const ConditionBundle& cond, const ModelParams& params,
                              const ModelConfig& config, std::size_t frame_offset = 0, Dropout* dropout = nullptr);

/// Accumulates dLoss/dθ into `grads` (shaped like params). The gradient with
/// respect to the concatenated network input is written to `grad_input` when
/// non-null. Token-embedding gradients are left to the caller, which knows the
/// frame ids.
void backward(const ModelParams& params, const ModelConfig& config, const ForwardTape& tape, const Matrix& grad_output,
              ModelParams& grads, Matrix* grad_input = nullptr);

}  // namespace streamflow::backbone
