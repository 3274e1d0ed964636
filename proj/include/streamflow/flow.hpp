#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "streamflow/backbone.hpp"
#include "streamflow/corpus.hpp"
#include "streamflow/rng.hpp"

namespace streamflow::flow {

using backbone::ConditionBundle;
using backbone::ModelConfig;
using backbone::ModelParams;
using numerics::Matrix;

// -- OT path ---------------------------------------------------------------

/// (1−t)·x0 + t·x1; the endpoints return x0 / x1 exactly.
Matrix ot_flow_point(const Matrix& x0, const Matrix& x1, float t);
/// Conditional target field x1 − x0.
Matrix ot_target(const Matrix& x0, const Matrix& x1);

struct TimestepSampler {
  enum class Kind { LogitNormal, Uniform };
  Kind kind = Kind::LogitNormal;
  double mu = 0.0;
  double sigma = 1.0;
};

/// Logit-normal: sigmoid(μ + σ·z). Always strictly inside (0, 1).
float sample_t(const TimestepSampler& sampler, numerics::SeededRng& rng);

// -- loss ------------------------------------------------------------------

struct FlowSample {
  Matrix x0;  // noise
  Matrix x1;  // data
  float t = 0.5f;
  std::vector<std::uint32_t> frame_ids;  // upsampled token ids, one per frame
  std::vector<float> speaker;
  bool cond_dropped = false;

  ConditionBundle condition(const ModelParams& params, const ModelConfig& config) const;
};

struct LossResult {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean squared error between v(φ_t, c) and x1 − x0, averaged over frames and
/// channels per sample, then over the batch; exact gradients for every
/// parameter. `dropout` may be null.
LossResult cfm_loss(std::span<const FlowSample> batch, const ModelParams& params, const ModelConfig& config,
                    backbone::Dropout* dropout = nullptr);
/// Loss only, no tape or gradients.
double cfm_loss_value(std::span<const FlowSample> batch, const ModelParams& params, const ModelConfig& config);

// -- sampling --------------------------------------------------------------

struct SamplerConfig {
  std::size_t steps = 10;
  float cfg_alpha = 0.5f;
  std::uint64_t seed = 0;

  void validate() const;
};

/// (1+α)·v(x, c) − α·v(x, ∅). α = 0 skips the unconditional branch.
Matrix cfg_vector_field(const Matrix& x, float t, const ConditionBundle& cond, float alpha, const ModelParams& params,
                        const ModelConfig& config, std::size_t frame_offset = 0);

/// Left-endpoint Euler on t_k = k/steps.
Matrix euler_sample(const Matrix& x0, const ConditionBundle& cond, const SamplerConfig& sampler,
                    const ModelParams& params, const ModelConfig& config, std::size_t frame_offset = 0);

// -- training --------------------------------------------------------------

struct TrainConfig {
  double cond_drop_rate = 0.3;
  TimestepSampler t_sampler;
  double learning_rate = 1e-3;
  std::size_t steps = 2000;
  std::size_t batch_frames = 192;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t log_every = 50;

  void validate() const;
};

struct LossPoint {
  std::size_t step;
  double loss;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossPoint> trace;  // every step
};

using TrainProgress = std::function<void(const LossPoint&)>;

/// Draws the step-`step` minibatch: utterances until `batch_frames` frames,
/// with noise, t and condition drops all keyed by (seed, step).
std::vector<FlowSample> make_batch(std::span<const corpus::Utterance> dataset, const ModelConfig& model,
                                   const TrainConfig& config, std::uint64_t seed, std::size_t step);

/// Adam on cfm_loss starting from init_params(model, seed). Deterministic given
/// the seed. Throws training-diverged if the loss stays above 10× the initial
/// loss for 100 consecutive steps. `progress` fires every log_every steps.
TrainResult train_loop(std::span<const corpus::Utterance> dataset, const ModelConfig& model, const TrainConfig& config,
                       std::uint64_t seed, const TrainProgress& progress = {});
/// Same as train_loop but continues from `initial`.
TrainResult train_from(ModelParams initial, std::span<const corpus::Utterance> dataset, const ModelConfig& model,
                       const TrainConfig& config, std::uint64_t seed, const TrainProgress& progress = {});

}  // namespace streamflow::flow
