#include "streamflow/flow.hpp"

#include <cmath>

#include "streamflow/error.hpp"

namespace streamflow::flow {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::Input, std::string(op) + ": shape mismatch");
}

}  // namespace

Matrix ot_flow_point(const Matrix& x0, const Matrix& x1, float t) {
  require_same_shape(x0, x1, "ot_flow_point");
  if (!(t >= 0.0f && t <= 1.0f)) throw Error(ErrorKind::Input, "ot_flow_point: t outside [0, 1]");
  if (t == 0.0f) return x0;
  if (t == 1.0f) return x1;
  Matrix out(x0.rows(), x0.cols());
  const float s = 1.0f - t;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = s * x0.data()[i] + t * x1.data()[i];
  return out;
}

Matrix ot_target(const Matrix& x0, const Matrix& x1) {
  require_same_shape(x0, x1, "ot_target");
  return numerics::sub(x1, x0);
}

float sample_t(const TimestepSampler& sampler, numerics::SeededRng& rng) {
  double t = 0.0;
  switch (sampler.kind) {
    case TimestepSampler::Kind::Uniform: t = rng.next_uniform(); break;
    case TimestepSampler::Kind::LogitNormal: {
      const double z = sampler.mu + sampler.sigma * rng.next_gaussian();
      t = 1.0 / (1.0 + std::exp(-z));
      break;
    }
  }
  float f = static_cast<float>(t);
  if (f <= 0.0f) f = std::nextafter(0.0f, 1.0f);
  if (f >= 1.0f) f = std::nextafter(1.0f, 0.0f);
  return f;
}

ConditionBundle FlowSample::condition(const ModelParams& params, const ModelConfig& config) const {
  if (cond_dropped) return backbone::null_condition(frame_ids.size(), config);
  return backbone::assemble_condition(frame_ids, speaker, params, config);
}

LossResult cfm_loss(std::span<const FlowSample> batch, const ModelParams& params, const ModelConfig& config,
                    backbone::Dropout* dropout) {
  if (batch.empty()) throw Error(ErrorKind::Input, "cfm_loss: empty batch");
  LossResult res{0.0, params.zeros_like()};
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const std::size_t F = config.feature_dim, E = config.token_embed_dim;
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const FlowSample& s = batch[bi];
    const ConditionBundle cond = s.condition(params, config);
    const Matrix xt = ot_flow_point(s.x0, s.x1, s.t);
    const Matrix target = ot_target(s.x0, s.x1);
    backbone::ForwardTape tape;
    try {
      tape = backbone::forward_with_tape(xt, s.t, cond, params, config, 0, dropout);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
      throw Error(ErrorKind::Numerical, "cfm_loss sample " + std::to_string(bi) + ": " + e.what());
    }
    const double norm = 1.0 / static_cast<double>(target.size());
    Matrix grad(target.rows(), target.cols());
    double sq = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double d = static_cast<double>(tape.output.data()[i]) - target.data()[i];
      sq += d * d;
      grad.data()[i] = static_cast<float>(2.0 * d * norm * inv_batch);
    }
    res.loss += sq * norm * inv_batch;
    Matrix grad_input;
    backbone::backward(params, config, tape, grad, res.grads, &grad_input);
    if (!s.cond_dropped) {
      for (std::size_t f = 0; f < s.frame_ids.size(); ++f) {
        auto dst = res.grads.token_embedding.row(s.frame_ids[f]);
        auto src = grad_input.row(f);
        for (std::size_t e = 0; e < E; ++e) dst[e] += src[F + e];
      }
    }
  }
  if (!std::isfinite(res.loss)) throw Error(ErrorKind::Numerical, "cfm_loss: non-finite loss");
  return res;
}

double cfm_loss_value(std::span<const FlowSample> batch, const ModelParams& params, const ModelConfig& config) {
  if (batch.empty()) throw Error(ErrorKind::Input, "cfm_loss: empty batch");
  double total = 0.0;
  for (const FlowSample& s : batch) {
    const Matrix out = backbone::vector_field(ot_flow_point(s.x0, s.x1, s.t), s.t, s.condition(params, config), params, config);
    const Matrix target = ot_target(s.x0, s.x1);
    double sq = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double d = static_cast<double>(out.data()[i]) - target.data()[i];
      sq += d * d;
    }
    total += sq / static_cast<double>(target.size());
  }
  return total / static_cast<double>(batch.size());
}

void SamplerConfig::validate() const {
  if (steps == 0) throw Error(ErrorKind::Config, "sampler steps must be >= 1");
  if (!(cfg_alpha >= 0.0f)) throw Error(ErrorKind::Config, "cfg alpha must be >= 0");
}

Matrix cfg_vector_field(const Matrix& x, float t, const ConditionBundle& cond, float alpha, const ModelParams& params,
                        const ModelConfig& config, std::size_t frame_offset) {
  if (!(alpha >= 0.0f)) throw Error(ErrorKind::Config, "cfg alpha must be >= 0");
  Matrix vc = backbone::vector_field(x, t, cond, params, config, frame_offset);
  if (alpha == 0.0f) return vc;
  const Matrix vu = backbone::vector_field(x, t, backbone::null_condition(x.rows(), config), params, config, frame_offset);
  const float wc = 1.0f + alpha;
  for (std::size_t i = 0; i < vc.size(); ++i) vc.data()[i] = wc * vc.data()[i] - alpha * vu.data()[i];
  return vc;
}

Matrix euler_sample(const Matrix& x0, const ConditionBundle& cond, const SamplerConfig& sampler,
                    const ModelParams& params, const ModelConfig& config, std::size_t frame_offset) {
  sampler.validate();
  Matrix x = x0;
  const float dt = 1.0f / static_cast<float>(sampler.steps);
  for (std::size_t k = 0; k < sampler.steps; ++k) {
    const float t = static_cast<float>(k) / static_cast<float>(sampler.steps);
    Matrix v;
    try {
      v = cfg_vector_field(x, t, cond, sampler.cfg_alpha, params, config, frame_offset);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
      throw Error(ErrorKind::Numerical, "euler step " + std::to_string(k) + ": " + e.what());
    }
    numerics::axpy_inplace(x, dt, v);
    if (!x.all_finite()) throw Error(ErrorKind::Numerical, "euler step " + std::to_string(k) + ": non-finite state");
  }
  return x;
}

}  // namespace streamflow::flow
