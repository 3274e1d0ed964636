#include <cmath>

#include "streamflow/error.hpp"
#include "streamflow/flow.hpp"

namespace streamflow::flow {

namespace {

constexpr std::uint64_t kBatchStreamBase = 1ULL << 32;
constexpr std::uint64_t kDropoutStreamBase = 2ULL << 32;
constexpr std::size_t kDivergencePatience = 100;

struct Adam {
  ModelParams m, v;
  std::size_t t = 0;
};

void adam_step(ModelParams& params, const ModelParams& grads, Adam& state, const TrainConfig& cfg) {
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::vector<Matrix*> p, m, v;
  std::vector<const Matrix*> g;
  params.for_each([&](const std::string&, Matrix& x) { p.push_back(&x); });
  state.m.for_each([&](const std::string&, Matrix& x) { m.push_back(&x); });
  state.v.for_each([&](const std::string&, Matrix& x) { v.push_back(&x); });
  grads.for_each([&](const std::string&, const Matrix& x) { g.push_back(&x); });
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k]->size(); ++i) {
      const double gi = g[k]->data()[i];
      float& mi = m[k]->data()[i];
      float& vi = v[k]->data()[i];
      mi = static_cast<float>(cfg.beta1 * mi + (1.0 - cfg.beta1) * gi);
      vi = static_cast<float>(cfg.beta2 * vi + (1.0 - cfg.beta2) * gi * gi);
      const double update = cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
      p[k]->data()[i] = static_cast<float>(p[k]->data()[i] - update);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& w) { throw Error(ErrorKind::Config, "train config: " + w); };
  if (!(cond_drop_rate >= 0.0 && cond_drop_rate <= 1.0)) fail("cond_drop_rate must lie in [0, 1]");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (batch_frames == 0) fail("batch_frames must be >= 1");
  if (!(t_sampler.sigma > 0.0)) fail("logit-normal sigma must be > 0");
  if (log_every == 0) fail("log_every must be >= 1");
}

std::vector<FlowSample> make_batch(std::span<const corpus::Utterance> dataset, const ModelConfig& model,
                                   const TrainConfig& config, std::uint64_t seed, std::size_t step) {
  if (dataset.empty()) throw Error(ErrorKind::Input, "training dataset is empty");
  numerics::SeededRng rng(seed, kBatchStreamBase + step);
  std::vector<FlowSample> batch;
  std::size_t frames = 0;
  while (frames < config.batch_frames) {
    const auto& u = dataset[rng.next_below(dataset.size())];
    if (u.features.cols() != model.feature_dim) throw Error(ErrorKind::Input, "utterance feature width does not match model");
    FlowSample s;
    s.x1 = u.features;
    s.x0 = Matrix(u.features.rows(), u.features.cols());
    for (float& v : s.x0.values()) v = static_cast<float>(rng.next_gaussian());
    s.t = sample_t(config.t_sampler, rng);
    s.cond_dropped = rng.next_uniform() < config.cond_drop_rate;
    s.frame_ids = backbone::upsample_tokens(u.tokens, model.upsample_factor);
    if (s.frame_ids.size() != u.features.rows()) throw Error(ErrorKind::Input, "utterance tokens and features are misaligned");
    s.speaker = u.speaker;
    frames += u.features.rows();
    batch.push_back(std::move(s));
  }
  return batch;
}

TrainResult train_from(ModelParams initial, std::span<const corpus::Utterance> dataset, const ModelConfig& model,
                       const TrainConfig& config, std::uint64_t seed, const TrainProgress& progress) {
  config.validate();
  model.validate();
  if (dataset.empty()) throw Error(ErrorKind::Input, "training dataset is empty");
  TrainResult res{std::move(initial), {}};
  Adam adam{res.params.zeros_like(), res.params.zeros_like(), 0};
  double initial_loss = 0.0;
  std::size_t above = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto batch = make_batch(dataset, model, config, seed, step);
    backbone::Dropout dropout{model.dropout, numerics::SeededRng(seed, kDropoutStreamBase + step)};
    LossResult lr = cfm_loss(batch, res.params, model, &dropout);
    const LossPoint point{step, lr.loss};
    res.trace.push_back(point);
    if (step == 0) initial_loss = lr.loss;
    above = lr.loss > 10.0 * initial_loss ? above + 1 : 0;
    if (above >= kDivergencePatience) {
      throw Error(ErrorKind::TrainingDiverged, "loss above 10x initial (" + std::to_string(initial_loss) + ") for " +
                                                   std::to_string(kDivergencePatience) + " steps at step " +
                                                   std::to_string(step));
    }
    if (progress && (step % config.log_every == 0 || step + 1 == config.steps)) progress(point);
    adam_step(res.params, lr.grads, adam, config);
  }
  return res;
}

TrainResult train_loop(std::span<const corpus::Utterance> dataset, const ModelConfig& model, const TrainConfig& config,
                       std::uint64_t seed, const TrainProgress& progress) {
  return train_from(backbone::init_params(model, seed), dataset, model, config, seed, progress);
}

}  // namespace streamflow::flow
