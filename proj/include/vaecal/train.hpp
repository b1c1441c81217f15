#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vaecal/adam.hpp"
#include "vaecal/data.hpp"
#include "vaecal/vae.hpp"

namespace vaecal {

struct TrainSettings {
  std::size_t batch_size = 16;
  std::size_t epochs = 500;
  LossWeights weights;
  AdamHyper adam;
  bool sample_noise = true;  // false pins epsilon to 0 for every step
};

/// Independent generator streams derived from one run seed.
enum class RngStream : std::uint32_t { init = 0, shuffle = 1, noise = 2 };

inline std::mt19937_64 stream_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

inline VaeModel initial_model(std::uint64_t seed) {
  auto rng = stream_rng(seed, RngStream::init);
  return VaeModel::glorot(rng);
}

struct EpochLoss {
  double total = 0.0;
  double recon = 0.0;
  double cal = 0.0;
  double kld = 0.0;
};

struct TrainingSet {
  std::vector<std::vector<double>> x;  // normalized inputs
  std::vector<double> y;               // normalized target
};

/// Builds normalized (x, y) pairs for the chosen target.
inline TrainingSet make_training_set(const SensorFrame& frame, const Normalizer& inputs,
                                     const Normalizer& target, Target t) {
  TrainingSet s;
  s.x = inputs.apply(frame);
  auto raw = frame.column(target_column(t));
  const std::size_t col = target.index_of(target_column(t));
  s.y.reserve(raw.size());
  for (double v : raw) s.y.push_back(target.apply(col, v));
  return s;
}

/// Batch-mean gradient of the total loss. `epsilons` holds one draw per
/// sample in batch order.
inline GradientTape batch_gradient(const VaeModel& model, const TrainingSet& data,
                                   std::span<const std::size_t> batch,
                                   std::span<const double> epsilons, const LossWeights& w,
                                   EpochLoss* running = nullptr) {
  GradientTape tape(model);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& x = data.x[batch[k]];
    const double y = data.y[batch[k]];
    auto trace = forward(model, x, epsilons[k]);
    if (running) {
      auto parts = loss(trace, x, y, w);
      running->total += parts.total;
      running->recon += parts.recon;
      running->cal += parts.cal;
      running->kld += parts.kld;
    }
    tape += backward(model, trace, x, y, w);
  }
  tape *= 1.0 / static_cast<double>(batch.size());
  return tape;
}

struct TrainResult {
  VaeModel model;
  std::vector<EpochLoss> loss_curve;  // per-sample mean over each epoch
};

/// Mini-batch Adam training. Every random draw (initial weights, batch
/// order, latent noise) comes from `seed`.
inline TrainResult train(const TrainingSet& data, const TrainSettings& settings,
                         std::uint64_t seed) {
  if (data.x.size() != data.y.size() || data.x.empty()) {
    throw SchemaError("train: inputs and targets must be non-empty and aligned");
  }
  TrainResult result{initial_model(seed), {}};
  BatchSampler sampler(data.x.size(), settings.batch_size,
                       stream_rng(seed, RngStream::shuffle)());
  auto noise_rng = stream_rng(seed, RngStream::noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  AdamState adam(settings.adam);

  result.loss_curve.reserve(settings.epochs);
  std::vector<double> eps;
  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    EpochLoss running;
    for (const auto& batch : sampler.next_epoch()) {
      eps.assign(batch.size(), 0.0);
      if (settings.sample_noise) {
        for (double& e : eps) e = normal(noise_rng);
      }
      auto tape = batch_gradient(result.model, data, batch, eps, settings.weights, &running);
      adam_step(adam, result.model.parameters(), tape);
    }
    const double n = static_cast<double>(data.x.size());
    result.loss_curve.push_back(
        {running.total / n, running.recon / n, running.cal / n, running.kld / n});
  }
  return result;
}

}  // namespace vaecal
