#pragma once

// Calibration VAE: encoder -> (mu, logvar) -> z -> decoder. The scalar latent
// sample z doubles as the calibrated prediction of the reference target.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vaecal/dense.hpp"
#include "vaecal/errors.hpp"

namespace vaecal {

inline constexpr std::size_t kInputDim = 4;
inline constexpr std::size_t kEncoderWidth = 4;
inline constexpr std::size_t kLatentDim = 1;
inline constexpr std::size_t kDecoderWidth = 4;

enum class LayerId : std::size_t {
  encoder = 0,
  mu_head = 1,
  logvar_head = 2,
  decoder_hidden = 3,
  decoder_out = 4,
};

inline constexpr std::size_t kLayerCount = 5;

inline std::string_view layer_name(LayerId id) {
  static constexpr std::array<std::string_view, kLayerCount> names = {
      "encoder", "mu_head", "logvar_head", "decoder_hidden", "decoder_out"};
  return names[static_cast<std::size_t>(id)];
}

/// Per-layer weight and bias blocks in LayerId order. Used both for model
/// parameters and for their gradients.
struct LayerBlocks {
  std::array<DenseLayer, kLayerCount> layers;

  DenseLayer& operator[](LayerId id) { return layers[static_cast<std::size_t>(id)]; }
  const DenseLayer& operator[](LayerId id) const { return layers[static_cast<std::size_t>(id)]; }

  /// Flat views in the fixed persistence order: for each layer, weights then biases.
  std::vector<std::span<double>> blocks() {
    std::vector<std::span<double>> out;
    for (auto& l : layers) {
      out.push_back(l.weights.data());
      out.emplace_back(l.biases);
    }
    return out;
  }

  std::vector<std::span<const double>> blocks() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : layers) {
      out.push_back(l.weights.data());
      out.emplace_back(l.biases);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
  }

  friend bool operator==(const LayerBlocks&, const LayerBlocks&) = default;
};

class VaeModel {
 public:
  VaeModel() {
    params_[LayerId::encoder] = DenseLayer(kInputDim, kEncoderWidth, Activation::sigmoid);
    params_[LayerId::mu_head] = DenseLayer(kEncoderWidth, kLatentDim, Activation::linear);
    params_[LayerId::logvar_head] = DenseLayer(kEncoderWidth, kLatentDim, Activation::linear);
    params_[LayerId::decoder_hidden] = DenseLayer(kLatentDim, kDecoderWidth, Activation::sigmoid);
    params_[LayerId::decoder_out] = DenseLayer(kDecoderWidth, kInputDim, Activation::sigmoid);
  }

  template <typename Rng>
  static VaeModel glorot(Rng& rng) {
    VaeModel m;
    for (auto& l : m.params_.layers) l.glorot_init(rng);
    return m;
  }

  static VaeModel initialized(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return glorot(rng);
  }

  DenseLayer& layer(LayerId id) { return params_[id]; }
  const DenseLayer& layer(LayerId id) const { return params_[id]; }

  LayerBlocks& parameters() noexcept { return params_; }
  const LayerBlocks& parameters() const noexcept { return params_; }

  friend bool operator==(const VaeModel&, const VaeModel&) = default;

 private:
  LayerBlocks params_;
};

/// Gradients shaped like a VaeModel's parameters.
class GradientTape {
 public:
  GradientTape() = default;

  explicit GradientTape(const VaeModel& model) {
    for (std::size_t i = 0; i < kLayerCount; ++i) {
      const auto& src = model.parameters().layers[i];
      grads_.layers[i] = DenseLayer(src.inputs(), src.outputs(), src.activation);
    }
  }

  DenseLayer& layer(LayerId id) { return grads_[id]; }
  const DenseLayer& layer(LayerId id) const { return grads_[id]; }

  std::vector<std::span<double>> blocks() { return grads_.blocks(); }
  std::vector<std::span<const double>> blocks() const { return grads_.blocks(); }

  void accumulate(LayerId id, const DenseGrad& g) {
    auto& dst = grads_[id];
    auto w = dst.weights.data();
    auto src = g.weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += src[i];
    for (std::size_t i = 0; i < dst.biases.size(); ++i) dst.biases[i] += g.biases[i];
  }

  GradientTape& operator+=(const GradientTape& other) {
    auto dst = blocks();
    auto src = other.blocks();
    if (dst.size() != src.size()) throw ShapeError("gradient tape layout mismatch");
    for (std::size_t b = 0; b < dst.size(); ++b) {
      if (dst[b].size() != src[b].size()) throw ShapeError("gradient tape block mismatch");
      for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += src[b][i];
    }
    return *this;
  }

  GradientTape& operator*=(double s) {
    for (auto block : blocks()) {
      for (double& v : block) v *= s;
    }
    return *this;
  }

 private:
  LayerBlocks grads_;
};

struct LossWeights {
  double alpha = 1.0;  // reconstruction
  double beta = 1.0;   // calibration
  double gamma = 0.0;  // latent KL
};

struct ForwardTrace {
  Vector x;
  DenseOutput encoder;
  DenseOutput mu_head;
  DenseOutput logvar_head;
  DenseOutput decoder_hidden;
  DenseOutput decoder_out;
  double mu = 0.0;
  double logvar = 0.0;
  double epsilon = 0.0;
  double z = 0.0;

  std::span<const double> x_recon() const noexcept { return decoder_out.output; }
};

namespace detail {

inline void require_finite(std::span<const double> v, LayerId id) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite value in layer " + std::string(layer_name(id)));
    }
  }
}

}  // namespace detail

/// One pass with caller-supplied noise. epsilon = 0 gives the deterministic
/// mean path.
inline ForwardTrace forward(const VaeModel& model, std::span<const double> x, double epsilon) {
  if (x.size() != kInputDim) throw ShapeError("forward: expected 4 inputs");
  ForwardTrace t;
  t.x.assign(x.begin(), x.end());
  t.epsilon = epsilon;

  t.encoder = dense_forward(model.layer(LayerId::encoder), x);
  detail::require_finite(t.encoder.output, LayerId::encoder);
  t.mu_head = dense_forward(model.layer(LayerId::mu_head), t.encoder.output);
  detail::require_finite(t.mu_head.output, LayerId::mu_head);
  t.logvar_head = dense_forward(model.layer(LayerId::logvar_head), t.encoder.output);
  detail::require_finite(t.logvar_head.output, LayerId::logvar_head);

  t.mu = t.mu_head.output[0];
  t.logvar = t.logvar_head.output[0];
  t.z = t.mu + std::exp(0.5 * t.logvar) * epsilon;
  if (!std::isfinite(t.z)) throw NumericError("non-finite latent sample");

  const double z[1] = {t.z};
  t.decoder_hidden = dense_forward(model.layer(LayerId::decoder_hidden), z);
  detail::require_finite(t.decoder_hidden.output, LayerId::decoder_hidden);
  t.decoder_out = dense_forward(model.layer(LayerId::decoder_out), t.decoder_hidden.output);
  detail::require_finite(t.decoder_out.output, LayerId::decoder_out);
  return t;
}

struct LossParts {
  double total = 0.0;
  double recon = 0.0;
  double cal = 0.0;
  double kld = 0.0;
};

/// Gaussian KL of N(mu, exp(logvar)) against N(0, 1).
inline double latent_kld(double mu, double logvar) {
  return -0.5 * (1.0 + logvar - mu * mu - std::exp(logvar));
}

inline LossParts loss(const ForwardTrace& trace, std::span<const double> x, double y,
                      const LossWeights& w) {
  const auto xr = trace.x_recon();
  if (x.size() != xr.size()) throw ShapeError("loss: input/reconstruction size mismatch");
  LossParts p;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - xr[i];
    p.recon += d * d;
  }
  p.recon /= static_cast<double>(x.size());
  p.cal = (y - trace.z) * (y - trace.z);
  p.kld = latent_kld(trace.mu, trace.logvar);
  p.total = w.alpha * p.recon + w.beta * p.cal + w.gamma * p.kld;
  return p;
}

/// Gradient of the total loss for one sample, noise held at trace.epsilon.
inline GradientTape backward(const VaeModel& model, const ForwardTrace& trace,
                             std::span<const double> x, double y, const LossWeights& w) {
  const auto xr = trace.x_recon();
  if (x.size() != kInputDim || xr.size() != kInputDim) throw ShapeError("backward: bad input");
  GradientTape tape(model);

  Vector d_xr(kInputDim);
  for (std::size_t i = 0; i < kInputDim; ++i) {
    d_xr[i] = w.alpha * 2.0 * (xr[i] - x[i]) / static_cast<double>(kInputDim);
  }
  auto g_out = dense_backward(model.layer(LayerId::decoder_out),
                              trace.decoder_out.pre_activation,
                              trace.decoder_hidden.output, d_xr);
  tape.accumulate(LayerId::decoder_out, g_out);

  const double z_in[1] = {trace.z};
  auto g_hid = dense_backward(model.layer(LayerId::decoder_hidden),
                              trace.decoder_hidden.pre_activation, z_in, g_out.input);
  tape.accumulate(LayerId::decoder_hidden, g_hid);

  const double d_z = g_hid.input[0] + w.beta * 2.0 * (trace.z - y);
  const double sigma = std::exp(0.5 * trace.logvar);
  const double d_mu = d_z + w.gamma * trace.mu;
  const double d_logvar =
      d_z * 0.5 * sigma * trace.epsilon + w.gamma * 0.5 * (std::exp(trace.logvar) - 1.0);

  const double up_mu[1] = {d_mu};
  const double up_lv[1] = {d_logvar};
  auto g_mu = dense_backward(model.layer(LayerId::mu_head), trace.mu_head.pre_activation,
                             trace.encoder.output, up_mu);
  auto g_lv = dense_backward(model.layer(LayerId::logvar_head),
                             trace.logvar_head.pre_activation, trace.encoder.output, up_lv);
  tape.accumulate(LayerId::mu_head, g_mu);
  tape.accumulate(LayerId::logvar_head, g_lv);

  Vector d_enc(kEncoderWidth);
  for (std::size_t i = 0; i < kEncoderWidth; ++i) d_enc[i] = g_mu.input[i] + g_lv.input[i];
  auto g_enc = dense_backward(model.layer(LayerId::encoder), trace.encoder.pre_activation, x,
                              d_enc);
  tape.accumulate(LayerId::encoder, g_enc);
  return tape;
}

struct Prediction {
  double y;  // normalized calibration output
  Vector x_recon;
};

inline Prediction predict(const VaeModel& model, std::span<const double> x) {
  auto t = forward(model, x, 0.0);
  return {t.z, Vector(t.x_recon().begin(), t.x_recon().end())};
}

}  // namespace vaecal
