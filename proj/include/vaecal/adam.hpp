#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vaecal/errors.hpp"

namespace vaecal {

struct AdamHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators laid out like the parameter blocks they track.
struct AdamState {
  AdamHyper hyper;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamHyper h) : hyper(h) {}
};

namespace detail {

inline void adam_shape(AdamState& state, std::span<const std::span<double>> params) {
  if (state.m.empty() && state.step == 0) {
    for (auto p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (state.m[b].size() != params[b].size()) throw ShapeError("adam: block size mismatch");
  }
}

}  // namespace detail

/// One bias-corrected Adam update over parallel lists of parameter and
/// gradient blocks.
inline void adam_step(AdamState& state, std::span<const std::span<double>> params,
                      std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: gradient layout mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) throw ShapeError("adam: gradient block mismatch");
  }
  detail::adam_shape(state, params);

  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      params[b][i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

/// Convenience overload for anything exposing blocks() on both sides
/// (VaeModel parameters and GradientTape).
template <typename Params, typename Grads>
void adam_step(AdamState& state, Params& params, const Grads& grads) {
  auto p = params.blocks();
  auto g = grads.blocks();
  adam_step(state, std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g));
}

}  // namespace vaecal
