#pragma once

// Test-only reference computations kept apart from the library code paths
// they check: a straight-line transcription of the five layer equations in
// extended precision, and a central finite-difference gradient built on it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "vaecal/vae.hpp"

namespace vaecal::fixtures {

using Real = long double;

struct OracleOutputs {
  std::array<Real, 4> e{};
  Real mu = 0, logvar = 0, z = 0;
  std::array<Real, 4> h{};
  std::array<Real, 4> xr{};
  Real loss = 0;
};

inline Real logistic(Real v) { return 1.0L / (1.0L + std::exp(-v)); }

inline Real w(const VaeModel& m, LayerId id, std::size_t r, std::size_t c) {
  return static_cast<Real>(m.layer(id).weights(r, c));
}
inline Real b(const VaeModel& m, LayerId id, std::size_t r) {
  return static_cast<Real>(m.layer(id).biases[r]);
}

inline OracleOutputs oracle_forward(const VaeModel& m, std::span<const double> xd, double yd,
                                    double epsd, const LossWeights& lw) {
  using L = LayerId;
  const Real x0 = xd[0], x1 = xd[1], x2 = xd[2], x3 = xd[3];
  const Real y = yd, eps = epsd;
  OracleOutputs o;
  for (std::size_t i = 0; i < 4; ++i) {
    o.e[i] = logistic(w(m, L::encoder, i, 0) * x0 + w(m, L::encoder, i, 1) * x1 +
                      w(m, L::encoder, i, 2) * x2 + w(m, L::encoder, i, 3) * x3 +
                      b(m, L::encoder, i));
  }
  o.mu = w(m, L::mu_head, 0, 0) * o.e[0] + w(m, L::mu_head, 0, 1) * o.e[1] +
         w(m, L::mu_head, 0, 2) * o.e[2] + w(m, L::mu_head, 0, 3) * o.e[3] + b(m, L::mu_head, 0);
  o.logvar = w(m, L::logvar_head, 0, 0) * o.e[0] + w(m, L::logvar_head, 0, 1) * o.e[1] +
             w(m, L::logvar_head, 0, 2) * o.e[2] + w(m, L::logvar_head, 0, 3) * o.e[3] +
             b(m, L::logvar_head, 0);
  o.z = o.mu + std::exp(0.5L * o.logvar) * eps;
  for (std::size_t i = 0; i < 4; ++i) {
    o.h[i] = logistic(w(m, L::decoder_hidden, i, 0) * o.z + b(m, L::decoder_hidden, i));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    o.xr[i] = logistic(w(m, L::decoder_out, i, 0) * o.h[0] + w(m, L::decoder_out, i, 1) * o.h[1] +
                       w(m, L::decoder_out, i, 2) * o.h[2] + w(m, L::decoder_out, i, 3) * o.h[3] +
                       b(m, L::decoder_out, i));
  }
  const Real recon = ((x0 - o.xr[0]) * (x0 - o.xr[0]) + (x1 - o.xr[1]) * (x1 - o.xr[1]) +
                      (x2 - o.xr[2]) * (x2 - o.xr[2]) + (x3 - o.xr[3]) * (x3 - o.xr[3])) /
                     4.0L;
  const Real cal = (y - o.z) * (y - o.z);
  const Real kld = -0.5L * (1.0L + o.logvar - o.mu * o.mu - std::exp(o.logvar));
  o.loss = static_cast<Real>(lw.alpha) * recon + static_cast<Real>(lw.beta) * cal +
           static_cast<Real>(lw.gamma) * kld;
  return o;
}

struct GradCheckResult {
  std::size_t checked = 0;
  double worst_relative = 0.0;
  std::size_t worst_block = 0;
  std::size_t worst_index = 0;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Compares every analytic gradient entry against central differences of the
/// oracle loss with the noise draw held fixed.
inline GradCheckResult gradient_check(const VaeModel& model, std::span<const double> x, double y,
                                      double eps, const LossWeights& lw, double h = 1e-5) {
  auto trace = forward(model, x, eps);
  auto tape = backward(model, trace, x, y, lw);
  auto analytic = tape.blocks();

  VaeModel probe = model;
  auto params = probe.parameters().blocks();
  GradCheckResult r;
  for (std::size_t blk = 0; blk < params.size(); ++blk) {
    for (std::size_t i = 0; i < params[blk].size(); ++i) {
      const double saved = params[blk][i];
      params[blk][i] = saved + h;
      const Real up = oracle_forward(probe, x, y, eps, lw).loss;
      params[blk][i] = saved - h;
      const Real down = oracle_forward(probe, x, y, eps, lw).loss;
      params[blk][i] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * static_cast<Real>(h)));
      const double rel = relative_error(analytic[blk][i], numeric);
      ++r.checked;
      if (rel > r.worst_relative) {
        r.worst_relative = rel;
        r.worst_block = blk;
        r.worst_index = i;
      }
    }
  }
  return r;
}

}  // namespace vaecal::fixtures
