#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "vaecal/data.hpp"
#include "vaecal/metrics.hpp"
#include "vaecal/vae.hpp"

namespace vaecal {

/// MAE reported for the DeepCM model on CO(GT) over the same dataset; printed
/// next to CO results for comparison.
inline constexpr double kDeepCmCoMae = 0.288;

/// Denormalized model outputs over a frame.
struct EvalSeries {
  std::vector<double> truth_y;
  std::vector<double> pred_y;
  std::array<std::vector<double>, 4> truth_x;
  std::array<std::vector<double>, 4> recon_x;
};

/// Reconstruction rows for the four inputs, then the calibration row.
struct EvalReport {
  Target target = Target::CO;
  std::size_t rows = 0;
  std::array<MetricRow, 4> reconstruction;
  MetricRow calibration;
};

inline EvalSeries infer(const VaeModel& model, const Normalizer& inputs,
                        const Normalizer& target_norm, const SensorFrame& frame, Target t) {
  EvalSeries s;
  const std::size_t tcol = target_norm.index_of(target_column(t));
  auto x_norm = inputs.apply(frame);
  const auto truth_y = frame.column(target_column(t));
  for (std::size_t i = 0; i < frame.size(); ++i) {
    auto p = predict(model, x_norm[i]);
    auto recon = inputs.invert(p.x_recon);
    s.truth_y.push_back(truth_y[i]);
    s.pred_y.push_back(target_norm.invert(tcol, p.y));
    for (std::size_t c = 0; c < 4; ++c) {
      s.truth_x[c].push_back(frame[i].inputs[c]);
      s.recon_x[c].push_back(recon[c]);
    }
  }
  return s;
}

inline EvalReport report_from_series(const EvalSeries& s, Target t,
                                     const HistogramSettings& hist) {
  EvalReport r;
  r.target = t;
  r.rows = s.truth_y.size();
  for (std::size_t c = 0; c < 4; ++c) {
    r.reconstruction[c] = score(std::string(kInputColumns[c]), s.truth_x[c], s.recon_x[c], hist);
  }
  r.calibration = score(std::string(target_column(t)), s.truth_y, s.pred_y, hist);
  return r;
}

/// Scores a trained model in physical units on `frame`.
inline EvalReport evaluate(const VaeModel& model, const Normalizer& inputs,
                           const Normalizer& target_norm, const SensorFrame& frame, Target t,
                           const HistogramSettings& hist = {}) {
  return report_from_series(infer(model, inputs, target_norm, frame, t), t, hist);
}

}  // namespace vaecal
