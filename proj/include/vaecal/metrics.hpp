#pragma once

// Regression and distribution-similarity metrics used to score calibration
// and reconstruction outputs in physical units.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vaecal/errors.hpp"

namespace vaecal {

namespace detail {

inline void require_paired(std::span<const double> truth, std::span<const double> pred,
                           const char* what) {
  if (truth.size() != pred.size()) {
    throw SchemaError(std::string(what) + ": length mismatch");
  }
  if (truth.empty()) throw SchemaError(std::string(what) + ": empty input");
}

}  // namespace detail

inline double mae(std::span<const double> truth, std::span<const double> pred) {
  detail::require_paired(truth, pred, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += std::abs(pred[i] - truth[i]);
  return acc / static_cast<double>(truth.size());
}

struct AccuracyResult {
  double percent = 0.0;
  std::size_t excluded = 0;  // terms with |truth| below the cutoff
};

inline constexpr double kAccuracyTruthCutoff = 1e-12;

/// 100 minus the mean absolute percentage error. Near-zero truth terms are
/// dropped and counted.
inline AccuracyResult accuracy_pct_detail(std::span<const double> truth,
                                          std::span<const double> pred) {
  detail::require_paired(truth, pred, "accuracy");
  double acc = 0.0;
  std::size_t used = 0;
  AccuracyResult r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(truth[i]) < kAccuracyTruthCutoff) {
      ++r.excluded;
      continue;
    }
    acc += 100.0 * std::abs(pred[i] - truth[i]) / truth[i];
    ++used;
  }
  if (used == 0) throw DegenerateError("accuracy: every truth term is zero");
  r.percent = 100.0 - acc / static_cast<double>(used);
  return r;
}

inline double accuracy_pct(std::span<const double> truth, std::span<const double> pred) {
  return accuracy_pct_detail(truth, pred).percent;
}

inline double r_squared(std::span<const double> truth, std::span<const double> pred) {
  detail::require_paired(truth, pred, "r_squared");
  if (truth.size() < 2) throw SchemaError("r_squared: need at least 2 samples");
  const double mean =
      std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw DegenerateError("r_squared: constant truth");
  return 1.0 - ss_res / ss_tot;
}

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<double> probabilities;
};

/// Binned empirical distribution. Out-of-range values land in the end bins;
/// `smoothing` is added to every bin count before normalizing.
inline Histogram histogram(std::span<const double> values, std::span<const double> edges,
                           double smoothing) {
  if (edges.size() < 2) throw SchemaError("histogram: need at least 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw SchemaError("histogram: edges must ascend");
  }
  if (!(smoothing >= 0.0)) throw SchemaError("histogram: negative smoothing");
  const std::size_t bins = edges.size() - 1;
  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    auto idx = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  double total = 0.0;
  for (double& c : counts) {
    c += smoothing;
    total += c;
  }
  if (!(total > 0.0)) throw DegenerateError("histogram: no mass (empty values, zero smoothing)");
  for (double& c : counts) c /= total;
  return {std::vector<double>(edges.begin(), edges.end()), std::move(counts)};
}

/// `bins` equal-width bins spanning [lo, hi]. A zero-width range is widened
/// by 0.5 on each side.
inline std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  if (bins == 0) throw SchemaError("uniform_edges: zero bins");
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  e.back() = hi;
  return e;
}

namespace detail {

inline void require_same_edges(const Histogram& p, const Histogram& q) {
  if (p.bin_edges != q.bin_edges || p.probabilities.size() != q.probabilities.size()) {
    throw SchemaError("divergence: histograms use different bin edges");
  }
}

// Sum of p ln(p/q) with 0 ln(0/q) = 0; callers guarantee q > 0 where p > 0.
inline double kl_terms(std::span<const double> p, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

}  // namespace detail

/// KL(p || q), natural log.
inline double kl_divergence(const Histogram& p, const Histogram& q) {
  detail::require_same_edges(p, q);
  for (double qc : q.probabilities) {
    if (qc == 0.0) throw DivergenceError("kl_divergence: reference histogram has an empty bin");
  }
  return std::max(0.0, detail::kl_terms(p.probabilities, q.probabilities));
}

inline double js_divergence(const Histogram& p, const Histogram& q) {
  detail::require_same_edges(p, q);
  std::vector<double> m(p.probabilities.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = 0.5 * (p.probabilities[i] + q.probabilities[i]);
  }
  const double a = detail::kl_terms(p.probabilities, m);
  const double b = detail::kl_terms(q.probabilities, m);
  return std::clamp(0.5 * (a + b), 0.0, std::log(2.0));
}

struct HistogramSettings {
  std::size_t bins = 50;
  double smoothing = 1e-10;
};

struct MetricRow {
  std::string label;
  double mae = 0.0;
  double accuracy_pct = 0.0;
  std::size_t accuracy_excluded = 0;
  double r2 = 0.0;
  double kld = 0.0;
  double jsd = 0.0;
};

struct PairHistograms {
  Histogram truth;
  Histogram pred;
};

/// Both histograms on shared edges spanning the union range of the pair.
inline PairHistograms pair_histograms(std::span<const double> truth,
                                      std::span<const double> pred,
                                      const HistogramSettings& s) {
  detail::require_paired(truth, pred, "histograms");
  auto [tlo, thi] = std::minmax_element(truth.begin(), truth.end());
  auto [plo, phi] = std::minmax_element(pred.begin(), pred.end());
  auto edges = uniform_edges(std::min(*tlo, *plo), std::max(*thi, *phi), s.bins);
  return {histogram(truth, edges, s.smoothing), histogram(pred, edges, s.smoothing)};
}

/// All five scores for one truth/prediction pair. Divergences compare the
/// prediction distribution against the truth distribution, KL(pred || truth).
inline MetricRow score(std::string label, std::span<const double> truth,
                       std::span<const double> pred, const HistogramSettings& s) {
  MetricRow r;
  r.label = std::move(label);
  try {
    r.mae = mae(truth, pred);
    auto acc = accuracy_pct_detail(truth, pred);
    r.accuracy_pct = acc.percent;
    r.accuracy_excluded = acc.excluded;
    r.r2 = r_squared(truth, pred);
    auto h = pair_histograms(truth, pred, s);
    r.kld = kl_divergence(h.pred, h.truth);
    r.jsd = js_divergence(h.pred, h.truth);
  } catch (const Error& e) {
    throw Error(r.label + ": " + e.what());
  }
  return r;
}

}  // namespace vaecal
