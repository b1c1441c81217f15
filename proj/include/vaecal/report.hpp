#pragma once

// Text, TSV and JSON renderings of evaluation reports. Column order is
// MAE, Accuracy (%), R2, KL Divergence, JS Divergence.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "vaecal/evaluate.hpp"

namespace vaecal {

inline constexpr std::array<const char*, 5> kMetricHeaders = {
    "MAE", "Accuracy (%)", "R2", "KL Divergence", "JS Divergence"};

inline std::array<double, 5> metric_values(const MetricRow& r) {
  return {r.mae, r.accuracy_pct, r.r2, r.kld, r.jsd};
}

inline std::vector<const MetricRow*> report_rows(const EvalReport& r) {
  std::vector<const MetricRow*> rows;
  for (const auto& row : r.reconstruction) rows.push_back(&row);
  rows.push_back(&r.calibration);
  return rows;
}

/// Tab-separated table. `split` names the evaluated rows (unseen or all).
inline std::string report_tsv(const std::vector<std::pair<std::string, EvalReport>>& splits) {
  std::string out = "split\trole\tsensor";
  for (const char* h : kMetricHeaders) out += fmt::format("\t{}", h);
  out += "\taccuracy_excluded\trows\n";
  for (const auto& [name, rep] : splits) {
    for (const auto* row : report_rows(rep)) {
      const bool cal = row == &rep.calibration;
      out += fmt::format("{}\t{}\t{}", name, cal ? "calibration" : "reconstruction", row->label);
      for (double v : metric_values(*row)) out += fmt::format("\t{:.10g}", v);
      out += fmt::format("\t{}\t{}\n", row->accuracy_excluded, rep.rows);
    }
  }
  return out;
}

inline nlohmann::ordered_json metric_json(const MetricRow& r) {
  nlohmann::ordered_json j;
  j["sensor"] = r.label;
  j["mae"] = r.mae;
  j["accuracy_pct"] = r.accuracy_pct;
  j["r2"] = r.r2;
  j["kl_divergence"] = r.kld;
  j["js_divergence"] = r.jsd;
  j["accuracy_excluded"] = r.accuracy_excluded;
  return j;
}

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["target"] = std::string(target_column(r.target));
  j["rows"] = r.rows;
  j["reconstruction"] = nlohmann::ordered_json::array();
  for (const auto& row : r.reconstruction) j["reconstruction"].push_back(metric_json(row));
  j["calibration"] = metric_json(r.calibration);
  if (r.target == Target::CO) j["reference_mae_deepcm"] = kDeepCmCoMae;
  return j;
}

/// Fixed-width console table, one row per sensor.
inline std::string report_text(const EvalReport& r, const std::string& title) {
  std::string out = fmt::format("{} ({} rows)\n", title, r.rows);
  out += fmt::format("{:<16}{:>10}{:>14}{:>9}{:>15}{:>15}\n", "Sensor", kMetricHeaders[0],
                     kMetricHeaders[1], kMetricHeaders[2], kMetricHeaders[3], kMetricHeaders[4]);
  auto line = [&](const MetricRow& m) {
    out += fmt::format("{:<16}{:>10.2f}{:>14.2f}{:>9.4f}{:>15.5f}{:>15.5f}\n", m.label, m.mae,
                       m.accuracy_pct, m.r2, m.kld, m.jsd);
  };
  for (const auto& row : r.reconstruction) line(row);
  out += std::string(79, '-') + "\n";
  line(r.calibration);
  if (r.target == Target::CO) {
    out += fmt::format("reference: DeepCM CO(GT) MAE {:.3f}; achieved {:.3f}\n", kDeepCmCoMae,
                       r.calibration.mae);
  }
  return out;
}

/// Median/min/max of each metric across repeated runs.
struct MetricSpread {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline MetricSpread spread(std::vector<double> v) {
  if (v.empty()) throw SchemaError("spread: no values");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double med = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {med, v.front(), v.back()};
}

struct RowSpread {
  std::string label;
  std::array<MetricSpread, 5> metrics;  // kMetricHeaders order
};

struct SeedSummary {
  Target target = Target::CO;
  std::vector<std::uint64_t> seeds;
  std::array<RowSpread, 4> reconstruction;
  RowSpread calibration;
};

inline SeedSummary summarize(Target t, const std::vector<std::uint64_t>& seeds,
                             const std::vector<EvalReport>& reports) {
  if (reports.empty() || reports.size() != seeds.size()) {
    throw SchemaError("summarize: need one report per seed");
  }
  SeedSummary s;
  s.target = t;
  s.seeds = seeds;
  auto collect = [&](auto pick) {
    RowSpread rs;
    rs.label = pick(reports.front()).label;
    for (std::size_t k = 0; k < 5; ++k) {
      std::vector<double> v;
      for (const auto& r : reports) v.push_back(metric_values(pick(r))[k]);
      rs.metrics[k] = spread(std::move(v));
    }
    return rs;
  };
  for (std::size_t c = 0; c < 4; ++c) {
    s.reconstruction[c] = collect([c](const EvalReport& r) -> const MetricRow& {
      return r.reconstruction[c];
    });
  }
  s.calibration = collect([](const EvalReport& r) -> const MetricRow& { return r.calibration; });
  return s;
}

inline std::string summary_tsv_header() {
  std::string out = "target\trole\tsensor";
  for (const char* h : kMetricHeaders) {
    out += fmt::format("\t{} median\t{} min\t{} max", h, h, h);
  }
  return out + "\n";
}

inline std::string summary_tsv_row(const SeedSummary& s, const RowSpread& row, bool calibration) {
  std::string out = fmt::format("{}\t{}\t{}", target_name(s.target),
                                calibration ? "calibration" : "reconstruction", row.label);
  for (const auto& m : row.metrics) out += fmt::format("\t{:.10g}\t{:.10g}\t{:.10g}", m.median, m.min, m.max);
  return out + "\n";
}

inline std::string summary_tsv(const SeedSummary& s) {
  std::string out = summary_tsv_header();
  for (const auto& row : s.reconstruction) out += summary_tsv_row(s, row, false);
  out += summary_tsv_row(s, s.calibration, true);
  return out;
}

inline std::string summary_text(const SeedSummary& s) {
  std::string out = fmt::format("{} calibration VAE, median [min, max] over {} seeds, unseen split\n",
                                target_name(s.target), s.seeds.size());
  auto line = [&](const RowSpread& r) {
    out += fmt::format("{:<16}", r.label);
    for (std::size_t k = 0; k < 5; ++k) {
      const auto& m = r.metrics[k];
      out += fmt::format("  {}={:.4g} [{:.4g}, {:.4g}]", kMetricHeaders[k], m.median, m.min, m.max);
    }
    out += "\n";
  };
  for (const auto& r : s.reconstruction) line(r);
  line(s.calibration);
  if (s.target == Target::CO) {
    out += fmt::format("reference: DeepCM CO(GT) MAE {:.3f}; achieved median {:.3f}\n",
                       kDeepCmCoMae, s.calibration.metrics[0].median);
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const SeedSummary& s) {
  auto row_json = [](const RowSpread& r) {
    nlohmann::ordered_json j;
    j["sensor"] = r.label;
    static constexpr std::array<const char*, 5> keys = {"mae", "accuracy_pct", "r2",
                                                        "kl_divergence", "js_divergence"};
    for (std::size_t k = 0; k < 5; ++k) {
      j[keys[k]] = {{"median", r.metrics[k].median},
                    {"min", r.metrics[k].min},
                    {"max", r.metrics[k].max}};
    }
    return j;
  };
  nlohmann::ordered_json j;
  j["target"] = std::string(target_column(s.target));
  j["seeds"] = s.seeds;
  j["reconstruction"] = nlohmann::ordered_json::array();
  for (const auto& r : s.reconstruction) j["reconstruction"].push_back(row_json(r));
  j["calibration"] = row_json(s.calibration);
  if (s.target == Target::CO) j["reference_mae_deepcm"] = kDeepCmCoMae;
  return j;
}

}  // namespace vaecal
