#pragma once

// End-to-end runs: dataset -> training -> evaluation -> artifact directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "vaecal/data.hpp"
#include "vaecal/evaluate.hpp"
#include "vaecal/model_io.hpp"
#include "vaecal/report.hpp"
#include "vaecal/train.hpp"

namespace vaecal {

struct ExperimentConfig {
  std::filesystem::path dataset_path;
  Target target = Target::CO;
  std::size_t train_count = 300;
  TrainSettings train;
  std::uint64_t seed = 1;
  std::size_t seed_count = 5;
  HistogramSettings hist;
  std::filesystem::path out_dir = "runs";
};

inline nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["dataset"] = c.dataset_path.filename().string();
  j["target"] = std::string(target_name(c.target));
  j["train_count"] = c.train_count;
  j["batch_size"] = c.train.batch_size;
  j["epochs"] = c.train.epochs;
  j["alpha"] = c.train.weights.alpha;
  j["beta"] = c.train.weights.beta;
  j["gamma"] = c.train.weights.gamma;
  j["learning_rate"] = c.train.adam.learning_rate;
  j["adam_beta1"] = c.train.adam.beta1;
  j["adam_beta2"] = c.train.adam.beta2;
  j["adam_eps"] = c.train.adam.eps;
  j["sample_noise"] = c.train.sample_noise;
  j["seed"] = c.seed;
  j["seed_count"] = c.seed_count;
  j["hist_bins"] = c.hist.bins;
  j["hist_smoothing"] = c.hist.smoothing;
  return j;
}

inline SensorFrame load_frame(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  return filter_complete(parse_csv(in));
}

/// The filtered frame plus everything derived from it that every seed shares.
struct PreparedData {
  SensorFrame frame;
  FrameSplit split;
  Normalizer inputs;       // fitted on the full frame
  Normalizer target_norm;  // single column, fitted on the full frame
  Target target = Target::CO;
};

inline PreparedData prepare(SensorFrame frame, Target t, std::size_t train_count) {
  PreparedData p;
  p.split = split_train_eval(frame, train_count);
  std::vector<std::string> in_cols(kInputColumns.begin(), kInputColumns.end());
  std::vector<std::string> tgt_col{std::string(target_column(t))};
  p.inputs = Normalizer::fit(frame, in_cols);
  p.target_norm = Normalizer::fit(frame, tgt_col);
  p.frame = std::move(frame);
  p.target = t;
  return p;
}

struct SeedRun {
  std::uint64_t seed = 0;
  ModelBundle bundle;
  std::vector<EpochLoss> loss_curve;
  EvalSeries series_all;
  EvalReport unseen;
  EvalReport all;
};

/// Trains and scores one seed. No I/O.
inline SeedRun run_seed(const PreparedData& data, const ExperimentConfig& cfg, std::uint64_t seed) {
  auto training = make_training_set(data.split.train, data.inputs, data.target_norm, data.target);
  auto trained = train(training, cfg.train, seed);

  SeedRun run;
  run.seed = seed;
  run.bundle = {std::move(trained.model), data.inputs, data.target_norm, data.target, seed};
  run.loss_curve = std::move(trained.loss_curve);
  run.series_all = infer(run.bundle.model, data.inputs, data.target_norm, data.frame, data.target);
  run.all = report_from_series(run.series_all, data.target, cfg.hist);
  run.unseen = evaluate(run.bundle.model, data.inputs, data.target_norm, data.split.eval,
                        data.target, cfg.hist);
  return run;
}

namespace detail {

inline std::string timestamp_text(const Timestamp& t) {
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:00", t.year, t.month, t.day, t.hour);
}

inline std::string histogram_rows(const std::string& component, const PairHistograms& h,
                                  const char* truth_name, const char* pred_name) {
  std::string out;
  auto emit = [&](const char* series, const Histogram& hist) {
    for (std::size_t b = 0; b < hist.probabilities.size(); ++b) {
      out += fmt::format("{}\t{}\t{}\t{:.10g}\t{:.10g}\t{:.10g}\n", component, series, b,
                         hist.bin_edges[b], hist.bin_edges[b + 1], hist.probabilities[b]);
    }
  };
  emit(truth_name, h.truth);
  emit(pred_name, h.pred);
  return out;
}

template <typename T>
std::vector<T> tail(const std::vector<T>& v, std::size_t from) {
  return std::vector<T>(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
}

}  // namespace detail

/// File name -> contents for one seed's artifact directory.
inline std::map<std::string, std::string> seed_artifacts(const SeedRun& run,
                                                         const PreparedData& data,
                                                         const ExperimentConfig& cfg) {
  std::map<std::string, std::string> files;
  files["model.bin"] = encode_model(run.bundle);
  files["report.tsv"] = report_tsv({{"unseen", run.unseen}, {"all", run.all}});
  nlohmann::ordered_json rep;
  rep["seed"] = run.seed;
  rep["unseen"] = report_json(run.unseen);
  rep["all"] = report_json(run.all);
  files["report.json"] = rep.dump(2) + "\n";
  files["report.txt"] = report_text(run.unseen, fmt::format("{} seed {} unseen split",
                                                            target_name(data.target), run.seed)) +
                        "\n" +
                        report_text(run.all, fmt::format("{} seed {} all rows",
                                                         target_name(data.target), run.seed));

  const std::size_t n_train = data.split.train.size();
  const auto& s = run.series_all;
  std::string cal = fmt::format("index\tsplit\ttime\ttruth\tprediction\n");
  std::string rec = "index\tsplit\ttime";
  for (auto c : kInputColumns) rec += fmt::format("\t{} truth\t{} recon", c, c);
  rec += "\n";
  for (std::size_t i = 0; i < data.frame.size(); ++i) {
    const char* split = i < n_train ? "train" : "unseen";
    const auto ts = detail::timestamp_text(data.frame[i].timestamp);
    cal += fmt::format("{}\t{}\t{}\t{:.10g}\t{:.10g}\n", i, split, ts, s.truth_y[i], s.pred_y[i]);
    rec += fmt::format("{}\t{}\t{}", i, split, ts);
    for (std::size_t c = 0; c < 4; ++c) {
      rec += fmt::format("\t{:.10g}\t{:.10g}", s.truth_x[c][i], s.recon_x[c][i]);
    }
    rec += "\n";
  }
  files["calibration_series.tsv"] = std::move(cal);
  files["reconstruction_series.tsv"] = std::move(rec);

  std::string hist = "component\tseries\tbin\tlower\tupper\tprobability\n";
  hist += detail::histogram_rows(
      std::string(target_column(data.target)),
      pair_histograms(detail::tail(s.truth_y, n_train), detail::tail(s.pred_y, n_train), cfg.hist),
      "truth", "prediction");
  for (std::size_t c = 0; c < 4; ++c) {
    hist += detail::histogram_rows(
        std::string(kInputColumns[c]),
        pair_histograms(detail::tail(s.truth_x[c], n_train), detail::tail(s.recon_x[c], n_train),
                        cfg.hist),
        "input", "reconstruction");
  }
  files["histograms.tsv"] = std::move(hist);

  std::string curve = "epoch\ttotal\trecon\tcal\tkld\n";
  for (std::size_t e = 0; e < run.loss_curve.size(); ++e) {
    const auto& l = run.loss_curve[e];
    curve += fmt::format("{}\t{:.10g}\t{:.10g}\t{:.10g}\t{:.10g}\n", e + 1, l.total, l.recon,
                         l.cal, l.kld);
  }
  files["loss_curve.tsv"] = std::move(curve);

  const auto corr = correlation_matrix(data.frame);
  std::string ct = "column";
  for (const auto& n : corr.names) ct += "\t" + n;
  ct += "\n";
  for (std::size_t i = 0; i < corr.names.size(); ++i) {
    ct += corr.names[i];
    for (double v : corr.values[i]) ct += fmt::format("\t{:.10g}", v);
    ct += "\n";
  }
  files["correlation.tsv"] = std::move(ct);

  nlohmann::ordered_json manifest;
  manifest["config"] = config_json(cfg);
  manifest["seed"] = run.seed;
  manifest["rows"] = {{"complete", data.frame.size()},
                      {"train", data.split.train.size()},
                      {"unseen", data.split.eval.size()}};
  manifest["files"] = nlohmann::ordered_json::object();
  for (const auto& [name, body] : files) {
    manifest["files"][name] = {{"bytes", body.size()}, {"crc32", detail::crc32_of(body)}};
  }
  files["manifest.json"] = manifest.dump(2) + "\n";
  return files;
}

/// Writes every file into a staging directory, then swaps it into place so
/// a failed run never leaves a partial artifact set behind.
inline void write_directory_atomic(const std::filesystem::path& dir,
                                   const std::map<std::string, std::string>& files) {
  namespace fs = std::filesystem;
  auto staging = dir;
  staging += ".partial";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    for (const auto& [name, body] : files) {
      std::ofstream out(staging / name, std::ios::binary | std::ios::trunc);
      out.write(body.data(), static_cast<std::streamsize>(body.size()));
      if (!out) throw Error("write failed: " + (staging / name).string());
    }
    fs::remove_all(dir);
    fs::rename(staging, dir);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
}

struct ExperimentResult {
  std::vector<SeedRun> runs;
  SeedSummary summary;
};

inline std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg) {
  if (cfg.seed_count == 0) throw SchemaError("seed_count must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < cfg.seed_count; ++k) seeds.push_back(cfg.seed + k);
  return seeds;
}

/// All seeds for one target, in memory.
inline ExperimentResult run_seeds(const PreparedData& data, const ExperimentConfig& cfg) {
  ExperimentResult r;
  std::vector<EvalReport> unseen;
  const auto seeds = seed_list(cfg);
  for (auto seed : seeds) {
    r.runs.push_back(run_seed(data, cfg, seed));
    unseen.push_back(r.runs.back().unseen);
  }
  r.summary = summarize(data.target, seeds, unseen);
  return r;
}

inline std::filesystem::path target_dir(const ExperimentConfig& cfg) {
  return cfg.out_dir / std::string(target_name(cfg.target));
}

inline void write_experiment(const ExperimentResult& r, const PreparedData& data,
                             const ExperimentConfig& cfg) {
  const auto dir = target_dir(cfg);
  std::map<std::string, std::string> top;
  top["summary.tsv"] = summary_tsv(r.summary);
  top["summary.json"] = summary_json(r.summary).dump(2) + "\n";
  top["summary.txt"] = summary_text(r.summary);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto staging = dir;
  staging += ".partial";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    for (const auto& run : r.runs) {
      write_directory_atomic(staging / fmt::format("seed_{}", run.seed),
                             seed_artifacts(run, data, cfg));
    }
    for (const auto& [name, body] : top) write_file_atomic(staging / name, body);
    fs::remove_all(dir);
    fs::rename(staging, dir);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
}

/// Loads, trains every seed, writes <out>/<target>/.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  auto data = prepare(load_frame(cfg.dataset_path), cfg.target, cfg.train_count);
  auto result = run_seeds(data, cfg);
  write_experiment(result, data, cfg);
  return result;
}

struct RunAllResult {
  std::vector<std::pair<Target, SeedSummary>> summaries;
  std::vector<std::pair<Target, std::string>> failures;
};

inline std::string combined_summary_tsv(const std::vector<std::pair<Target, SeedSummary>>& all,
                                        bool calibration) {
  std::string out = summary_tsv_header();
  for (const auto& [t, s] : all) {
    if (calibration) {
      out += summary_tsv_row(s, s.calibration, true);
    } else {
      for (const auto& row : s.reconstruction) out += summary_tsv_row(s, row, false);
    }
  }
  return out;
}

/// Every target in CO, NMHC, NOx, NO2 order. A failing target is recorded
/// and the rest still run.
inline RunAllResult run_all(const ExperimentConfig& base) {
  RunAllResult out;
  std::optional<SensorFrame> frame;
  std::string load_error;
  try {
    frame = load_frame(base.dataset_path);
  } catch (const std::exception& e) {
    load_error = e.what();
  }
  for (Target t : kAllTargets) {
    auto cfg = base;
    cfg.target = t;
    try {
      if (!frame) throw Error(load_error);
      auto data = prepare(*frame, t, cfg.train_count);
      auto result = run_seeds(data, cfg);
      write_experiment(result, data, cfg);
      out.summaries.emplace_back(t, std::move(result.summary));
    } catch (const std::exception& e) {
      out.failures.emplace_back(t, e.what());
    }
  }
  if (!out.summaries.empty()) {
    std::filesystem::create_directories(base.out_dir);
    write_file_atomic(base.out_dir / "summary.tsv", combined_summary_tsv(out.summaries, true));
    write_file_atomic(base.out_dir / "summary_reconstruction.tsv",
                      combined_summary_tsv(out.summaries, false));
  }
  return out;
}

}  // namespace vaecal
