// Acceptance suite. Prints one line per criterion:
//
//   C<n> <name>: PASS|FAIL|BLOCKED  <detail> (<seconds> s)
//
// Exit status: 1 if any criterion failed, 77 if none failed but at least one
// was blocked (ctest treats 77 as skipped), 0 otherwise.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "support/oracle.hpp"
#include "support/synthetic.hpp"
#include "vaecal/vaecal.hpp"

#ifndef VAECAL_DEFAULT_DATASET
#define VAECAL_DEFAULT_DATASET "data/AirQualityUCI.csv"
#endif

namespace fs = std::filesystem;
using namespace vaecal;

namespace {

enum class Status { pass, fail, blocked };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome blocked(std::string d) { return {Status::blocked, std::move(d)}; }
Outcome check(bool ok, std::string d) { return {ok ? Status::pass : Status::fail, std::move(d)}; }

using Clock = std::chrono::steady_clock;

double relative_roundtrip(const Normalizer& n, std::size_t col, double x) {
  return std::abs(n.invert(col, n.apply(col, x)) - x) / std::max(1.0, std::abs(x));
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Suite {
 public:
  explicit Suite(std::optional<fs::path> dataset) : dataset_(std::move(dataset)) {}

  Outcome dataset_fidelity() {
    if (!dataset_) return blocked(missing());
    const auto t0 = Clock::now();
    const auto frame = load_frame(*dataset_);
    const double dt = seconds_since(t0);
    return check(frame.size() == 827 && dt < 1.0,
                 fmt::format("{} complete rows (need exactly 827), load {:.3f} s (limit 1 s)",
                             frame.size(), dt));
  }

  Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checked = 0;
    std::string where;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      for (double gamma : {0.0, 1.0}) {
        auto model = initial_model(seed);
        std::mt19937_64 rng(seed * 7919);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> n01;
        // Glorot init has zero biases; perturb them so every bias gradient is exercised.
        for (auto& l : model.parameters().layers) {
          for (double& b : l.biases) b = 0.2 * (u(rng) - 0.5);
        }
        std::vector<double> x{u(rng), u(rng), u(rng), u(rng)};
        const double y = u(rng);
        const double eps = n01(rng);
        auto r = fixtures::gradient_check(model, x, y, eps, {1.0, 1.0, gamma});
        checked += r.checked;
        if (r.worst_relative > worst) {
          worst = r.worst_relative;
          where = fmt::format("seed {} gamma {} block {} index {}", seed, gamma, r.worst_block,
                              r.worst_index);
        }
      }
    }
    const double dt = seconds_since(t0);
    return check(worst < 1e-5 && dt < 10.0,
                 fmt::format("{} parameter checks, worst relative error {:.3g} (limit 1e-05{}), "
                             "{:.3f} s (limit 10 s)",
                             checked, worst, where.empty() ? "" : ", at " + where, dt));
  }

  Outcome co_reproduction() {
    if (!dataset_) return blocked(missing());
    const auto& co = experiment(Target::CO);
    const auto& cal = co.result.summary.calibration;
    const double mae = cal.metrics[0].median;
    const double r2 = cal.metrics[2].median;
    return check(mae >= 0.20 && mae <= 0.45 && r2 >= 0.85 && co.seconds < 120.0,
                 fmt::format("median MAE {:.4f} (need [0.20, 0.45]), median R2 {:.4f} (need >= 0.85), "
                             "{} seeds, {:.1f} s (limit 120 s)",
                             mae, r2, co.result.runs.size(), co.seconds));
  }

  Outcome reconstruction_quality() {
    if (!dataset_) return blocked(missing());
    bool ok = true;
    std::string detail;
    for (Target t : kAllTargets) {
      const auto& s = experiment(t).result.summary;
      for (const auto& row : s.reconstruction) {
        const double r2 = row.metrics[2].median;
        ok = ok && r2 >= 0.75;
        detail += fmt::format("{}:{}={:.3f} ", target_name(t), row.label, r2);
      }
    }
    return check(ok, "median reconstruction R2 (need >= 0.75) " + detail);
  }

  Outcome qualitative_orderings() {
    if (!dataset_) return blocked(missing());
    std::map<Target, const SeedSummary*> s;
    for (Target t : kAllTargets) s[t] = &experiment(t).result.summary;
    auto med = [&](Target t, std::size_t k) { return s[t]->calibration.metrics[k].median; };
    bool worst_r2 = true, worst_acc = true;
    for (Target t : kAllTargets) {
      if (t == Target::NMHC) continue;
      worst_r2 = worst_r2 && med(Target::NMHC, 2) < med(t, 2);
      worst_acc = worst_acc && med(Target::NMHC, 1) < med(t, 1);
    }
    const double ratio = med(Target::NMHC, 3) / med(Target::CO, 3);
    std::string detail = "median calibration R2/accuracy/KLD:";
    for (Target t : kAllTargets) {
      detail += fmt::format(" {}={:.3f}/{:.1f}/{:.4g}", target_name(t), med(t, 2), med(t, 1), med(t, 3));
    }
    detail += fmt::format("; NMHC/CO KLD ratio {:.2f} (need >= 3)", ratio);
    if (!worst_r2) detail += "; NMHC not worst by R2";
    if (!worst_acc) detail += "; NMHC not worst by accuracy";
    return check(worst_r2 && worst_acc && ratio >= 3.0, detail);
  }

  Outcome metric_identities() {
    const auto t0 = Clock::now();
    std::vector<std::string> broken;
    auto expect = [&](bool ok, const char* what) {
      if (!ok) broken.emplace_back(what);
    };
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.05, 10.0);
    std::normal_distribution<double> n01;
    auto vec = [&](std::size_t n) {
      std::vector<double> v(n);
      for (double& x : v) x = u(rng);
      return v;
    };
    const HistogramSettings hs;
    for (int trial = 0; trial < 200; ++trial) {
      auto a = vec(64);
      auto b = vec(64);
      expect(r_squared(a, a) == 1.0, "r2(x,x) = 1");
      expect(accuracy_pct(a, a) == 100.0, "accuracy(x,x) = 100");
      expect(mae(a, a) == 0.0, "mae(x,x) = 0");
      const auto same = pair_histograms(a, a, hs);
      expect(kl_divergence(same.pred, same.truth) == 0.0, "KLD = 0 for equal histograms");
      const auto h = pair_histograms(a, b, hs);
      const double kl = kl_divergence(h.pred, h.truth);
      expect(kl >= 0.0, "KLD >= 0");
      expect(h.pred.probabilities == h.truth.probabilities || kl > 0.0,
             "KLD > 0 for differing histograms");
      const double js = js_divergence(h.pred, h.truth);
      expect(js == js_divergence(h.truth, h.pred), "JSD symmetric");
      expect(js >= 0.0 && js <= std::log(2.0), "JSD within [0, ln 2]");
    }
    {
      std::vector<SensorRow> rows;
      for (int i = 0; i < 100; ++i) {
        SensorRow r;
        for (double& v : r.inputs) v = 500.0 + 2000.0 * u(rng);
        for (double& v : r.targets) v = 0.1 + 100.0 * u(rng);
        rows.push_back(r);
      }
      const SensorFrame frame(std::move(rows));
      std::vector<std::string> cols = frame.column_names();
      const auto norm = Normalizer::fit(frame, cols);
      double worst = 0.0;
      for (const auto& row : frame.rows()) {
        for (std::size_t c = 0; c < 4; ++c) {
          worst = std::max(worst, relative_roundtrip(norm, c, row.inputs[c]));
          worst = std::max(worst, relative_roundtrip(norm, 4 + c, row.targets[c]));
        }
      }
      expect(worst <= 1e-12, "normalization roundtrip <= 1e-12 relative");
    }
    {
      auto model = initial_model(5);
      const auto before = model;
      GradientTape zero(model);
      AdamState state;
      for (int i = 0; i < 10; ++i) adam_step(state, model.parameters(), zero);
      expect(model == before, "Adam zero-gradient fixed point");
    }
    for (int i = 0; i < 1000; ++i) {
      auto model = initial_model(100 + i);
      for (auto& l : model.parameters().layers) {
        for (double& b : l.biases) b = 0.5 * n01(rng);
      }
      std::vector<double> x{u(rng) / 10, u(rng) / 10, u(rng) / 10, u(rng) / 10};
      const double eps = n01(rng);
      const auto t = forward(model, x, eps);
      expect(std::abs((t.z - t.mu) - std::exp(0.5 * t.logvar) * eps) <= 1e-15,
             "reparameterization to 1e-15");
      expect(latent_kld(t.mu, t.logvar) >= 0.0, "latent KLD >= 0");
    }
    {
      TrainingSet data;
      for (int i = 0; i < 48; ++i) {
        const double g = u(rng) / 10.0;
        data.x.push_back({g, 1.0 - g, 0.5 * g, 0.3 + 0.2 * g});
        data.y.push_back(g);
      }
      TrainSettings ts;
      ts.epochs = 20;
      ts.sample_noise = false;
      ts.weights.gamma = 0.0;
      const auto r = train(data, ts, 9);
      expect(r.model.layer(LayerId::logvar_head) == initial_model(9).layer(LayerId::logvar_head),
             "logvar head frozen with gamma = 0 and no noise");
    }
    const double dt = seconds_since(t0);
    std::string detail = broken.empty() ? "all identities hold" : "violated:";
    for (const auto& b : broken) {
      if (detail.find(b) == std::string::npos) detail += " [" + b + "]";
    }
    return check(broken.empty() && dt < 5.0, fmt::format("{}, {:.3f} s (limit 5 s)", detail, dt));
  }

  Outcome determinism() {
    const auto src = source();
    const auto t0 = Clock::now();
    const auto root = fs::temp_directory_path() / fmt::format("vaecal_acceptance_{}", ::getpid());
    fs::remove_all(root);
    ExperimentConfig cfg;
    cfg.dataset_path = src.path;
    cfg.seed_count = 1;
    cfg.seed = 42;
    std::vector<std::map<std::string, std::string>> outputs;
    for (const char* name : {"a", "b"}) {
      cfg.out_dir = root / name;
      run_experiment(cfg);
      std::map<std::string, std::string> files;
      for (const auto& e : fs::recursive_directory_iterator(cfg.out_dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), cfg.out_dir).string()] = read_file(e.path());
      }
      outputs.push_back(std::move(files));
    }
    fs::remove_all(root);
    const double dt = seconds_since(t0);
    const bool same = outputs[0] == outputs[1];
    const bool has_model = outputs[0].count("CO/seed_42/model.bin") == 1 &&
                           outputs[0].count("CO/seed_42/report.tsv") == 1;
    return check(same && has_model && dt < 120.0,
                 fmt::format("{} files {} across two runs on {}, {:.1f} s (limit 120 s)",
                             outputs[0].size(), same ? "byte-identical" : "DIFFER", src.label, dt));
  }

  Outcome comparison_constant() {
    const auto src = source();
    ExperimentConfig cfg;
    cfg.dataset_path = src.path;
    cfg.seed_count = 1;
    auto data = prepare(load_frame(src.path), Target::CO, cfg.train_count);
    auto run = run_seed(data, cfg, cfg.seed);
    const auto text = report_text(run.unseen, "CO");
    const auto expected = fmt::format("reference: DeepCM CO(GT) MAE 0.288; achieved {:.3f}",
                                      run.unseen.calibration.mae);
    const bool printed = text.find(expected) != std::string::npos;
    const auto json = report_json(run.unseen);
    const bool in_json = json.contains("reference_mae_deepcm") &&
                         json["reference_mae_deepcm"].get<double>() == 0.288;
    const bool bracket = 0.20 <= kDeepCmCoMae && kDeepCmCoMae <= 0.45;
    return check(printed && in_json && bracket,
                 fmt::format("report line \"{}\" {}; MAE bracket [0.20, 0.45] {} 0.288 ({})", expected,
                             printed ? "present" : "MISSING", bracket ? "contains" : "EXCLUDES",
                             src.label));
  }

 private:
  struct TimedExperiment {
    ExperimentResult result;
    double seconds = 0.0;
  };

  struct Source {
    fs::path path;
    std::string label;
  };

  std::string missing() const {
    return "dataset not found (pass --dataset, set VAECAL_DATASET, or place it at " +
           std::string(VAECAL_DEFAULT_DATASET) + ")";
  }

  const SensorFrame& frame() {
    if (!frame_) frame_ = load_frame(*dataset_);
    return *frame_;
  }

  const TimedExperiment& experiment(Target t) {
    auto it = experiments_.find(t);
    if (it != experiments_.end()) return it->second;
    ExperimentConfig cfg;
    cfg.dataset_path = *dataset_;
    cfg.target = t;
    const auto t0 = Clock::now();
    auto data = prepare(frame(), t, cfg.train_count);
    TimedExperiment e{run_seeds(data, cfg), 0.0};
    e.seconds = seconds_since(t0);
    return experiments_.emplace(t, std::move(e)).first->second;
  }

  // Criteria 7 and 8 test code properties; without the real dataset they
  // run on a generated file in the same layout.
  Source source() {
    if (dataset_) return {*dataset_, "the real dataset"};
    if (!synthetic_) {
      synthetic_ = fs::temp_directory_path() / fmt::format("vaecal_synthetic_{}.csv", ::getpid());
      write_file_atomic(*synthetic_, fixtures::synthetic_air_quality().text);
    }
    return {*synthetic_, "the synthetic fixture (dataset not found)"};
  }

 public:
  ~Suite() {
    if (synthetic_) fs::remove(*synthetic_);
  }

 private:
  std::optional<fs::path> dataset_;
  std::optional<fs::path> synthetic_;
  std::optional<SensorFrame> frame_;
  std::map<Target, TimedExperiment> experiments_;
};

std::optional<fs::path> resolve_dataset(const std::string& flag) {
  if (!flag.empty()) return fs::exists(flag) ? std::optional<fs::path>(flag) : std::nullopt;
  if (const char* env = std::getenv("VAECAL_DATASET"); env && *env) {
    return fs::exists(env) ? std::optional<fs::path>(env) : std::nullopt;
  }
  if (fs::exists(VAECAL_DEFAULT_DATASET)) return fs::path(VAECAL_DEFAULT_DATASET);
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the calibration VAE"};
  std::vector<int> selected;
  std::string dataset;
  app.add_option("--criterion", selected, "Run only these criteria (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--dataset", dataset, "Air-quality CSV; falls back to VAECAL_DATASET");
  CLI11_PARSE(app, argc, argv);

  Suite suite(resolve_dataset(dataset));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"dataset fidelity", [&] { return suite.dataset_fidelity(); }},
      {"gradient correctness", [&] { return suite.gradient_correctness(); }},
      {"CO reproduction", [&] { return suite.co_reproduction(); }},
      {"reconstruction quality", [&] { return suite.reconstruction_quality(); }},
      {"qualitative orderings", [&] { return suite.qualitative_orderings(); }},
      {"metric identities", [&] { return suite.metric_identities(); }},
      {"determinism", [&] { return suite.determinism(); }},
      {"comparison constant", [&] { return suite.comparison_constant(); }},
  };
  if (selected.empty()) {
    for (int i = 1; i <= 8; ++i) selected.push_back(i);
  }

  int failed = 0, blocked_count = 0;
  for (int n : selected) {
    const auto& [name, run] = criteria[static_cast<std::size_t>(n - 1)];
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = fail(std::string("error: ") + e.what());
    }
    const char* label = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "BLOCKED";
    fmt::print("C{} {}: {}  {} ({:.2f} s)\n", n, name, label, o.detail, seconds_since(t0));
    failed += o.status == Status::fail;
    blocked_count += o.status == Status::blocked;
  }
  std::cout.flush();
  if (failed) return 1;
  return blocked_count ? 77 : 0;
}
