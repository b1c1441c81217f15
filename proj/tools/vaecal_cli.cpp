// vaecal: train, evaluate and reproduce the calibration VAE experiments.
//
//   vaecal run      --dataset AirQualityUCI.csv --target CO
//   vaecal run-all  --dataset AirQualityUCI.csv --out runs
//   vaecal eval     --model runs/CO/seed_1/model.bin --dataset AirQualityUCI.csv
//
// The dataset path falls back to $VAECAL_DATASET. A TOML/INI file passed with
// --config supplies values for any flag not given on the command line.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vaecal/vaecal.hpp"

namespace {

void add_training_flags(CLI::App* cmd, vaecal::ExperimentConfig& cfg, bool& no_noise) {
  cmd->add_option("--dataset", cfg.dataset_path, "Semicolon-delimited hourly air-quality CSV")
      ->envname("VAECAL_DATASET")
      ->required();
  cmd->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--train-count", cfg.train_count, "Leading rows used for training")
      ->capture_default_str();
  cmd->add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
  cmd->add_option("--epochs", cfg.train.epochs)->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "First seed")->capture_default_str();
  cmd->add_option("--seeds", cfg.seed_count, "Number of consecutive seeds")->capture_default_str();
  cmd->add_option("--alpha", cfg.train.weights.alpha, "Reconstruction loss weight")
      ->capture_default_str();
  cmd->add_option("--beta", cfg.train.weights.beta, "Calibration loss weight")
      ->capture_default_str();
  cmd->add_option("--gamma", cfg.train.weights.gamma, "Latent KL loss weight")
      ->capture_default_str();
  cmd->add_option("--lr", cfg.train.adam.learning_rate)->capture_default_str();
  cmd->add_option("--adam-beta1", cfg.train.adam.beta1)->capture_default_str();
  cmd->add_option("--adam-beta2", cfg.train.adam.beta2)->capture_default_str();
  cmd->add_option("--adam-eps", cfg.train.adam.eps)->capture_default_str();
  cmd->add_flag("--no-noise", no_noise, "Hold the latent noise at zero during training");
  cmd->add_option("--bins", cfg.hist.bins, "Histogram bins for KL/JS")->capture_default_str();
  cmd->add_option("--smoothing", cfg.hist.smoothing, "Per-bin histogram smoothing")
      ->capture_default_str();
}

const std::map<std::string, vaecal::Target> kTargetMap = {{"CO", vaecal::Target::CO},
                                                          {"NMHC", vaecal::Target::NMHC},
                                                          {"NOx", vaecal::Target::NOx},
                                                          {"NO2", vaecal::Target::NO2}};

int cmd_run(vaecal::ExperimentConfig cfg) {
  auto result = vaecal::run_experiment(cfg);
  std::cout << vaecal::summary_text(result.summary);
  std::cout << "artifacts: " << vaecal::target_dir(cfg).string() << "\n";
  return 0;
}

int cmd_run_all(const vaecal::ExperimentConfig& cfg) {
  auto result = vaecal::run_all(cfg);
  for (const auto& [t, s] : result.summaries) std::cout << vaecal::summary_text(s) << "\n";
  for (const auto& [t, msg] : result.failures) {
    std::cerr << "error: target " << vaecal::target_name(t) << ": " << msg << "\n";
  }
  if (!result.summaries.empty()) {
    std::cout << "summary: " << (cfg.out_dir / "summary.tsv").string() << "\n";
  }
  return result.failures.empty() ? 0 : 1;
}

int cmd_eval(const std::filesystem::path& model_path, const vaecal::ExperimentConfig& cfg,
             const std::filesystem::path& out) {
  auto bundle = vaecal::load_model(model_path);
  auto frame = vaecal::load_frame(cfg.dataset_path);
  auto split = vaecal::split_train_eval(frame, cfg.train_count);
  auto unseen = vaecal::evaluate(bundle.model, bundle.inputs, bundle.target_norm, split.eval,
                                 bundle.target, cfg.hist);
  auto all = vaecal::evaluate(bundle.model, bundle.inputs, bundle.target_norm, frame,
                              bundle.target, cfg.hist);
  std::cout << vaecal::report_text(unseen, fmt::format("{} (seed {}) unseen split",
                                                      vaecal::target_name(bundle.target),
                                                      bundle.seed))
            << "\n"
            << vaecal::report_text(all, "all rows");
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    vaecal::write_file_atomic(out / "report.tsv", vaecal::report_tsv({{"unseen", unseen}, {"all", all}}));
    nlohmann::ordered_json j;
    j["seed"] = bundle.seed;
    j["unseen"] = vaecal::report_json(unseen);
    j["all"] = vaecal::report_json(all);
    vaecal::write_file_atomic(out / "report.json", j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration VAE experiment runner"};
  app.set_config("--config", "", "TOML/INI file with flag values");
  app.require_subcommand(1);

  vaecal::ExperimentConfig run_cfg;
  bool run_no_noise = false;
  auto* run = app.add_subcommand("run", "Train and evaluate one target over several seeds");
  add_training_flags(run, run_cfg, run_no_noise);
  run->add_option("--target", run_cfg.target, "CO, NMHC, NOx or NO2")
      ->transform(CLI::CheckedTransformer(kTargetMap, CLI::ignore_case))
      ->capture_default_str();

  vaecal::ExperimentConfig all_cfg;
  bool all_no_noise = false;
  auto* run_all = app.add_subcommand("run-all", "Run every target with shared settings");
  add_training_flags(run_all, all_cfg, all_no_noise);

  vaecal::ExperimentConfig eval_cfg;
  std::filesystem::path model_path;
  std::filesystem::path eval_out;
  auto* eval = app.add_subcommand("eval", "Score a saved model on a dataset");
  eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", eval_cfg.dataset_path)->envname("VAECAL_DATASET")->required();
  eval->add_option("--train-count", eval_cfg.train_count)->capture_default_str();
  eval->add_option("--bins", eval_cfg.hist.bins)->capture_default_str();
  eval->add_option("--smoothing", eval_cfg.hist.smoothing)->capture_default_str();
  eval->add_option("--out", eval_out, "Write report.tsv and report.json here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      run_cfg.train.sample_noise = !run_no_noise;
      return cmd_run(run_cfg);
    }
    if (*run_all) {
      all_cfg.train.sample_noise = !all_no_noise;
      return cmd_run_all(all_cfg);
    }
    if (*eval) return cmd_eval(model_path, eval_cfg, eval_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
