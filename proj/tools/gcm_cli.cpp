// gcm: run, summarize and inspect graph-memory RL experiments.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gcm/errors.hpp"
#include "gcm/harness/config.hpp"
#include "gcm/harness/experiment.hpp"
#include "gcm/harness/summary.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 2;
constexpr int kRuntimeFailure = 3;

gcm::harness::ExperimentConfig load(const std::string& arg) {
  if (!std::filesystem::exists(arg)) {
    try {
      return gcm::harness::preset(arg);
    } catch (const gcm::ConfigError&) {
      throw gcm::ConfigError(arg + ": no such file or preset");
    }
  }
  return gcm::harness::load_config(arg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph convolutional memory experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gcm::harness::code_version());

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "train every seed of a config (or preset name)");
  run->add_option("config", config_path, "config file or preset name")->required();
  run->add_option("--seed", seed, "run only this seed");
  run->add_option("--out", out_dir, "output root (overrides GCM_OUTPUT_ROOT)");
  run->add_flag("--quiet", quiet, "no per-iteration log");

  std::vector<std::string> csvs;
  std::optional<std::string> summary_out;
  auto* summarize = app.add_subcommand("summarize", "cross-seed mean and 90% t-interval");
  summarize->add_option("csv", csvs, "metric CSVs, one per seed")->required();
  summarize->add_option("-o,--output", summary_out, "write the summary CSV here");

  auto* count = app.add_subcommand("count-params", "trainable parameters per memory module");
  count->add_option("config", config_path, "config file or preset name")->required();

  auto* validate = app.add_subcommand("validate", "parse a config and print it resolved");
  validate->add_option("config", config_path, "config file or preset name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = load(config_path);
      gcm::harness::RunOptions options;
      options.seed = seed;
      if (out_dir) options.output_root = *out_dir;
      options.log = quiet ? nullptr : &std::cerr;
      auto manifest = gcm::harness::run_experiment(config, options);
      std::cout << manifest.directory.string() << "\n";
    } else if (*summarize) {
      std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
      auto rows = gcm::harness::summarize(paths);
      const std::string text = gcm::harness::summary_csv(rows);
      if (summary_out) {
        std::ofstream out(*summary_out, std::ios::binary | std::ios::trunc);
        if (!out || !(out << text)) throw std::runtime_error("cannot write " + *summary_out);
      } else {
        std::cout << text;
      }
      if (!rows.empty() && rows.front().degenerate) {
        std::cerr << "note: single seed, the confidence interval collapses to the mean\n";
      }
    } else if (*count) {
      std::cout << gcm::harness::format_param_table(gcm::harness::count_params(load(config_path)));
    } else if (*validate) {
      std::cout << gcm::harness::serialize_config(load(config_path));
    }
  } catch (const gcm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}
