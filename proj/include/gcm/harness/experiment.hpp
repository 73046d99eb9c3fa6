#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gcm/harness/config.hpp"

namespace gcm::harness {

// Raised when a run cannot finish: I/O failure or divergence.
struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kMetricsHeader =
    "iteration,env_steps,episodes,mean_return,min_return,max_return,policy_loss,value_loss,"
    "entropy,kl,grad_norm,wall_clock_s";
inline constexpr const char* kManifestName = "manifest.json";

struct SeedOutput {
  std::uint64_t seed = 0;
  std::filesystem::path metrics;
  std::filesystem::path checkpoint;
};

struct RunManifest {
  std::string name;
  std::string code_version;
  std::string config;  // serialize_config() snapshot
  std::string status;  // incomplete | complete
  std::filesystem::path directory;
  std::vector<SeedOutput> seeds;
};

struct RunOptions {
  // Replaces the configured seed list.
  std::optional<std::uint64_t> seed;
  // Output root; overrides GCM_OUTPUT_ROOT and config.output_dir.
  std::optional<std::filesystem::path> output_root;
  std::ostream* log = nullptr;
};

std::string code_version();

// Output root resolution: explicit > $GCM_OUTPUT_ROOT > config.output_dir.
std::filesystem::path resolve_output_root(const ExperimentConfig& config,
                                          const std::optional<std::filesystem::path>& explicit_root);

// Writes <root>/<name>/manifest.json (status incomplete) before training, then
// seed_<N>.csv and seed_<N>.ckpt per seed, and marks the manifest complete.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Trains one seed, writing its CSV and checkpoint into `directory`.
SeedOutput run_seed(const ExperimentConfig& config, std::uint64_t seed,
                    const std::filesystem::path& directory, std::ostream* log = nullptr);

void write_manifest(const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& directory);

// Problems found in a run directory; empty when it holds exactly a complete
// manifest plus one CSV and one checkpoint per listed seed.
std::vector<std::string> audit_run(const std::filesystem::path& directory);

}  // namespace gcm::harness
