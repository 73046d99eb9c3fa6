#pragma once

// Experiment configuration, read from a strict YAML document:
//
//   name: cartpole-gcm
//   preset: cartpole-ppo-gcm32      # optional, fills every other key
//   env: {kind: cartpole}
//   memory:
//     kind: gcm
//     hidden: 32
//     prior: or(temporal(1), temporal(2))
//   trainer: {algorithm: ppo, learning_rate: 5e-5}
//   seeds: [0, 1, 2]
//   total_env_steps: 1500000
//
// Unknown keys are errors. Explicit keys override the preset.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gcm/env/environment.hpp"
#include "gcm/rl/policy.hpp"
#include "gcm/rl/trainers.hpp"

namespace gcm::harness {

struct EnvSpec {
  std::string kind = "cartpole";  // cartpole | cardgame
  int n = 8;
  int episode_limit = 30;

  bool operator==(const EnvSpec&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvSpec env;
  rl::MemorySpec memory;
  rl::TrainConfig trainer;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::uint64_t total_env_steps = 1'500'000;
  std::size_t checkpoint_every = 25;
  std::string output_dir = "runs";

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Card-game episode limit for n: 50/75/100 at n = 16/20/24, otherwise 30.
int default_episode_limit(int n);

// cartpole-ppo-{gcm,mlp,lstm}<z> and cardgame<n>-a2c-{gcm,mlp,lstm}<z>.
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_examples();

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Fully resolved document; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

env::EnvFactory make_env_factory(const EnvSpec& spec);

struct ParamCountRow {
  std::string kind;
  std::size_t hidden = 0;
  std::int64_t memory = 0;
  std::int64_t heads = 0;
  std::int64_t total = 0;
};

// Every memory kind at each |z| for the configured environment, heads included.
std::vector<ParamCountRow> count_params(const ExperimentConfig& config,
                                        std::vector<std::size_t> hidden_sizes = {8, 16, 32});
std::string format_param_table(const std::vector<ParamCountRow>& rows);

}  // namespace gcm::harness
