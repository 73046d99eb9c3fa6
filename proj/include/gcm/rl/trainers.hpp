#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "gcm/rl/losses.hpp"
#include "gcm/rl/policy.hpp"
#include "gcm/rl/rollout.hpp"

namespace gcm::rl {

enum class Algorithm { kPpo, kA2c };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

struct TrainConfig {
  Algorithm algorithm = Algorithm::kPpo;
  double gamma = 0.99;
  double lambda = 1.0;
  double vf_coeff = 1e-5;
  double entropy_coeff = 0.0;
  double grad_clip = 40.0;
  double learning_rate = 5e-5;
  std::size_t batch_size = 5000;
  std::size_t minibatch_size = 128;
  std::size_t sgd_iters = 35;
  double ppo_clip = 0.3;
  double vf_clip = 10.0;
  double kl_target = 0.01;
  double kl_coeff = 0.2;
  bool normalize_advantages = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Default hyperparameters: PPO for cartpole, A2C for the card game.
TrainConfig ppo_defaults();
TrainConfig a2c_defaults();

struct UpdateMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
};

// Flattened targets of every trajectory, in trajectory order.
std::vector<BatchTargets> build_targets(const std::vector<Trajectory>& trajectories,
                                        const TrainConfig& config, int num_actions);

class Trainer {
 public:
  Trainer(PolicyModel& model, TrainConfig config, std::uint64_t seed);

  const TrainConfig& config() const { return config_; }
  double kl_coeff() const { return kl_coeff_; }

  // One update phase on a collected batch; throws ContractError when empty.
  UpdateMetrics update(const std::vector<Trajectory>& trajectories);

 private:
  UpdateMetrics ppo_update(const std::vector<Trajectory>& trajectories);
  UpdateMetrics a2c_update(const std::vector<Trajectory>& trajectories);

  PolicyModel& model_;
  TrainConfig config_;
  OptimizerConfig optimizer_;
  double kl_coeff_;
  Rng rng_;
};

}  // namespace gcm::rl
