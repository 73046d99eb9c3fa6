#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gcm/env/environment.hpp"
#include "gcm/rl/policy.hpp"

namespace gcm::rl {

// One episode, or the truncated prefix of one when the step budget ran out.
struct Trajectory {
  int episode_id = 0;
  std::uint64_t env_seed = 0;
  std::vector<Observation> observations;
  std::vector<int> actions;
  std::vector<float> log_probs;  // behavior policy
  std::vector<float> logits;     // behavior logits, row-major [T x A]
  std::vector<float> values;
  std::vector<float> rewards;
  std::vector<bool> dones;
  // V of the state following the last step; 0 when the episode terminated.
  float bootstrap_value = 0.0f;

  std::size_t size() const { return actions.size(); }
  bool terminated() const { return !dones.empty() && dones.back(); }
  double episode_return() const;
};

// Samples a from softmax(logits) by inverse CDF on one uniform draw.
int sample_action(std::span<const float> logits, Rng& rng);
int greedy_action(std::span<const float> logits);
// log softmax(logits)[action], computed exactly as the training loss does.
float action_log_prob(std::span<const float> logits, int action);

// Collects exactly `total_steps` environment steps from fresh episodes. The
// final episode is cut short when the budget runs out and then carries a
// bootstrap value.
std::vector<Trajectory> collect_rollouts(const PolicyModel& model, const env::EnvFactory& factory,
                                         std::size_t total_steps, std::uint64_t seed);

struct EvalResult {
  std::optional<double> mean_return;
  std::vector<double> returns;
};

EvalResult evaluate(const PolicyModel& model, const env::EnvFactory& factory, std::size_t episodes,
                    std::uint64_t seed, bool greedy);

}  // namespace gcm::rl
