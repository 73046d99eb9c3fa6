#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gcm/parameters.hpp"
#include "gcm/rl/policy.hpp"
#include "gcm/rl/rollout.hpp"

namespace gcm::rl {

struct Advantages {
  std::vector<float> advantages;
  std::vector<float> returns;
};

// delta_t = r_t + gamma V_{t+1} - V_t, with V after the last step taken from
// the bootstrap value (0 at a terminal); A_t = sum_k (gamma lambda)^k delta_{t+k}.
Advantages compute_gae(std::span<const float> rewards, std::span<const float> values,
                       float bootstrap_value, double gamma, double lambda);
Advantages compute_gae(const Trajectory& trajectory, double gamma, double lambda);

// In place: zero mean, unit (population) variance.
void normalize_advantages(std::vector<float>& advantages);

// Per-row training targets aligned with replayed belief rows.
struct BatchTargets {
  std::vector<std::size_t> actions;
  std::vector<float> old_log_probs;
  std::vector<float> old_logits;  // [n x A]
  std::vector<float> old_values;
  std::vector<float> advantages;
  std::vector<float> returns;

  std::size_t size() const { return actions.size(); }
  void append(const BatchTargets& other);
};

struct LossOutput {
  Tensor total;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
};

struct PpoCoefficients {
  float clip = 0.3f;
  float vf_clip = 10.0f;
  float vf_coeff = 1e-5f;
  float entropy_coeff = 0.0f;
  float kl_coeff = 0.2f;
};

// mean(-min(rho A, clip(rho, 1 +- eps) A)) + kl_coeff mean(KL(old || new))
//   + vf_coeff mean(max((V - R)^2, (V_old + clip(V - V_old, +-c) - R)^2))
//   - entropy_coeff mean(H).
LossOutput ppo_loss(const HeadOutput& heads, const BatchTargets& targets, const PpoCoefficients& c);

struct A2cCoefficients {
  float vf_coeff = 0.05f;
  float entropy_coeff = 0.001f;
};

// -mean(log pi(a) A) + vf_coeff mean((V - R)^2) - entropy_coeff mean(H).
LossOutput a2c_loss(const HeadOutput& heads, const BatchTargets& targets, const A2cCoefficients& c);

// x2 when kl > 2 target, x0.5 when kl < target / 2, unchanged otherwise.
double adapt_kl_coeff(double coeff, double kl, double target);

// Shuffles episodes and groups them greedily into minibatches whose step
// counts lie nearest to `target`. Every episode lands in exactly one group.
std::vector<std::vector<std::size_t>> episode_minibatches(std::span<const std::size_t> lengths,
                                                          std::size_t target, Rng& rng);

}  // namespace gcm::rl
