#include "gcm/rl/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gcm/errors.hpp"

namespace gcm::rl {

double Trajectory::episode_return() const {
  double total = 0.0;
  for (float r : rewards) total += r;
  return total;
}

int sample_action(std::span<const float> logits, Rng& rng) {
  if (logits.empty()) throw ContractError("sample_action: no logits");
  const float top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> weights(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp(static_cast<double>(logits[i]) - top);
    total += weights[i];
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

int greedy_action(std::span<const float> logits) {
  if (logits.empty()) throw ContractError("greedy_action: no logits");
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

float action_log_prob(std::span<const float> logits, int action) {
  NoGradScope no_grad;
  Tensor lp = log_softmax(Tensor::from({1, logits.size()}, {logits.begin(), logits.end()}));
  return lp.at(0, static_cast<std::size_t>(action));
}

std::vector<Trajectory> collect_rollouts(const PolicyModel& model, const env::EnvFactory& factory,
                                         std::size_t total_steps, std::uint64_t seed) {
  std::vector<Trajectory> out;
  if (total_steps == 0) return out;
  auto env = factory();
  Rng rng(seed);
  std::size_t steps = 0;
  while (steps < total_steps) {
    Trajectory traj;
    traj.episode_id = static_cast<int>(out.size());
    traj.env_seed = rng();
    auto result = env->reset(traj.env_seed);
    ModuleState state = model.initial_state();
    while (true) {
      auto act = model.act(result.observation, state);
      const int action = sample_action(act.logits, rng);
      traj.observations.push_back(std::move(result.observation));
      traj.actions.push_back(action);
      traj.log_probs.push_back(action_log_prob(act.logits, action));
      traj.logits.insert(traj.logits.end(), act.logits.begin(), act.logits.end());
      traj.values.push_back(act.value);
      result = env->step(action);
      if (!std::isfinite(result.reward)) throw NumericError("environment emitted a non-finite reward");
      traj.rewards.push_back(result.reward);
      traj.dones.push_back(result.done);
      ++steps;
      if (result.done) break;
      if (steps == total_steps) {
        ModuleState probe = state;
        traj.bootstrap_value = model.act(result.observation, probe).value;
        break;
      }
    }
    out.push_back(std::move(traj));
  }
  return out;
}

EvalResult evaluate(const PolicyModel& model, const env::EnvFactory& factory, std::size_t episodes,
                    std::uint64_t seed, bool greedy) {
  EvalResult out;
  if (episodes == 0) return out;
  auto env = factory();
  Rng rng(seed);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto result = env->reset(rng());
    ModuleState state = model.initial_state();
    double total = 0.0;
    while (true) {
      auto act = model.act(result.observation, state);
      const int action = greedy ? greedy_action(act.logits) : sample_action(act.logits, rng);
      result = env->step(action);
      total += result.reward;
      if (result.done) break;
    }
    out.returns.push_back(total);
  }
  out.mean_return =
      std::accumulate(out.returns.begin(), out.returns.end(), 0.0) / static_cast<double>(episodes);
  return out;
}

}  // namespace gcm::rl
