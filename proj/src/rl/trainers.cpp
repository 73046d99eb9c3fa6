#include "gcm/rl/trainers.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "gcm/errors.hpp"

namespace gcm::rl {

std::string_view to_string(Algorithm algorithm) {
  return algorithm == Algorithm::kPpo ? "ppo" : "a2c";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "ppo") return Algorithm::kPpo;
  if (text == "a2c") return Algorithm::kA2c;
  throw ConfigError("unknown algorithm '" + std::string(text) + "' (expected ppo or a2c)");
}

void TrainConfig::validate() const {
  const double values[] = {gamma, lambda, vf_coeff, entropy_coeff, grad_clip, learning_rate,
                           ppo_clip, vf_clip, kl_target, kl_coeff};
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("trainer: coefficients must be finite");
  }
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("trainer: gamma must lie in [0, 1]");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("trainer: lambda must lie in [0, 1]");
  if (learning_rate <= 0.0) throw ConfigError("trainer: learning rate must be positive");
  if (batch_size == 0) throw ConfigError("trainer: batch size must be positive");
  if (minibatch_size == 0) throw ConfigError("trainer: minibatch size must be positive");
  if (batch_size < minibatch_size) {
    throw ConfigError("trainer: batch size " + std::to_string(batch_size) +
                      " is smaller than minibatch size " + std::to_string(minibatch_size));
  }
  if (sgd_iters == 0) throw ConfigError("trainer: sgd_iters must be positive");
  if (ppo_clip <= 0.0) throw ConfigError("trainer: ppo clip must be positive");
  if (vf_clip <= 0.0) throw ConfigError("trainer: value clip must be positive");
  if (kl_coeff < 0.0 || kl_target < 0.0) throw ConfigError("trainer: KL terms must be >= 0");
}

TrainConfig ppo_defaults() { return TrainConfig{}; }

TrainConfig a2c_defaults() {
  TrainConfig c;
  c.algorithm = Algorithm::kA2c;
  c.gamma = 0.99;
  c.lambda = 1.0;
  c.vf_coeff = 0.05;
  c.entropy_coeff = 0.001;
  c.grad_clip = 40.0;
  c.learning_rate = 5e-4;
  c.batch_size = 2000;
  c.minibatch_size = 2000;
  c.sgd_iters = 1;
  c.kl_coeff = 0.0;
  c.normalize_advantages = false;
  return c;
}

std::vector<BatchTargets> build_targets(const std::vector<Trajectory>& trajectories,
                                        const TrainConfig& config, int num_actions) {
  std::vector<BatchTargets> out;
  out.reserve(trajectories.size());
  const auto a = static_cast<std::size_t>(num_actions);
  for (const auto& traj : trajectories) {
    if (traj.size() == 0) throw ContractError("trainer: empty trajectory");
    if (traj.logits.size() != traj.size() * a || traj.observations.size() != traj.size()) {
      throw DimensionError("trainer: trajectory fields have inconsistent lengths");
    }
    auto gae = compute_gae(traj, config.gamma, config.lambda);
    BatchTargets t;
    t.actions.assign(traj.actions.begin(), traj.actions.end());
    t.old_log_probs = traj.log_probs;
    t.old_logits = traj.logits;
    t.old_values = traj.values;
    t.advantages = std::move(gae.advantages);
    t.returns = std::move(gae.returns);
    out.push_back(std::move(t));
  }
  if (config.normalize_advantages) {
    std::vector<float> all;
    for (const auto& t : out) all.insert(all.end(), t.advantages.begin(), t.advantages.end());
    normalize_advantages(all);
    std::size_t k = 0;
    for (auto& t : out) {
      for (float& v : t.advantages) v = all[k++];
    }
  }
  return out;
}

Trainer::Trainer(PolicyModel& model, TrainConfig config, std::uint64_t seed)
    : model_(model), config_(config), kl_coeff_(config.kl_coeff), rng_(seed) {
  config_.validate();
  optimizer_.kind = OptimizerKind::kAdam;
  optimizer_.learning_rate = static_cast<float>(config_.learning_rate);
  optimizer_.clip_norm = static_cast<float>(config_.grad_clip);
}

UpdateMetrics Trainer::update(const std::vector<Trajectory>& trajectories) {
  std::size_t steps = 0;
  for (const auto& t : trajectories) steps += t.size();
  if (steps == 0) throw ContractError("trainer: empty batch");
  return config_.algorithm == Algorithm::kPpo ? ppo_update(trajectories) : a2c_update(trajectories);
}

namespace {

struct Episodes {
  std::vector<std::unique_ptr<EpisodePlan>> plans;
  std::vector<std::size_t> lengths;
};

Episodes plan_episodes(const MemoryModule& memory, const std::vector<Trajectory>& trajectories) {
  Episodes e;
  for (const auto& t : trajectories) {
    e.plans.push_back(memory.plan(t.observations));
    e.lengths.push_back(t.size());
  }
  return e;
}

EpisodeRef ref(const Trajectory& t, const Episodes& e, std::size_t i) {
  return EpisodeRef{std::span<const Observation>(t.observations), e.plans[i].get()};
}

}  // namespace

UpdateMetrics Trainer::ppo_update(const std::vector<Trajectory>& trajectories) {
  const auto targets = build_targets(trajectories, config_, model_.num_actions());
  const auto episodes = plan_episodes(model_.memory(), trajectories);
  PpoCoefficients coeffs;
  coeffs.clip = static_cast<float>(config_.ppo_clip);
  coeffs.vf_clip = static_cast<float>(config_.vf_clip);
  coeffs.vf_coeff = static_cast<float>(config_.vf_coeff);
  coeffs.entropy_coeff = static_cast<float>(config_.entropy_coeff);

  UpdateMetrics metrics;
  for (std::size_t iter = 0; iter < config_.sgd_iters; ++iter) {
    coeffs.kl_coeff = static_cast<float>(kl_coeff_);
    const auto groups = episode_minibatches(episodes.lengths, config_.minibatch_size, rng_);
    UpdateMetrics sums;
    double rows = 0.0;
    for (const auto& group : groups) {
      std::vector<EpisodeRef> refs;
      BatchTargets batch;
      for (std::size_t e : group) {
        refs.push_back(ref(trajectories[e], episodes, e));
        batch.append(targets[e]);
      }
      Tape tape;
      TapeScope scope(tape);
      Tensor beliefs = model_.memory().replay(model_.params(), refs);
      auto loss = ppo_loss(model_.heads(beliefs), batch, coeffs);
      tape.backward(loss.total);
      const double norm = optimizer_step(model_.params(), optimizer_);
      const double w = static_cast<double>(batch.size());
      sums.policy_loss += w * loss.policy_loss;
      sums.value_loss += w * loss.value_loss;
      sums.entropy += w * loss.entropy;
      sums.kl += w * loss.kl;
      sums.grad_norm += w * norm;
      rows += w;
    }
    metrics.policy_loss = sums.policy_loss / rows;
    metrics.value_loss = sums.value_loss / rows;
    metrics.entropy = sums.entropy / rows;
    metrics.kl = sums.kl / rows;
    metrics.grad_norm = sums.grad_norm / rows;
  }
  kl_coeff_ = adapt_kl_coeff(kl_coeff_, metrics.kl, config_.kl_target);
  return metrics;
}

UpdateMetrics Trainer::a2c_update(const std::vector<Trajectory>& trajectories) {
  const auto targets = build_targets(trajectories, config_, model_.num_actions());
  const auto episodes = plan_episodes(model_.memory(), trajectories);
  A2cCoefficients coeffs;
  coeffs.vf_coeff = static_cast<float>(config_.vf_coeff);
  coeffs.entropy_coeff = static_cast<float>(config_.entropy_coeff);

  std::vector<EpisodeRef> refs;
  BatchTargets batch;
  for (std::size_t e = 0; e < trajectories.size(); ++e) {
    refs.push_back(ref(trajectories[e], episodes, e));
    batch.append(targets[e]);
  }
  Tape tape;
  TapeScope scope(tape);
  Tensor beliefs = model_.memory().replay(model_.params(), refs);
  auto loss = a2c_loss(model_.heads(beliefs), batch, coeffs);
  tape.backward(loss.total);

  UpdateMetrics metrics;
  metrics.grad_norm = optimizer_step(model_.params(), optimizer_);
  metrics.policy_loss = loss.policy_loss;
  metrics.value_loss = loss.value_loss;
  metrics.entropy = loss.entropy;
  return metrics;
}

}  // namespace gcm::rl
