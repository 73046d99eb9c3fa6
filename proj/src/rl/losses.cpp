#include "gcm/rl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gcm/errors.hpp"

namespace gcm::rl {

Advantages compute_gae(std::span<const float> rewards, std::span<const float> values,
                       float bootstrap_value, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw DimensionError("compute_gae: rewards/values mismatch");
  const std::size_t n = rewards.size();
  Advantages out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double next_value = bootstrap_value;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double delta = rewards[i] + gamma * next_value - values[i];
    running = delta + gamma * lambda * running;
    out.advantages[i] = static_cast<float>(running);
    out.returns[i] = static_cast<float>(running + values[i]);
    next_value = values[i];
  }
  return out;
}

Advantages compute_gae(const Trajectory& trajectory, double gamma, double lambda) {
  const float bootstrap = trajectory.terminated() ? 0.0f : trajectory.bootstrap_value;
  return compute_gae(trajectory.rewards, trajectory.values, bootstrap, gamma, lambda);
}

void normalize_advantages(std::vector<float>& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (float a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (float a : advantages) var += (a - mean) * (a - mean);
  const double stddev = std::max(std::sqrt(var / n), 1e-8);
  for (float& a : advantages) a = static_cast<float>((a - mean) / stddev);
}

void BatchTargets::append(const BatchTargets& other) {
  actions.insert(actions.end(), other.actions.begin(), other.actions.end());
  old_log_probs.insert(old_log_probs.end(), other.old_log_probs.begin(), other.old_log_probs.end());
  old_logits.insert(old_logits.end(), other.old_logits.begin(), other.old_logits.end());
  old_values.insert(old_values.end(), other.old_values.begin(), other.old_values.end());
  advantages.insert(advantages.end(), other.advantages.begin(), other.advantages.end());
  returns.insert(returns.end(), other.returns.begin(), other.returns.end());
}

namespace {

void check_targets(const HeadOutput& heads, const BatchTargets& t) {
  const std::size_t n = t.size();
  if (n == 0) throw ContractError("loss: empty batch");
  if (heads.logits.rank() != 2 || heads.logits.dim(0) != n || heads.values.numel() != n ||
      t.old_log_probs.size() != n || t.old_values.size() != n || t.advantages.size() != n ||
      t.returns.size() != n || t.old_logits.size() != n * heads.logits.dim(1)) {
    throw DimensionError("loss: targets do not align with model outputs");
  }
}

double value_of(const Tensor& t) { return static_cast<double>(t.item()); }

}  // namespace

LossOutput ppo_loss(const HeadOutput& heads, const BatchTargets& t, const PpoCoefficients& c) {
  check_targets(heads, t);
  const std::size_t n = t.size();
  const std::size_t a = heads.logits.dim(1);
  auto dist = categorical(heads.logits);
  Tensor log_prob = pick(dist.log_probs, t.actions);
  Tensor advantages = Tensor::from({n}, t.advantages);
  Tensor ratio = exp(sub(log_prob, Tensor::from({n}, t.old_log_probs)));
  Tensor surrogate = minimum(mul(ratio, advantages),
                             mul(clamp(ratio, 1.0f - c.clip, 1.0f + c.clip), advantages));
  Tensor policy_loss = neg(mean_all(surrogate));

  Tensor old_log_probs;
  {
    NoGradScope no_grad;
    old_log_probs = log_softmax(Tensor::from({n, a}, t.old_logits));
  }
  Tensor old_probs = exp(old_log_probs);
  Tensor kl = mean_all(sum(mul(old_probs, sub(old_log_probs, dist.log_probs)), 1));

  Tensor returns = Tensor::from({n}, t.returns);
  Tensor old_values = Tensor::from({n}, t.old_values);
  Tensor loss1 = square(sub(heads.values, returns));
  Tensor clipped = add(old_values, clamp(sub(heads.values, old_values), -c.vf_clip, c.vf_clip));
  Tensor loss2 = square(sub(clipped, returns));
  Tensor value_loss = mean_all(maximum(loss1, loss2));
  Tensor entropy = mean_all(dist.entropy);

  LossOutput out;
  out.total = add(add(policy_loss, scale(kl, c.kl_coeff)),
                  sub(scale(value_loss, c.vf_coeff), scale(entropy, c.entropy_coeff)));
  out.policy_loss = value_of(policy_loss);
  out.value_loss = value_of(value_loss);
  out.entropy = value_of(entropy);
  out.kl = value_of(kl);
  return out;
}

LossOutput a2c_loss(const HeadOutput& heads, const BatchTargets& t, const A2cCoefficients& c) {
  check_targets(heads, t);
  const std::size_t n = t.size();
  auto dist = categorical(heads.logits);
  Tensor log_prob = pick(dist.log_probs, t.actions);
  Tensor policy_loss = neg(mean_all(mul(log_prob, Tensor::from({n}, t.advantages))));
  Tensor value_loss = mean_all(square(sub(heads.values, Tensor::from({n}, t.returns))));
  Tensor entropy = mean_all(dist.entropy);

  LossOutput out;
  out.total = add(policy_loss, sub(scale(value_loss, c.vf_coeff), scale(entropy, c.entropy_coeff)));
  out.policy_loss = value_of(policy_loss);
  out.value_loss = value_of(value_loss);
  out.entropy = value_of(entropy);
  return out;
}

double adapt_kl_coeff(double coeff, double kl, double target) {
  if (kl > 2.0 * target) return coeff * 2.0;
  if (kl < 0.5 * target) return coeff * 0.5;
  return coeff;
}

std::vector<std::vector<std::size_t>> episode_minibatches(std::span<const std::size_t> lengths,
                                                          std::size_t target, Rng& rng) {
  if (target == 0) throw ConfigError("minibatch size must be positive");
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick_index(0, i - 1);
    std::swap(order[i - 1], order[pick_index(rng)]);
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> current;
  std::size_t steps = 0;
  auto distance = [target](std::size_t s) {
    return s > target ? s - target : target - s;
  };
  for (std::size_t e : order) {
    if (!current.empty() && distance(steps + lengths[e]) > distance(steps)) {
      groups.push_back(std::move(current));
      current.clear();
      steps = 0;
    }
    current.push_back(e);
    steps += lengths[e];
  }
  if (!current.empty()) groups.push_back(std::move(current));
  return groups;
}

}  // namespace gcm::rl
