#include "gcm/env/cartpole.hpp"

#include <cmath>
#include <random>

#include "gcm/errors.hpp"

namespace gcm::env {

StepResult Cartpole::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  state_.x = dist(rng);
  state_.x_dot = dist(rng);
  state_.theta = dist(rng);
  state_.theta_dot = dist(rng);
  state_.steps = 0;
  done_ = false;
  return observe(0.0f);
}

void Cartpole::set_state(const CartpoleState& state) {
  state_ = state;
  done_ = false;
}

void Cartpole::integrate(double force) {
  const auto& p = physics_;
  const double total_mass = p.cart_mass + p.pole_mass;
  const double pole_moment = p.pole_mass * p.half_pole_length;
  const double cos_theta = std::cos(state_.theta);
  const double sin_theta = std::sin(state_.theta);
  const double temp =
      (force + pole_moment * state_.theta_dot * state_.theta_dot * sin_theta) / total_mass;
  const double theta_acc =
      (p.gravity * sin_theta - cos_theta * temp) /
      (p.half_pole_length * (4.0 / 3.0 - p.pole_mass * cos_theta * cos_theta / total_mass));
  const double x_acc = temp - pole_moment * theta_acc * cos_theta / total_mass;

  state_.x += p.tau * state_.x_dot;
  state_.x_dot += p.tau * x_acc;
  state_.theta += p.tau * state_.theta_dot;
  state_.theta_dot += p.tau * theta_acc;
}

StepResult Cartpole::step(int action) {
  if (done_) throw ContractError("cartpole: step after episode end");
  if (action != kLeft && action != kRight) throw ContractError("cartpole: invalid action");
  integrate(action == kRight ? physics_.force_magnitude : -physics_.force_magnitude);
  ++state_.steps;
  done_ = std::abs(state_.x) > physics_.x_limit || std::abs(state_.theta) > physics_.theta_limit ||
          state_.steps >= physics_.max_steps;
  return observe(1.0f);
}

StepResult Cartpole::observe(float reward) const {
  StepResult r;
  r.observation.features = {static_cast<float>(state_.x), static_cast<float>(state_.theta)};
  r.reward = reward;
  r.done = done_;
  return r;
}

}  // namespace gcm::env
