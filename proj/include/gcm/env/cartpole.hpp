#pragma once

// Cart-pole balancing with the velocities hidden: the agent observes only the
// cart position and the pole angle.

#include <array>

#include "gcm/env/environment.hpp"

namespace gcm::env {

struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  int steps = 0;
};

struct CartpolePhysics {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_pole_length = 0.5;
  double force_magnitude = 10.0;
  double tau = 0.02;
  double theta_limit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  double x_limit = 2.4;
  int max_steps = 200;
};

class Cartpole final : public Environment {
 public:
  enum Action : int { kLeft = 0, kRight = 1 };

  explicit Cartpole(CartpolePhysics physics = {}) : physics_(physics) {}

  std::string_view name() const override { return "cartpole"; }
  std::size_t observation_dim() const override { return 2; }
  int num_actions() const override { return 2; }

  // All four state components ~ uniform(-0.05, 0.05).
  StepResult reset(std::uint64_t seed) override;
  StepResult step(int action) override;

  const CartpoleState& state() const { return state_; }
  const CartpolePhysics& physics() const { return physics_; }
  bool done() const { return done_; }

  // Test hooks: full state including velocities, direct state injection, and
  // one explicit-Euler step under an arbitrary force (no termination logic).
  std::array<double, 4> full_observation() const {
    return {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
  }
  void set_state(const CartpoleState& state);
  void integrate(double force);

 private:
  StepResult observe(float reward) const;

  CartpolePhysics physics_;
  CartpoleState state_;
  bool done_ = true;
};

}  // namespace gcm::env
