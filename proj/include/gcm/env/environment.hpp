#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>

#include "gcm/observation.hpp"

namespace gcm::env {

struct StepResult {
  Observation observation;
  float reward = 0.0f;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual int num_actions() const = 0;

  virtual StepResult reset(std::uint64_t seed) = 0;
  // Throws ContractError once the episode is done.
  virtual StepResult step(int action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

}  // namespace gcm::env
