#pragma once

// Actor-critic model: a memory module produces the belief b_t, which feeds a
// linear actor head (action logits) and a linear critic head (state value).

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "gcm/gcm.hpp"
#include "gcm/memory_module.hpp"
#include "gcm/parameters.hpp"
#include "gcm/prior.hpp"

namespace gcm::rl {

enum class MemoryKind { kGcm, kMlp, kLstm };

std::string_view to_string(MemoryKind kind);
MemoryKind parse_memory_kind(std::string_view text);

struct MemorySpec {
  MemoryKind kind = MemoryKind::kGcm;
  std::size_t hidden = 32;
  // GCM only.
  std::size_t layers = 2;
  Activation activation = Activation::kTanh;
  Aggregation aggregation = Aggregation::kSum;
  PriorSpec prior;

  bool operator==(const MemorySpec&) const = default;
};

std::unique_ptr<MemoryModule> make_memory(const MemorySpec& spec, std::size_t input_dim);

// Actor z*A + A, critic z + 1.
std::int64_t head_param_count(std::size_t belief_dim, int num_actions);

inline constexpr const char* kActorWeight = "actor.weight";
inline constexpr const char* kActorBias = "actor.bias";
inline constexpr const char* kCriticWeight = "critic.weight";
inline constexpr const char* kCriticBias = "critic.bias";

struct ActOutput {
  std::vector<float> belief;
  std::vector<float> logits;
  float value = 0.0f;
};

struct HeadOutput {
  Tensor logits;  // [n x A]
  Tensor values;  // [n]
};

class PolicyModel {
 public:
  PolicyModel(std::unique_ptr<MemoryModule> memory, int num_actions);

  // Memory parameters, then the heads: columns drawn normal and rescaled to
  // norm 0.01 (actor) or 1.0 (critic); biases zero.
  void init(Rng& rng);

  const MemoryModule& memory() const { return *memory_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  int num_actions() const { return num_actions_; }
  std::int64_t param_count() const;

  ModuleState initial_state() const { return memory_->initial_state(); }

  // Inference step: advances `state` and evaluates both heads. Never records.
  ActOutput act(const Observation& o, ModuleState& state) const;

  // Differentiable heads over a belief matrix [n x z].
  HeadOutput heads(const Tensor& beliefs) const;

 private:
  std::unique_ptr<MemoryModule> memory_;
  int num_actions_;
  ParameterStore params_;
};

}  // namespace gcm::rl
