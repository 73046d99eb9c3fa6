#pragma once

// Uniform memory operator interface: (b_t, m_t) = M(o_t, m_{t-1}).

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "gcm/memory_graph.hpp"
#include "gcm/observation.hpp"
#include "gcm/parameters.hpp"
#include "gcm/tensor.hpp"

namespace gcm {

// The MLP carries no memory.
struct MlpState {
  bool operator==(const MlpState&) const = default;
};

struct LstmState {
  std::vector<float> h;
  std::vector<float> c;
  bool operator==(const LstmState&) const = default;
};

using ModuleState = std::variant<MlpState, LstmState, MemoryState>;

struct StepOutput {
  std::vector<float> belief;
  ModuleState state;
};

// Per-episode data derived once from the observations and reused across
// replays, e.g. the graph edges of GCM.
struct EpisodePlan {
  virtual ~EpisodePlan() = default;
};

struct EpisodeRef {
  std::span<const Observation> observations;
  const EpisodePlan* plan = nullptr;
};

class MemoryModule {
 public:
  virtual ~MemoryModule() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t belief_dim() const = 0;
  virtual std::int64_t param_count() const = 0;

  virtual void init_params(ParameterStore& store, Rng& rng) const = 0;
  virtual ModuleState initial_state() const = 0;

  // Inference step; mutates `state` into m_t and returns b_t. Never records
  // on a tape.
  virtual std::vector<float> advance(const ParameterStore& params, const Observation& o,
                                     ModuleState& state) const = 0;

  StepOutput step(const ParameterStore& params, const Observation& o,
                  const ModuleState& previous) const {
    StepOutput out{{}, previous};
    out.belief = advance(params, o, out.state);
    return out;
  }

  virtual std::unique_ptr<EpisodePlan> plan(std::span<const Observation> /*observations*/) const {
    return nullptr;
  }

  // Differentiable recomputation of the beliefs of whole episodes, each
  // starting from initial_state(). Rows follow episode order, then time.
  // Bitwise equal to the beliefs produced by advance().
  virtual Tensor replay(const ParameterStore& params, std::span<const EpisodeRef> episodes) const = 0;
};

}  // namespace gcm
