#pragma once

// Baseline memory modules: a memoryless two-layer tanh MLP, and the same MLP
// followed by an LSTM cell.

#include <cstdint>
#include <string>

#include "gcm/memory_module.hpp"

namespace gcm {

enum class BaselineKind { kMlp, kLstm };

// mlp: (d*z + z) + (z*z + z); lstm: mlp(d, z) + 4(z*z + z*z + z).
std::int64_t baseline_param_count(BaselineKind kind, std::size_t input_dim, std::size_t hidden);

// Parameters <prefix>w1 [d x z], <prefix>b1, <prefix>w2 [z x z], <prefix>b2.
void init_mlp_params(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                     std::size_t hidden, Rng& rng);
// tanh(tanh(x W1 + b1) W2 + b2) for x [n x d].
Tensor mlp_forward(const ParameterStore& params, const std::string& prefix, const Tensor& x);

struct LstmCellOutput {
  Tensor h;
  Tensor c;
};

// Fused gate layout along columns: input, forget, cell candidate, output.
// Parameters: <prefix>w_ih [z x 4z], <prefix>w_hh [z x 4z], <prefix>bias [4z].
LstmCellOutput lstm_cell(const ParameterStore& params, const std::string& prefix, const Tensor& x,
                         const Tensor& h, const Tensor& c);

class MlpMemory final : public MemoryModule {
 public:
  MlpMemory(std::size_t input_dim, std::size_t hidden);

  std::string_view kind() const override { return "mlp"; }
  std::size_t input_dim() const override { return input_dim_; }
  std::size_t belief_dim() const override { return hidden_; }
  std::int64_t param_count() const override {
    return baseline_param_count(BaselineKind::kMlp, input_dim_, hidden_);
  }

  void init_params(ParameterStore& store, Rng& rng) const override;
  ModuleState initial_state() const override { return MlpState{}; }
  std::vector<float> advance(const ParameterStore& params, const Observation& o,
                             ModuleState& state) const override;
  Tensor replay(const ParameterStore& params, std::span<const EpisodeRef> episodes) const override;

 private:
  std::size_t input_dim_;
  std::size_t hidden_;
};

class LstmMemory final : public MemoryModule {
 public:
  LstmMemory(std::size_t input_dim, std::size_t hidden);

  std::string_view kind() const override { return "lstm"; }
  std::size_t input_dim() const override { return input_dim_; }
  std::size_t belief_dim() const override { return hidden_; }
  std::int64_t param_count() const override {
    return baseline_param_count(BaselineKind::kLstm, input_dim_, hidden_);
  }

  // Weights uniform(-1/sqrt(z), 1/sqrt(z)), biases zero.
  void init_params(ParameterStore& store, Rng& rng) const override;
  ModuleState initial_state() const override;
  std::vector<float> advance(const ParameterStore& params, const Observation& o,
                             ModuleState& state) const override;
  // Time-major unroll over all episodes at once: at step k the batch holds the
  // episodes longer than k.
  Tensor replay(const ParameterStore& params, std::span<const EpisodeRef> episodes) const override;

 private:
  std::size_t input_dim_;
  std::size_t hidden_;
};

inline constexpr const char* kMlpPrefix = "mlp.";
inline constexpr const char* kLstmMlpPrefix = "lstm.mlp.";
inline constexpr const char* kLstmCellPrefix = "lstm.cell.";

}  // namespace gcm
