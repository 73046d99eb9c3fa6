#pragma once

// Graph convolutional memory: a knowledge graph of past observations read by
// a stack of k-GNN graph convolutions,
//   z_i^h = act(W1^h z_i^{h-1} + b^h + W2^h agg({z_j^{h-1} : j in N(i)})),
// with z_i^0 = o_i and agg(empty set) = 0. The belief is z^L at the newest vertex.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcm/memory_graph.hpp"
#include "gcm/memory_module.hpp"
#include "gcm/parameters.hpp"
#include "gcm/prior.hpp"
#include "gcm/tensor.hpp"

namespace gcm {

enum class Activation { kTanh, kRelu };

struct GCMConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_size = 32;
  std::size_t num_layers = 2;
  Activation activation = Activation::kTanh;
  Aggregation aggregation = Aggregation::kSum;
  PriorSpec prior;

  void validate() const;
};

// Parameter names: gcm.layer<h>.root_weight [in x hidden], gcm.layer<h>.bias
// [hidden], gcm.layer<h>.neighbor_weight [in x hidden], h = 1..num_layers.
std::string gcm_param_name(std::size_t layer, std::string_view which);
void init_gcm_params(ParameterStore& store, const GCMConfig& config, Rng& rng);

// Embeddings of every vertex after the last layer, [t x hidden].
Tensor gnn_forward(const ParameterStore& params, const MemoryState& state, const GCMConfig& config);

// Same computation on an explicit vertex matrix and in-neighbor lists.
// `layers_out`, when given, receives the output of every layer.
Tensor gnn_forward(const ParameterStore& params, const Tensor& vertices,
                   std::span<const std::vector<std::size_t>> in_neighbors, const GCMConfig& config,
                   std::vector<Tensor>* layers_out = nullptr);

struct GcmStep {
  Tensor belief;  // [hidden]
  MemoryState state;
};

// Reference memory operator: insert o_t, run the full GNN, read the newest vertex.
GcmStep gcm_step(const Observation& o, const MemoryState& previous, const ParameterStore& params,
                 const GCMConfig& config);

std::int64_t gcm_param_count(const GCMConfig& config);

class GcmMemory final : public MemoryModule {
 public:
  explicit GcmMemory(GCMConfig config);

  const GCMConfig& config() const { return config_; }

  std::string_view kind() const override { return "gcm"; }
  std::size_t input_dim() const override { return config_.input_dim; }
  std::size_t belief_dim() const override { return config_.hidden_size; }
  std::int64_t param_count() const override { return gcm_param_count(config_); }

  void init_params(ParameterStore& store, Rng& rng) const override;
  ModuleState initial_state() const override { return MemoryState(config_.input_dim); }

  // Computes only the new vertex's embeddings, reusing cached embeddings of
  // older vertices; vertices never gain in-edges after insertion, so cached
  // rows stay exact for a fixed parameter version.
  std::vector<float> advance(const ParameterStore& params, const Observation& o,
                             ModuleState& state) const override;

  std::unique_ptr<EpisodePlan> plan(std::span<const Observation> observations) const override;

  // Runs the GNN once over the disjoint union of the episodes' final graphs.
  // Embeddings of vertex i depend only on vertices inserted before it, so the
  // final graph yields every step's belief in one pass.
  Tensor replay(const ParameterStore& params, std::span<const EpisodeRef> episodes) const override;

 private:
  GCMConfig config_;
};

}  // namespace gcm
