#pragma once

// The GCM memory state: an append-only knowledge graph of observations.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcm/observation.hpp"
#include "gcm/prior.hpp"

namespace gcm {

// Directed edge from an older vertex to a newer one (from < to).
struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

class MemoryState {
 public:
  MemoryState() = default;
  explicit MemoryState(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  // Number of stored vertices (the timestep counter).
  std::size_t size() const { return metadata_.size(); }
  bool empty() const { return metadata_.empty(); }

  std::span<const float> vertex(std::size_t i) const;
  const std::vector<float>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  // In-neighbors of vertex i, ascending.
  const std::vector<std::size_t>& in_neighbors(std::size_t i) const;
  const std::vector<std::vector<std::size_t>>& all_in_neighbors() const { return in_neighbors_; }
  const ObservationMeta& meta(std::size_t i) const;

  // Appends o as vertex size(), linking every earlier vertex j for which the
  // prior holds. Throws DimensionError when o has the wrong width.
  void append(const Observation& o, const PriorSpec& prior);

  // Per-layer vertex embeddings cached by GCM inference. Valid only for the
  // parameter store (id, version) recorded alongside.
  struct EmbeddingCache {
    std::uint64_t store_id = 0;
    std::uint64_t store_version = 0;
    std::vector<std::vector<float>> layers;  // layer h: size() x hidden, row-major
  };
  EmbeddingCache& cache() const { return cache_; }

 private:
  std::size_t dim_ = 0;
  std::vector<float> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> in_neighbors_;
  std::vector<ObservationMeta> metadata_;
  mutable EmbeddingCache cache_;
};

// Value-semantics insertion: returns m_t, leaving `state` untouched.
MemoryState insert_observation(const MemoryState& state, const Observation& o,
                               const PriorSpec& prior);

// {j | (j, i) in edges}, ascending.
std::vector<std::size_t> neighborhood(const MemoryState& state, std::size_t i);

// Header line `t d`, then one `j i` line per edge in insertion order.
std::string export_edge_list(const MemoryState& state);

}  // namespace gcm
