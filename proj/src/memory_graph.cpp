#include "gcm/memory_graph.hpp"

#include <sstream>

#include "gcm/errors.hpp"

namespace gcm {

std::span<const float> MemoryState::vertex(std::size_t i) const {
  if (i >= size()) throw IndexError("MemoryState::vertex: index out of range");
  return std::span<const float>(vertices_).subspan(i * dim_, dim_);
}

const std::vector<std::size_t>& MemoryState::in_neighbors(std::size_t i) const {
  if (i >= size()) throw IndexError("MemoryState::in_neighbors: index out of range");
  return in_neighbors_[i];
}

const ObservationMeta& MemoryState::meta(std::size_t i) const {
  if (i >= size()) throw IndexError("MemoryState::meta: index out of range");
  return metadata_[i];
}

void MemoryState::append(const Observation& o, const PriorSpec& prior) {
  if (o.features.size() != dim_) {
    throw DimensionError("MemoryState::append: observation has " +
                         std::to_string(o.features.size()) + " features, graph stores " +
                         std::to_string(dim_));
  }
  const std::size_t t = size();
  std::vector<std::size_t> neighbors;
  for (std::size_t j = 0; j < t; ++j) {
    if (eval_prior(prior, j, t, metadata_[j], o.meta)) neighbors.push_back(j);
  }
  for (std::size_t j : neighbors) edges_.push_back({j, t});
  in_neighbors_.push_back(std::move(neighbors));
  vertices_.insert(vertices_.end(), o.features.begin(), o.features.end());
  metadata_.push_back(o.meta);
}

MemoryState insert_observation(const MemoryState& state, const Observation& o,
                               const PriorSpec& prior) {
  MemoryState next = state;
  next.append(o, prior);
  return next;
}

std::vector<std::size_t> neighborhood(const MemoryState& state, std::size_t i) {
  return state.in_neighbors(i);
}

std::string export_edge_list(const MemoryState& state) {
  std::ostringstream os;
  os << state.size() << ' ' << state.dim() << '\n';
  for (const Edge& e : state.edges()) os << e.from << ' ' << e.to << '\n';
  return os.str();
}

}  // namespace gcm
