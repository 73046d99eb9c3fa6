#pragma once

// Topological priors: boolean adjacency indicators deciding whether a stored
// observation o_j links to the incoming observation o_t. Leaves combine
// through Or/And nodes.

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gcm/observation.hpp"

namespace gcm {

struct PriorSpec;

// No edges at all; GCM degenerates to an MLP.
struct EmptyPrior {
  bool operator==(const EmptyPrior&) const = default;
};

// Links o_t to o_{t-lag}.
struct TemporalPrior {
  int lag = 1;
  bool operator==(const TemporalPrior&) const = default;
};

// Links observations whose positions lie within `radius` meters.
struct SpatialPrior {
  double radius = 0.0;
  bool operator==(const SpatialPrior&) const = default;
};

enum class LatentMetric { kL2, kCosine };

// Links observations whose latent codes are closer than `threshold`.
struct LatentSimPrior {
  LatentMetric metric = LatentMetric::kL2;
  double threshold = 0.0;
  bool operator==(const LatentSimPrior&) const = default;
};

// Links o_j to o_t when field `a` of o_j equals field `b` of o_t.
struct IdentityPrior {
  std::string a;
  std::string b;
  bool operator==(const IdentityPrior&) const = default;
};

struct OrPrior {
  std::vector<PriorSpec> children;
  bool operator==(const OrPrior&) const;
};

struct AndPrior {
  std::vector<PriorSpec> children;
  bool operator==(const AndPrior&) const;
};

struct PriorSpec {
  using Node = std::variant<EmptyPrior, TemporalPrior, SpatialPrior, LatentSimPrior,
                            IdentityPrior, OrPrior, AndPrior>;
  Node node = EmptyPrior{};

  static PriorSpec empty() { return {EmptyPrior{}}; }
  static PriorSpec temporal(int lag);
  static PriorSpec spatial(double radius);
  static PriorSpec latent(LatentMetric metric, double threshold);
  static PriorSpec identity(std::string a, std::string b);
  static PriorSpec any_of(std::vector<PriorSpec> children);
  static PriorSpec all_of(std::vector<PriorSpec> children);

  bool operator==(const PriorSpec&) const = default;
};

// Evaluates the indicator for the ordered pair (o_j, o_t), where j < t are
// insertion indices and the metas belong to o_j and o_t respectively.
// Throws ConfigError when a leaf needs metadata that is not present.
bool eval_prior(const PriorSpec& spec, std::size_t j, std::size_t t, const ObservationMeta& meta_j,
                const ObservationMeta& meta_t);

// Mini-language, e.g. `or(temporal(1), temporal(2), identity(pointer_value, faceup_value))`.
// Leaves: empty(), temporal(k), spatial(r), latent(l2|cosine, k), identity(a, b).
// Throws ConfigError with the column of the offending token.
PriorSpec parse_prior(std::string_view text);
std::string to_string(const PriorSpec& spec);

}  // namespace gcm
