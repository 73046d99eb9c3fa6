#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gcm {

// Side information attached to an observation, read by topological priors but
// never fed to the network.
struct ObservationMeta {
  std::optional<std::vector<float>> position;  // meters
  std::optional<std::vector<float>> latent;
  // Named discrete fields. A declared field holding std::nullopt is "absent"
  // (e.g. no face-up card) and never matches under an identity prior.
  std::vector<std::pair<std::string, std::optional<int>>> fields;

  // nullptr when the field is not declared at all.
  const std::optional<int>* field(std::string_view name) const {
    for (const auto& [key, value] : fields) {
      if (key == name) return &value;
    }
    return nullptr;
  }

  void set_field(std::string name, std::optional<int> value) {
    for (auto& [key, v] : fields) {
      if (key == name) {
        v = value;
        return;
      }
    }
    fields.emplace_back(std::move(name), value);
  }

  bool operator==(const ObservationMeta&) const = default;
};

struct Observation {
  std::vector<float> features;
  ObservationMeta meta;

  bool operator==(const Observation&) const = default;
};

}  // namespace gcm
