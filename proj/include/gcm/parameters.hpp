#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gcm/tensor.hpp"

namespace gcm {

using Rng = std::mt19937_64;

// Named trainable tensors plus their optimizer moments. Iteration order is
// sorted by name. Every mutation through the optimizer or a load bumps
// version(), which inference caches use to detect stale embeddings.
class ParameterStore {
 public:
  ParameterStore();
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  // Registers a leaf that requires grad; throws ContractError on duplicate names.
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  std::int64_t total_elements() const;
  const std::map<std::string, Tensor>& entries() const { return params_; }

  void zero_grad();
  double global_grad_norm() const;

  std::uint64_t id() const { return id_; }
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  // Deep copy of values (fresh moments, fresh id) for read-only sharing.
  ParameterStore snapshot() const;

  struct Moments {
    std::vector<float> first;
    std::vector<float> second;
  };
  std::map<std::string, Moments>& moments() { return moments_; }
  std::int64_t& adam_steps() { return adam_steps_; }

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Moments> moments_;
  std::int64_t adam_steps_ = 0;
  std::uint64_t id_;
  std::uint64_t version_ = 0;
};

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  float learning_rate = 1e-3f;
  // Global-norm clipping threshold; <= 0 disables clipping.
  float clip_norm = 40.0f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Clips gradients by global norm, applies the update, zeroes gradients.
// Returns the global gradient norm measured before clipping.
double optimizer_step(ParameterStore& store, const OptimizerConfig& config);

// Uniform(-bound, bound) initialisation helpers.
Tensor uniform_tensor(Shape shape, float bound, Rng& rng);

// Binary checkpoint: 8-byte magic, one version byte, then for every parameter
// (sorted by name): u32 name length, UTF-8 name, u32 rank, u32 extents, f32
// row-major values. All integers and floats are little-endian.
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);
// Overwrites values of existing parameters; missing or mis-shaped entries throw.
void load_checkpoint(ParameterStore& store, const std::filesystem::path& path);

}  // namespace gcm
