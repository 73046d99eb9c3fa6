#include "gcm/rl/policy.hpp"

#include <cmath>
#include <random>
#include <string>

#include "gcm/baselines.hpp"
#include "gcm/errors.hpp"

namespace gcm::rl {

std::string_view to_string(MemoryKind kind) {
  switch (kind) {
    case MemoryKind::kGcm: return "gcm";
    case MemoryKind::kMlp: return "mlp";
    case MemoryKind::kLstm: return "lstm";
  }
  return "?";
}

MemoryKind parse_memory_kind(std::string_view text) {
  if (text == "gcm") return MemoryKind::kGcm;
  if (text == "mlp") return MemoryKind::kMlp;
  if (text == "lstm") return MemoryKind::kLstm;
  throw ConfigError("unknown memory kind '" + std::string(text) + "' (expected gcm, mlp or lstm)");
}

std::unique_ptr<MemoryModule> make_memory(const MemorySpec& spec, std::size_t input_dim) {
  switch (spec.kind) {
    case MemoryKind::kGcm: {
      GCMConfig config;
      config.input_dim = input_dim;
      config.hidden_size = spec.hidden;
      config.num_layers = spec.layers;
      config.activation = spec.activation;
      config.aggregation = spec.aggregation;
      config.prior = spec.prior;
      return std::make_unique<GcmMemory>(config);
    }
    case MemoryKind::kMlp: return std::make_unique<MlpMemory>(input_dim, spec.hidden);
    case MemoryKind::kLstm: return std::make_unique<LstmMemory>(input_dim, spec.hidden);
  }
  throw ConfigError("unknown memory kind");
}

std::int64_t head_param_count(std::size_t belief_dim, int num_actions) {
  const auto z = static_cast<std::int64_t>(belief_dim);
  const auto a = static_cast<std::int64_t>(num_actions);
  return (z * a + a) + (z + 1);
}

namespace {

Tensor normc(std::size_t rows, std::size_t cols, float norm, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(rows * cols);
  for (auto& v : w) v = normal(rng);
  std::vector<float> out(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < rows; ++r) sq += w[r * cols + c] * w[r * cols + c];
    const double factor = norm / std::sqrt(sq);
    for (std::size_t r = 0; r < rows; ++r) {
      out[r * cols + c] = static_cast<float>(w[r * cols + c] * factor);
    }
  }
  return Tensor::from({rows, cols}, std::move(out));
}

}  // namespace

PolicyModel::PolicyModel(std::unique_ptr<MemoryModule> memory, int num_actions)
    : memory_(std::move(memory)), num_actions_(num_actions) {
  if (!memory_) throw ContractError("PolicyModel: null memory module");
  if (num_actions_ < 1) throw ConfigError("PolicyModel: need at least one action");
}

void PolicyModel::init(Rng& rng) {
  if (params_.size() != 0) throw ContractError("PolicyModel: already initialized");
  memory_->init_params(params_, rng);
  const std::size_t z = memory_->belief_dim();
  const auto a = static_cast<std::size_t>(num_actions_);
  params_.add(kActorWeight, normc(z, a, 0.01f, rng));
  params_.add(kActorBias, Tensor::zeros({a}));
  params_.add(kCriticWeight, normc(z, 1, 1.0f, rng));
  params_.add(kCriticBias, Tensor::zeros({1}));
}

std::int64_t PolicyModel::param_count() const {
  return memory_->param_count() + head_param_count(memory_->belief_dim(), num_actions_);
}

HeadOutput PolicyModel::heads(const Tensor& beliefs) const {
  if (beliefs.rank() != 2 || beliefs.dim(1) != memory_->belief_dim()) {
    throw DimensionError("PolicyModel::heads: expected beliefs [n x " +
                         std::to_string(memory_->belief_dim()) + "], got " +
                         shape_string(beliefs.shape()));
  }
  HeadOutput out;
  out.logits = add_bias(matmul(beliefs, params_.get(kActorWeight)), params_.get(kActorBias));
  Tensor v = add_bias(matmul(beliefs, params_.get(kCriticWeight)), params_.get(kCriticBias));
  out.values = reshape(v, {beliefs.dim(0)});
  return out;
}

ActOutput PolicyModel::act(const Observation& o, ModuleState& state) const {
  NoGradScope no_grad;
  ActOutput out;
  out.belief = memory_->advance(params_, o, state);
  auto h = heads(Tensor::from({1, out.belief.size()}, out.belief));
  out.logits = h.logits.to_vector();
  out.value = h.values.item();
  return out;
}

}  // namespace gcm::rl
