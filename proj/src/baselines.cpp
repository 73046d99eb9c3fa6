#include "gcm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gcm/errors.hpp"

namespace gcm {

namespace {

const Tensor& checked(const ParameterStore& params, const std::string& name, const Shape& shape) {
  const Tensor& t = params.get(name);
  if (t.shape() != shape) {
    throw DimensionError("parameter '" + name + "' has shape " + shape_string(t.shape()) +
                         ", expected " + shape_string(shape));
  }
  return t;
}

Tensor row_tensor(const Observation& o, std::size_t dim) {
  if (o.features.size() != dim) {
    throw DimensionError("observation has " + std::to_string(o.features.size()) +
                         " features, module expects " + std::to_string(dim));
  }
  return Tensor::from({1, dim}, o.features);
}

Tensor stack_features(std::span<const EpisodeRef> episodes, std::size_t dim) {
  std::vector<float> data;
  std::size_t rows = 0;
  for (const auto& e : episodes) {
    for (const auto& o : e.observations) {
      if (o.features.size() != dim) throw DimensionError("replay: bad observation width");
      data.insert(data.end(), o.features.begin(), o.features.end());
      ++rows;
    }
  }
  if (rows == 0) throw ContractError("replay: no observations");
  return Tensor::from({rows, dim}, std::move(data));
}

}  // namespace

std::int64_t baseline_param_count(BaselineKind kind, std::size_t input_dim, std::size_t hidden) {
  const auto d = static_cast<std::int64_t>(input_dim);
  const auto z = static_cast<std::int64_t>(hidden);
  const std::int64_t mlp = (d * z + z) + (z * z + z);
  if (kind == BaselineKind::kMlp) return mlp;
  return mlp + 4 * (z * z + z * z + z);
}

void init_mlp_params(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                     std::size_t hidden, Rng& rng) {
  store.add(prefix + "w1", uniform_tensor({input_dim, hidden},
                                          1.0f / std::sqrt(static_cast<float>(input_dim)), rng));
  store.add(prefix + "b1", Tensor::zeros({hidden}));
  store.add(prefix + "w2",
            uniform_tensor({hidden, hidden}, 1.0f / std::sqrt(static_cast<float>(hidden)), rng));
  store.add(prefix + "b2", Tensor::zeros({hidden}));
}

Tensor mlp_forward(const ParameterStore& params, const std::string& prefix, const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("mlp_forward: expected a matrix input");
  const Tensor& w1 = params.get(prefix + "w1");
  if (w1.rank() != 2 || w1.dim(0) != x.dim(1)) {
    throw DimensionError("mlp_forward: input width " + std::to_string(x.dim(1)) +
                         " does not match " + prefix + "w1 " + shape_string(w1.shape()));
  }
  const std::size_t hidden = w1.dim(1);
  const Tensor& b1 = checked(params, prefix + "b1", {hidden});
  const Tensor& w2 = checked(params, prefix + "w2", {hidden, hidden});
  const Tensor& b2 = checked(params, prefix + "b2", {hidden});
  Tensor h = tanh(add_bias(matmul(x, w1), b1));
  return tanh(add_bias(matmul(h, w2), b2));
}

LstmCellOutput lstm_cell(const ParameterStore& params, const std::string& prefix, const Tensor& x,
                         const Tensor& h, const Tensor& c) {
  const std::size_t z = h.dim(1);
  const Tensor& w_ih = checked(params, prefix + "w_ih", {x.dim(1), 4 * z});
  const Tensor& w_hh = checked(params, prefix + "w_hh", {z, 4 * z});
  const Tensor& bias = checked(params, prefix + "bias", {4 * z});
  Tensor gates = add_bias(add(matmul(x, w_ih), matmul(h, w_hh)), bias);
  Tensor input_gate = sigmoid(slice_cols(gates, 0, z));
  Tensor forget_gate = sigmoid(slice_cols(gates, z, z));
  Tensor candidate = tanh(slice_cols(gates, 2 * z, z));
  Tensor output_gate = sigmoid(slice_cols(gates, 3 * z, z));
  Tensor c_next = add(mul(forget_gate, c), mul(input_gate, candidate));
  Tensor h_next = mul(output_gate, tanh(c_next));
  return {h_next, c_next};
}

// ---------------------------------------------------------------------------

MlpMemory::MlpMemory(std::size_t input_dim, std::size_t hidden)
    : input_dim_(input_dim), hidden_(hidden) {
  if (input_dim == 0 || hidden == 0) throw ConfigError("MLP: dimensions must be positive");
}

void MlpMemory::init_params(ParameterStore& store, Rng& rng) const {
  init_mlp_params(store, kMlpPrefix, input_dim_, hidden_, rng);
}

std::vector<float> MlpMemory::advance(const ParameterStore& params, const Observation& o,
                                      ModuleState& state) const {
  if (!std::holds_alternative<MlpState>(state)) throw ContractError("MlpMemory: wrong state type");
  NoGradScope no_grad;
  return mlp_forward(params, kMlpPrefix, row_tensor(o, input_dim_)).to_vector();
}

Tensor MlpMemory::replay(const ParameterStore& params, std::span<const EpisodeRef> episodes) const {
  return mlp_forward(params, kMlpPrefix, stack_features(episodes, input_dim_));
}

// ---------------------------------------------------------------------------

LstmMemory::LstmMemory(std::size_t input_dim, std::size_t hidden)
    : input_dim_(input_dim), hidden_(hidden) {
  if (input_dim == 0 || hidden == 0) throw ConfigError("LSTM: dimensions must be positive");
}

void LstmMemory::init_params(ParameterStore& store, Rng& rng) const {
  init_mlp_params(store, kLstmMlpPrefix, input_dim_, hidden_, rng);
  const float bound = 1.0f / std::sqrt(static_cast<float>(hidden_));
  const std::string cell = kLstmCellPrefix;
  store.add(cell + "w_ih", uniform_tensor({hidden_, 4 * hidden_}, bound, rng));
  store.add(cell + "w_hh", uniform_tensor({hidden_, 4 * hidden_}, bound, rng));
  store.add(cell + "bias", Tensor::zeros({4 * hidden_}));
}

ModuleState LstmMemory::initial_state() const {
  return LstmState{std::vector<float>(hidden_, 0.0f), std::vector<float>(hidden_, 0.0f)};
}

std::vector<float> LstmMemory::advance(const ParameterStore& params, const Observation& o,
                                       ModuleState& state) const {
  auto* s = std::get_if<LstmState>(&state);
  if (s == nullptr) throw ContractError("LstmMemory: wrong state type");
  if (s->h.size() != hidden_ || s->c.size() != hidden_) {
    throw DimensionError("LstmMemory: state width does not match hidden size");
  }
  NoGradScope no_grad;
  Tensor x = mlp_forward(params, kLstmMlpPrefix, row_tensor(o, input_dim_));
  auto out = lstm_cell(params, kLstmCellPrefix, x, Tensor::from({1, hidden_}, s->h),
                       Tensor::from({1, hidden_}, s->c));
  s->h = out.h.to_vector();
  s->c = out.c.to_vector();
  return s->h;
}

Tensor LstmMemory::replay(const ParameterStore& params, std::span<const EpisodeRef> episodes) const {
  const std::size_t count = episodes.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return episodes[a].observations.size() > episodes[b].observations.size();
  });
  const std::size_t horizon = count ? episodes[order.front()].observations.size() : 0;
  if (horizon == 0) throw ContractError("LstmMemory::replay: no observations");

  // Time-major packing; the active episodes at step k form a prefix of `order`.
  std::vector<std::size_t> active(horizon), offset(horizon);
  std::vector<float> packed;
  std::size_t rows = 0;
  for (std::size_t k = 0; k < horizon; ++k) {
    offset[k] = rows;
    for (std::size_t e : order) {
      const auto& obs = episodes[e].observations;
      if (obs.size() <= k) break;
      const auto& f = obs[k].features;
      if (f.size() != input_dim_) throw DimensionError("LstmMemory::replay: bad observation width");
      packed.insert(packed.end(), f.begin(), f.end());
      ++rows;
    }
    active[k] = rows - offset[k];
  }
  Tensor inputs = mlp_forward(params, kLstmMlpPrefix, Tensor::from({rows, input_dim_}, std::move(packed)));

  Tensor h = Tensor::zeros({active[0], hidden_});
  Tensor c = Tensor::zeros({active[0], hidden_});
  std::vector<Tensor> outputs;
  outputs.reserve(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    const std::size_t n = active[k];
    if (h.dim(0) != n) {
      h = slice_rows(h, 0, n);
      c = slice_rows(c, 0, n);
    }
    auto next = lstm_cell(params, kLstmCellPrefix, slice_rows(inputs, offset[k], n), h, c);
    h = next.h;
    c = next.c;
    outputs.push_back(h);
  }
  Tensor packed_h = concat_rows(outputs);

  std::vector<std::size_t> rank(count);
  for (std::size_t r = 0; r < count; ++r) rank[order[r]] = r;
  std::vector<std::size_t> permutation;
  permutation.reserve(rows);
  for (std::size_t e = 0; e < count; ++e) {
    for (std::size_t k = 0; k < episodes[e].observations.size(); ++k) {
      permutation.push_back(offset[k] + rank[e]);
    }
  }
  return gather_rows(packed_h, permutation);
}

}  // namespace gcm
