#include "gcm/gcm.hpp"

#include <cmath>

#include "gcm/errors.hpp"

namespace gcm {

namespace {

const Tensor& checked_param(const ParameterStore& params, const std::string& name,
                            const Shape& expected) {
  const Tensor& t = params.get(name);
  if (t.shape() != expected) {
    throw DimensionError("parameter '" + name + "' has shape " + shape_string(t.shape()) +
                         ", expected " + shape_string(expected));
  }
  return t;
}

Tensor activate(const Tensor& x, Activation a) { return a == Activation::kTanh ? tanh(x) : relu(x); }

std::size_t layer_input(const GCMConfig& c, std::size_t layer) {
  return layer == 1 ? c.input_dim : c.hidden_size;
}

struct LayerParams {
  const Tensor& root_weight;
  const Tensor& bias;
  const Tensor& neighbor_weight;
};

LayerParams layer_params(const ParameterStore& params, const GCMConfig& c, std::size_t layer) {
  const std::size_t in = layer_input(c, layer);
  return {checked_param(params, gcm_param_name(layer, "root_weight"), {in, c.hidden_size}),
          checked_param(params, gcm_param_name(layer, "bias"), {c.hidden_size}),
          checked_param(params, gcm_param_name(layer, "neighbor_weight"), {in, c.hidden_size})};
}

// One graph convolution given the aggregated neighborhood rows.
Tensor convolve(const LayerParams& p, const Tensor& z, const Tensor& aggregated, Activation act) {
  Tensor root = add_bias(matmul(z, p.root_weight), p.bias);
  Tensor neighborhood = matmul(aggregated, p.neighbor_weight);
  return activate(add(root, neighborhood), act);
}

struct GcmPlan final : EpisodePlan {
  std::vector<std::vector<std::size_t>> in_neighbors;
};

}  // namespace

void GCMConfig::validate() const {
  if (input_dim == 0) throw ConfigError("GCM: input_dim must be positive");
  if (hidden_size == 0) throw ConfigError("GCM: hidden_size must be positive");
  if (num_layers == 0) throw ConfigError("GCM: num_layers must be at least 1");
}

std::string gcm_param_name(std::size_t layer, std::string_view which) {
  return "gcm.layer" + std::to_string(layer) + "." + std::string(which);
}

void init_gcm_params(ParameterStore& store, const GCMConfig& config, Rng& rng) {
  config.validate();
  for (std::size_t h = 1; h <= config.num_layers; ++h) {
    const std::size_t in = layer_input(config, h);
    const float bound = 1.0f / std::sqrt(static_cast<float>(in));
    store.add(gcm_param_name(h, "root_weight"), uniform_tensor({in, config.hidden_size}, bound, rng));
    store.add(gcm_param_name(h, "bias"), Tensor::zeros({config.hidden_size}));
    store.add(gcm_param_name(h, "neighbor_weight"),
              uniform_tensor({in, config.hidden_size}, bound, rng));
  }
}

Tensor gnn_forward(const ParameterStore& params, const Tensor& vertices,
                   std::span<const std::vector<std::size_t>> in_neighbors, const GCMConfig& config,
                   std::vector<Tensor>* layers_out) {
  config.validate();
  if (vertices.rank() != 2 || vertices.dim(1) != config.input_dim) {
    throw DimensionError("gnn_forward: vertices " + shape_string(vertices.shape()) +
                         " do not match input_dim " + std::to_string(config.input_dim));
  }
  if (vertices.dim(0) == 0) throw ContractError("gnn_forward: graph has no vertices");
  if (in_neighbors.size() != vertices.dim(0)) {
    throw DimensionError("gnn_forward: one neighbor list per vertex required");
  }
  if (layers_out) layers_out->clear();
  Tensor z = vertices;
  for (std::size_t h = 1; h <= config.num_layers; ++h) {
    const LayerParams p = layer_params(params, config, h);
    z = convolve(p, z, aggregate_rows(z, in_neighbors, config.aggregation), config.activation);
    if (layers_out) layers_out->push_back(z);
  }
  return z;
}

Tensor gnn_forward(const ParameterStore& params, const MemoryState& state, const GCMConfig& config) {
  if (state.empty()) throw ContractError("gnn_forward: graph has no vertices");
  Tensor vertices = Tensor::from({state.size(), state.dim()}, state.vertices());
  return gnn_forward(params, vertices, state.all_in_neighbors(), config);
}

GcmStep gcm_step(const Observation& o, const MemoryState& previous, const ParameterStore& params,
                 const GCMConfig& config) {
  GcmStep out{{}, insert_observation(previous, o, config.prior)};
  Tensor z = gnn_forward(params, out.state, config);
  out.belief = reshape(slice_rows(z, out.state.size() - 1, 1), {config.hidden_size});
  return out;
}

std::int64_t gcm_param_count(const GCMConfig& config) {
  config.validate();
  std::int64_t total = 0;
  for (std::size_t h = 1; h <= config.num_layers; ++h) {
    const auto in = static_cast<std::int64_t>(layer_input(config, h));
    const auto z = static_cast<std::int64_t>(config.hidden_size);
    total += in * z + z + in * z;
  }
  return total;
}

// ---------------------------------------------------------------------------

GcmMemory::GcmMemory(GCMConfig config) : config_(std::move(config)) { config_.validate(); }

void GcmMemory::init_params(ParameterStore& store, Rng& rng) const {
  init_gcm_params(store, config_, rng);
}

std::vector<float> GcmMemory::advance(const ParameterStore& params, const Observation& o,
                                      ModuleState& state) const {
  NoGradScope no_grad;
  auto* graph = std::get_if<MemoryState>(&state);
  if (graph == nullptr) throw ContractError("GcmMemory: state is not a knowledge graph");
  graph->append(o, config_.prior);
  const std::size_t t = graph->size();
  const std::size_t hidden = config_.hidden_size;
  auto& cache = graph->cache();

  const bool cache_valid = cache.store_id == params.id() &&
                           cache.store_version == params.version() &&
                           cache.layers.size() == config_.num_layers &&
                           cache.layers.front().size() == (t - 1) * hidden;
  if (!cache_valid) {
    std::vector<Tensor> layers;
    Tensor vertices = Tensor::from({t, graph->dim()}, graph->vertices());
    gnn_forward(params, vertices, graph->all_in_neighbors(), config_, &layers);
    cache.store_id = params.id();
    cache.store_version = params.version();
    cache.layers.clear();
    for (const Tensor& layer : layers) cache.layers.push_back(layer.to_vector());
  } else {
    const auto& neighbors = graph->in_neighbors(t - 1);
    for (std::size_t h = 1; h <= config_.num_layers; ++h) {
      const LayerParams p = layer_params(params, config_, h);
      const std::size_t in = layer_input(config_, h);
      const std::vector<float>& inputs = h == 1 ? graph->vertices() : cache.layers[h - 2];
      Tensor z = Tensor::from({1, in}, {inputs.end() - static_cast<std::ptrdiff_t>(in), inputs.end()});
      Tensor aggregated = Tensor::zeros({1, in});
      kernels::aggregate(inputs.data(), in, neighbors, config_.aggregation,
                         aggregated.mutable_data().data());
      Tensor out = convolve(p, z, aggregated, config_.activation);
      auto& dst = cache.layers[h - 1];
      dst.insert(dst.end(), out.data().begin(), out.data().end());
    }
  }
  const auto& last = cache.layers.back();
  return {last.end() - static_cast<std::ptrdiff_t>(hidden), last.end()};
}

std::unique_ptr<EpisodePlan> GcmMemory::plan(std::span<const Observation> observations) const {
  MemoryState graph(config_.input_dim);
  for (const auto& o : observations) graph.append(o, config_.prior);
  auto out = std::make_unique<GcmPlan>();
  out->in_neighbors = graph.all_in_neighbors();
  return out;
}

Tensor GcmMemory::replay(const ParameterStore& params, std::span<const EpisodeRef> episodes) const {
  std::size_t total = 0;
  for (const auto& e : episodes) total += e.observations.size();
  if (total == 0) throw ContractError("GcmMemory::replay: no observations");

  std::vector<float> features;
  features.reserve(total * config_.input_dim);
  std::vector<std::vector<std::size_t>> neighbors;
  neighbors.reserve(total);
  for (const auto& e : episodes) {
    std::unique_ptr<EpisodePlan> owned;
    const auto* p = dynamic_cast<const GcmPlan*>(e.plan);
    if (p == nullptr) {
      owned = plan(e.observations);
      p = static_cast<const GcmPlan*>(owned.get());
    }
    if (p->in_neighbors.size() != e.observations.size()) {
      throw ContractError("GcmMemory::replay: plan does not match episode length");
    }
    const std::size_t base = neighbors.size();
    for (std::size_t i = 0; i < e.observations.size(); ++i) {
      const auto& f = e.observations[i].features;
      if (f.size() != config_.input_dim) throw DimensionError("GcmMemory::replay: bad observation width");
      features.insert(features.end(), f.begin(), f.end());
      auto list = p->in_neighbors[i];
      for (auto& j : list) j += base;
      neighbors.push_back(std::move(list));
    }
  }
  Tensor vertices = Tensor::from({total, config_.input_dim}, std::move(features));
  return gnn_forward(params, vertices, neighbors, config_);
}

}  // namespace gcm
