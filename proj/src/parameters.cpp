#include "gcm/parameters.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gcm/errors.hpp"

namespace gcm {

namespace {

std::atomic<std::uint64_t> g_next_store_id{1};

constexpr char kMagic[8] = {'G', 'C', 'M', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint8_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("checkpoint " + path.string() + ": truncated");
  }
  return v;
}

}  // namespace

ParameterStore::ParameterStore() : id_(g_next_store_id.fetch_add(1)) {}

Tensor& ParameterStore::add(const std::string& name, Tensor value) {
  if (params_.count(name)) throw ContractError("ParameterStore: duplicate parameter '" + name + "'");
  if (!value.is_leaf()) value = value.detach();
  value.set_requires_grad(true);
  ++version_;
  return params_.emplace(name, std::move(value)).first->second;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("ParameterStore: no parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("ParameterStore: no parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::int64_t ParameterStore::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [_, t] : params_) n += static_cast<std::int64_t>(t.numel());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

double ParameterStore::global_grad_norm() const {
  double total = 0.0;
  for (const auto& [_, t] : params_) {
    for (float g : t.grad()) total += static_cast<double>(g) * g;
  }
  return std::sqrt(total);
}

ParameterStore ParameterStore::snapshot() const {
  ParameterStore copy;
  for (const auto& [name, t] : params_) copy.add(name, t.detach());
  return copy;
}

double optimizer_step(ParameterStore& store, const OptimizerConfig& config) {
  const double norm = store.global_grad_norm();
  float factor = 1.0f;
  if (config.clip_norm > 0.0f && norm > config.clip_norm) {
    factor = static_cast<float>(config.clip_norm / norm);
  }
  if (config.kind == OptimizerKind::kAdam) ++store.adam_steps();
  const auto step = static_cast<double>(store.adam_steps());
  const float correction1 = static_cast<float>(1.0 - std::pow(config.beta1, step));
  const float correction2 = static_cast<float>(1.0 - std::pow(config.beta2, step));

  for (auto& [name, param] : store.entries()) {
    Tensor& p = store.get(name);
    auto values = p.mutable_data();
    auto grads = p.mutable_grad();
    if (config.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] -= config.learning_rate * grads[i] * factor;
      }
    } else {
      auto& m = store.moments()[name];
      if (m.first.size() != values.size()) {
        m.first.assign(values.size(), 0.0f);
        m.second.assign(values.size(), 0.0f);
      }
      for (std::size_t i = 0; i < values.size(); ++i) {
        const float g = grads[i] * factor;
        m.first[i] = config.beta1 * m.first[i] + (1.0f - config.beta1) * g;
        m.second[i] = config.beta2 * m.second[i] + (1.0f - config.beta2) * g * g;
        const float m_hat = m.first[i] / correction1;
        const float v_hat = m.second[i] / correction2;
        values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
      }
    }
    (void)param;
  }
  store.zero_grad();
  store.bump_version();
  return norm;
}

Tensor uniform_tensor(Shape shape, float bound, Rng& rng) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  std::vector<float> values(shape_numel(shape));
  for (float& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values));
}

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint " + path.string() + ": cannot open for writing");
  os.write(kMagic, sizeof kMagic);
  os.put(static_cast<char>(kFormatVersion));
  for (const auto& [name, t] : store.entries()) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) write_u32(os, static_cast<std::uint32_t>(e));
    const auto data = t.data();
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("checkpoint " + path.string() + ": write failed");
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint " + path.string() + ": cannot open");
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint " + path.string() + ": bad magic");
  }
  const int version = is.get();
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint " + path.string() + ": unsupported version " +
                             std::to_string(version));
  }
  std::size_t loaded = 0;
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = read_u32(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated name");
    const std::uint32_t rank = read_u32(is, path);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(read_u32(is, path));
    Tensor& target = store.get(name);
    if (target.shape() != shape) {
      throw DimensionError("checkpoint: parameter '" + name + "' has shape " + shape_string(shape) +
                           ", expected " + shape_string(target.shape()));
    }
    auto values = target.mutable_data();
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float)))) {
      throw std::runtime_error("checkpoint " + path.string() + ": truncated values");
    }
    ++loaded;
  }
  if (loaded != store.size()) {
    throw std::runtime_error("checkpoint " + path.string() + ": holds " + std::to_string(loaded) +
                             " of " + std::to_string(store.size()) + " parameters");
  }
  store.bump_version();
}

}  // namespace gcm
