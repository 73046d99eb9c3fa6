#include "gcm/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <regex>
#include <set>
#include <sstream>

#include "gcm/env/card_game.hpp"
#include "gcm/env/cartpole.hpp"
#include "gcm/errors.hpp"

namespace gcm::harness {

namespace {

std::string where(const YAML::Mark& mark) {
  return "line " + std::to_string(mark.line + 1) + ", column " + std::to_string(mark.column + 1);
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
  throw ConfigError(where(node.Mark()) + ": " + message);
}

void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed,
                std::string_view section) {
  if (!map.IsMap()) fail(map, "'" + std::string(section) + "' must be a mapping");
  for (auto it = map.begin(); it != map.end(); ++it) {
    const std::string key = it->first.as<std::string>();
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      fail(it->first, "unknown key '" + key + "' in " + std::string(section) + " (allowed: " +
                          list + ")");
    }
  }
}

const std::string& scalar(const YAML::Node& node, std::string_view key) {
  if (!node.IsScalar()) fail(node, "'" + std::string(key) + "' must be a scalar");
  return node.Scalar();
}

double as_double(const YAML::Node& node, std::string_view key) {
  const auto& s = scalar(node, key);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(node, "'" + std::string(key) + "' must be a number, got '" + s + "'");
  return v;
}

std::uint64_t as_uint(const YAML::Node& node, std::string_view key) {
  const auto& s = scalar(node, key);
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    fail(node, "'" + std::string(key) + "' must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

int as_int(const YAML::Node& node, std::string_view key) {
  const auto& s = scalar(node, key);
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(node, "'" + std::string(key) + "' must be an integer, got '" + s + "'");
  return v;
}

bool as_bool(const YAML::Node& node, std::string_view key) {
  const auto& s = scalar(node, key);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(node, "'" + std::string(key) + "' must be true or false, got '" + s + "'");
}

template <typename Fn>
auto located(const YAML::Node& node, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    fail(node, e.what());
  }
}

void read_env(const YAML::Node& node, EnvSpec& env) {
  check_keys(node, {"kind", "n", "episode_limit"}, "env");
  bool limit_given = false;
  if (node["kind"]) {
    env.kind = scalar(node["kind"], "kind");
    if (env.kind != "cartpole" && env.kind != "cardgame") {
      fail(node["kind"], "unknown env kind '" + env.kind + "' (expected cartpole or cardgame)");
    }
  }
  if (node["n"]) {
    env.n = as_int(node["n"], "n");
    if (env.n < 2 || env.n % 2 != 0) {
      fail(node["n"], "card count n must be even and >= 2, got " + std::to_string(env.n));
    }
  }
  if (node["episode_limit"]) {
    env.episode_limit = as_int(node["episode_limit"], "episode_limit");
    if (env.episode_limit < 1) fail(node["episode_limit"], "episode_limit must be positive");
    limit_given = true;
  }
  if (node["n"] && !limit_given) env.episode_limit = default_episode_limit(env.n);
}

void read_memory(const YAML::Node& node, rl::MemorySpec& m) {
  check_keys(node, {"kind", "hidden", "layers", "activation", "aggregation", "prior"}, "memory");
  if (node["kind"]) {
    m.kind = located(node["kind"], [&] { return rl::parse_memory_kind(scalar(node["kind"], "kind")); });
  }
  if (node["hidden"]) m.hidden = as_uint(node["hidden"], "hidden");
  if (node["layers"]) m.layers = as_uint(node["layers"], "layers");
  if (node["activation"]) {
    const auto& s = scalar(node["activation"], "activation");
    if (s == "tanh") m.activation = Activation::kTanh;
    else if (s == "relu") m.activation = Activation::kRelu;
    else fail(node["activation"], "activation must be tanh or relu, got '" + s + "'");
  }
  if (node["aggregation"]) {
    const auto& s = scalar(node["aggregation"], "aggregation");
    if (s == "sum") m.aggregation = Aggregation::kSum;
    else if (s == "mean") m.aggregation = Aggregation::kMean;
    else fail(node["aggregation"], "aggregation must be sum or mean, got '" + s + "'");
  }
  if (node["prior"]) {
    const auto& text = scalar(node["prior"], "prior");
    m.prior = located(node["prior"], [&] { return parse_prior(text); });
  }
}

void read_trainer(const YAML::Node& node, rl::TrainConfig& t) {
  check_keys(node,
             {"algorithm", "gamma", "lambda", "vf_coeff", "entropy_coeff", "grad_clip",
              "learning_rate", "batch_size", "minibatch_size", "sgd_iters", "ppo_clip", "vf_clip",
              "kl_target", "kl_coeff", "normalize_advantages"},
             "trainer");
  auto num = [&](const char* key, double& out) {
    if (node[key]) out = as_double(node[key], key);
  };
  auto count = [&](const char* key, std::size_t& out) {
    if (node[key]) out = as_uint(node[key], key);
  };
  num("gamma", t.gamma);
  num("lambda", t.lambda);
  num("vf_coeff", t.vf_coeff);
  num("entropy_coeff", t.entropy_coeff);
  num("grad_clip", t.grad_clip);
  num("learning_rate", t.learning_rate);
  count("batch_size", t.batch_size);
  count("minibatch_size", t.minibatch_size);
  count("sgd_iters", t.sgd_iters);
  num("ppo_clip", t.ppo_clip);
  num("vf_clip", t.vf_clip);
  num("kl_target", t.kl_target);
  num("kl_coeff", t.kl_coeff);
  if (node["normalize_advantages"]) {
    t.normalize_advantages = as_bool(node["normalize_advantages"], "normalize_advantages");
  }
}

std::string number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string yaml_quoted(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

const char* kCartpolePrior = "or(temporal(1), temporal(2))";
const char* kCardPrior = "or(temporal(1), temporal(2), identity(pointer_value, faceup_value))";

}  // namespace

int default_episode_limit(int n) {
  switch (n) {
    case 16: return 50;
    case 20: return 75;
    case 24: return 100;
    default: return 30;
  }
}

ExperimentConfig preset(std::string_view name) {
  static const std::regex cartpole(R"(cartpole-ppo-(gcm|mlp|lstm)([0-9]+))");
  static const std::regex cardgame(R"(cardgame([0-9]+)-a2c-(gcm|mlp|lstm)([0-9]+))");
  const std::string text(name);
  std::smatch m;
  ExperimentConfig c;
  c.name = text;
  if (std::regex_match(text, m, cartpole)) {
    c.env = EnvSpec{"cartpole", 8, 30};
    c.memory.kind = rl::parse_memory_kind(m[1].str());
    c.memory.hidden = std::stoul(m[2].str());
    if (c.memory.kind == rl::MemoryKind::kGcm) c.memory.prior = parse_prior(kCartpolePrior);
    c.trainer = rl::ppo_defaults();
    c.total_env_steps = 1'500'000;
  } else if (std::regex_match(text, m, cardgame)) {
    const int n = std::stoi(m[1].str());
    if (n < 2 || n % 2 != 0) throw ConfigError("preset '" + text + "': card count must be even");
    c.env = EnvSpec{"cardgame", n, default_episode_limit(n)};
    c.memory.kind = rl::parse_memory_kind(m[2].str());
    c.memory.hidden = std::stoul(m[3].str());
    if (c.memory.kind == rl::MemoryKind::kGcm) c.memory.prior = parse_prior(kCardPrior);
    c.trainer = rl::a2c_defaults();
    c.total_env_steps = 2'000'000;
  } else {
    throw ConfigError("unknown preset '" + text + "' (expected e.g. cartpole-ppo-gcm32 or cardgame8-a2c-lstm32)");
  }
  if (c.memory.hidden == 0) throw ConfigError("preset '" + text + "': |z| must be positive");
  return c;
}

std::vector<std::string> preset_examples() {
  return {"cartpole-ppo-gcm32", "cartpole-ppo-mlp32", "cartpole-ppo-lstm32",
          "cardgame8-a2c-gcm32", "cardgame8-a2c-mlp32", "cardgame8-a2c-lstm32"};
}

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..") {
    throw ConfigError("name must be a non-empty single path component");
  }
  if (env.kind == "cardgame") {
    env::CardGameConfig{env.n, env.episode_limit}.validate();
  } else if (env.kind != "cartpole") {
    throw ConfigError("unknown env kind '" + env.kind + "'");
  }
  if (memory.hidden == 0) throw ConfigError("memory: hidden must be positive");
  if (memory.kind == rl::MemoryKind::kGcm) {
    GCMConfig g;
    g.input_dim = 1;
    g.hidden_size = memory.hidden;
    g.num_layers = memory.layers;
    g.prior = memory.prior;
    g.validate();
  }
  trainer.validate();
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds: duplicate seed");
  }
  if (total_env_steps == 0) throw ConfigError("total_env_steps must be positive");
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(where(e.mark) + ": " + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError("empty configuration");
  const YAML::Node& doc = root;
  check_keys(doc,
             {"name", "preset", "env", "memory", "trainer", "seeds", "total_env_steps",
              "checkpoint_every", "output_dir"},
             "top level");

  ExperimentConfig c;
  if (doc["preset"]) {
    c = located(doc["preset"], [&] { return preset(scalar(doc["preset"], "preset")); });
  } else if (doc["trainer"] && doc["trainer"].IsMap() && doc["trainer"]["algorithm"]) {
    const auto& node = doc["trainer"]["algorithm"];
    if (located(node, [&] { return rl::parse_algorithm(scalar(node, "algorithm")); }) ==
        rl::Algorithm::kA2c) {
      c.trainer = rl::a2c_defaults();
    }
  }
  if (doc["trainer"] && doc["trainer"].IsMap() && doc["trainer"]["algorithm"]) {
    const auto& node = doc["trainer"]["algorithm"];
    c.trainer.algorithm = located(node, [&] { return rl::parse_algorithm(scalar(node, "algorithm")); });
  }

  if (doc["name"]) c.name = scalar(doc["name"], "name");
  if (doc["env"]) read_env(doc["env"], c.env);
  if (doc["memory"]) read_memory(doc["memory"], c.memory);
  if (doc["trainer"]) read_trainer(doc["trainer"], c.trainer);
  if (doc["seeds"]) {
    const auto& node = doc["seeds"];
    if (!node.IsSequence()) fail(node, "'seeds' must be a list of integers");
    c.seeds.clear();
    for (const auto& s : node) c.seeds.push_back(as_uint(s, "seeds"));
  }
  if (doc["total_env_steps"]) c.total_env_steps = as_uint(doc["total_env_steps"], "total_env_steps");
  if (doc["checkpoint_every"]) c.checkpoint_every = as_uint(doc["checkpoint_every"], "checkpoint_every");
  if (doc["output_dir"]) c.output_dir = scalar(doc["output_dir"], "output_dir");

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open configuration");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  const auto& t = c.trainer;
  std::ostringstream os;
  os << "name: " << yaml_quoted(c.name) << "\n";
  os << "env:\n";
  os << "  kind: " << c.env.kind << "\n";
  os << "  n: " << c.env.n << "\n";
  os << "  episode_limit: " << c.env.episode_limit << "\n";
  os << "memory:\n";
  os << "  kind: " << rl::to_string(c.memory.kind) << "\n";
  os << "  hidden: " << c.memory.hidden << "\n";
  os << "  layers: " << c.memory.layers << "\n";
  os << "  activation: " << (c.memory.activation == Activation::kTanh ? "tanh" : "relu") << "\n";
  os << "  aggregation: " << (c.memory.aggregation == Aggregation::kSum ? "sum" : "mean") << "\n";
  os << "  prior: " << yaml_quoted(to_string(c.memory.prior)) << "\n";
  os << "trainer:\n";
  os << "  algorithm: " << rl::to_string(t.algorithm) << "\n";
  os << "  gamma: " << number(t.gamma) << "\n";
  os << "  lambda: " << number(t.lambda) << "\n";
  os << "  vf_coeff: " << number(t.vf_coeff) << "\n";
  os << "  entropy_coeff: " << number(t.entropy_coeff) << "\n";
  os << "  grad_clip: " << number(t.grad_clip) << "\n";
  os << "  learning_rate: " << number(t.learning_rate) << "\n";
  os << "  batch_size: " << t.batch_size << "\n";
  os << "  minibatch_size: " << t.minibatch_size << "\n";
  os << "  sgd_iters: " << t.sgd_iters << "\n";
  os << "  ppo_clip: " << number(t.ppo_clip) << "\n";
  os << "  vf_clip: " << number(t.vf_clip) << "\n";
  os << "  kl_target: " << number(t.kl_target) << "\n";
  os << "  kl_coeff: " << number(t.kl_coeff) << "\n";
  os << "  normalize_advantages: " << (t.normalize_advantages ? "true" : "false") << "\n";
  os << "seeds: [";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ", " : "") << c.seeds[i];
  os << "]\n";
  os << "total_env_steps: " << c.total_env_steps << "\n";
  os << "checkpoint_every: " << c.checkpoint_every << "\n";
  os << "output_dir: " << yaml_quoted(c.output_dir) << "\n";
  return os.str();
}

env::EnvFactory make_env_factory(const EnvSpec& spec) {
  if (spec.kind == "cartpole") {
    return [] { return std::make_unique<env::Cartpole>(); };
  }
  if (spec.kind == "cardgame") {
    env::CardGameConfig cfg{spec.n, spec.episode_limit};
    cfg.validate();
    return [cfg] { return std::make_unique<env::CardGame>(cfg); };
  }
  throw ConfigError("unknown env kind '" + spec.kind + "'");
}

std::vector<ParamCountRow> count_params(const ExperimentConfig& config,
                                        std::vector<std::size_t> hidden_sizes) {
  auto probe = make_env_factory(config.env)();
  const std::size_t input_dim = probe->observation_dim();
  const int actions = probe->num_actions();
  std::vector<ParamCountRow> rows;
  for (auto kind : {rl::MemoryKind::kGcm, rl::MemoryKind::kMlp, rl::MemoryKind::kLstm}) {
    for (std::size_t z : hidden_sizes) {
      rl::MemorySpec spec = config.memory;
      spec.kind = kind;
      spec.hidden = z;
      auto module = rl::make_memory(spec, input_dim);
      ParamCountRow row;
      row.kind = std::string(rl::to_string(kind));
      row.hidden = z;
      row.memory = module->param_count();
      row.heads = rl::head_param_count(z, actions);
      row.total = row.memory + row.heads;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_param_table(const std::vector<ParamCountRow>& rows) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-6s %5s %10s %8s %10s\n", "module", "|z|", "memory", "heads",
                "total");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-6s %5zu %10lld %8lld %10lld\n", r.kind.c_str(), r.hidden,
                  static_cast<long long>(r.memory), static_cast<long long>(r.heads),
                  static_cast<long long>(r.total));
    os << line;
  }
  return os.str();
}

}  // namespace gcm::harness
