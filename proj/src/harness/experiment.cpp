#include "gcm/harness/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gcm/errors.hpp"
#include "gcm/rl/rollout.hpp"
#include "gcm/rl/trainers.hpp"

#ifndef GCM_VERSION
#define GCM_VERSION "unknown"
#endif

namespace gcm::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_atomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RunError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw RunError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw RunError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string seed_stem(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

}  // namespace

std::string code_version() { return GCM_VERSION; }

fs::path resolve_output_root(const ExperimentConfig& config,
                             const std::optional<fs::path>& explicit_root) {
  if (explicit_root) return *explicit_root;
  if (const char* env = std::getenv("GCM_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return fs::path(config.output_dir);
}

void write_manifest(const RunManifest& m) {
  json doc;
  doc["name"] = m.name;
  doc["code_version"] = m.code_version;
  doc["status"] = m.status;
  doc["config"] = m.config;
  doc["seeds"] = json::array();
  for (const auto& s : m.seeds) {
    doc["seeds"].push_back({{"seed", s.seed},
                            {"metrics", s.metrics.filename().string()},
                            {"checkpoint", s.checkpoint.filename().string()}});
  }
  write_atomically(m.directory / kManifestName, doc.dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& directory) {
  const fs::path path = directory / kManifestName;
  std::ifstream in(path);
  if (!in) throw RunError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw RunError(path.string() + ": " + e.what());
  }
  RunManifest m;
  try {
    m.name = doc.at("name").get<std::string>();
    m.code_version = doc.at("code_version").get<std::string>();
    m.status = doc.at("status").get<std::string>();
    m.config = doc.at("config").get<std::string>();
    m.directory = directory;
    for (const auto& s : doc.at("seeds")) {
      m.seeds.push_back({s.at("seed").get<std::uint64_t>(),
                         directory / s.at("metrics").get<std::string>(),
                         directory / s.at("checkpoint").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw RunError(path.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

SeedOutput run_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& directory,
                    std::ostream* log) {
  SeedOutput out{seed, directory / (seed_stem(seed) + ".csv"), directory / (seed_stem(seed) + ".ckpt")};
  const auto factory = make_env_factory(config.env);
  const auto probe = factory();

  Rng seeder(seed);
  const std::uint64_t init_seed = seeder();
  const std::uint64_t trainer_seed = seeder();
  Rng rollout_seeds(seeder());

  rl::PolicyModel model(rl::make_memory(config.memory, probe->observation_dim()), probe->num_actions());
  Rng init_rng(init_seed);
  model.init(init_rng);
  rl::Trainer trainer(model, config.trainer, trainer_seed);

  std::ofstream csv(out.metrics, std::ios::binary | std::ios::trunc);
  if (!csv) throw RunError("cannot write " + out.metrics.string());
  csv << kMetricsHeader << "\n";
  csv.flush();

  const auto start = std::chrono::steady_clock::now();
  std::uint64_t env_steps = 0;
  std::size_t iteration = 0;
  while (env_steps < config.total_env_steps) {
    ++iteration;
    const std::uint64_t remaining = config.total_env_steps - env_steps;
    const std::size_t batch = static_cast<std::size_t>(
        std::min<std::uint64_t>(config.trainer.batch_size, remaining));

    std::vector<rl::Trajectory> trajectories;
    rl::UpdateMetrics metrics;
    try {
      trajectories = rl::collect_rollouts(model, factory, batch, rollout_seeds());
      metrics = trainer.update(trajectories);
    } catch (const NumericError& e) {
      throw RunError("seed " + std::to_string(seed) + ", iteration " + std::to_string(iteration) +
                     ": training diverged (" + e.what() + ")");
    }
    const double losses[] = {metrics.policy_loss, metrics.value_loss, metrics.entropy, metrics.kl,
                             metrics.grad_norm};
    for (double v : losses) {
      if (!std::isfinite(v)) {
        throw RunError("seed " + std::to_string(seed) + ", iteration " +
                       std::to_string(iteration) + ": training diverged (non-finite loss)");
      }
    }

    std::vector<double> returns;
    for (const auto& t : trajectories) {
      env_steps += t.size();
      if (t.terminated()) returns.push_back(t.episode_return());
    }
    if (returns.empty()) {
      for (const auto& t : trajectories) returns.push_back(t.episode_return());
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char clock[32];
    std::snprintf(clock, sizeof(clock), "%.3f", elapsed);

    std::size_t completed = 0;
    for (const auto& t : trajectories) completed += t.terminated() ? 1 : 0;
    csv << iteration << ',' << env_steps << ',' << completed << ',' << number(mean) << ','
        << number(*lo) << ',' << number(*hi) << ',' << number(metrics.policy_loss) << ','
        << number(metrics.value_loss) << ',' << number(metrics.entropy) << ','
        << number(metrics.kl) << ',' << number(metrics.grad_norm) << ',' << clock << "\n";
    csv.flush();
    if (!csv) throw RunError("write failed for " + out.metrics.string());

    if (log != nullptr) {
      *log << config.name << " seed " << seed << " iter " << iteration << " steps " << env_steps
           << " mean_return " << number(mean) << " kl " << number(metrics.kl) << "\n";
      log->flush();
    }
    if (iteration % config.checkpoint_every == 0) {
      try {
        save_checkpoint(model.params(), out.checkpoint);
      } catch (const std::runtime_error& e) {
        throw RunError(e.what());
      }
    }
  }
  try {
    save_checkpoint(model.params(), out.checkpoint);
  } catch (const std::runtime_error& e) {
    throw RunError(e.what());
  }
  return out;
}

RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  RunManifest manifest;
  manifest.name = config.name;
  manifest.code_version = code_version();
  manifest.config = serialize_config(config);
  manifest.status = "incomplete";
  manifest.directory = resolve_output_root(config, options.output_root) / config.name;

  std::vector<std::uint64_t> seeds = config.seeds;
  if (options.seed) seeds = {*options.seed};
  for (auto s : seeds) {
    manifest.seeds.push_back({s, manifest.directory / (seed_stem(s) + ".csv"),
                              manifest.directory / (seed_stem(s) + ".ckpt")});
  }

  std::error_code ec;
  fs::create_directories(manifest.directory, ec);
  if (ec) throw RunError("cannot create " + manifest.directory.string() + ": " + ec.message());
  write_manifest(manifest);

  for (auto s : seeds) run_seed(config, s, manifest.directory, options.log);

  manifest.status = "complete";
  write_manifest(manifest);
  return manifest;
}

std::vector<std::string> audit_run(const fs::path& directory) {
  std::vector<std::string> problems;
  RunManifest m;
  try {
    m = read_manifest(directory);
  } catch (const RunError& e) {
    problems.push_back(e.what());
    return problems;
  }
  if (m.status != "complete") problems.push_back("manifest status is '" + m.status + "'");
  std::set<std::string> expected{kManifestName};
  for (const auto& s : m.seeds) {
    for (const auto& p : {s.metrics, s.checkpoint}) {
      expected.insert(p.filename().string());
      if (!fs::is_regular_file(p)) problems.push_back("missing " + p.filename().string());
    }
  }
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(directory, ec)) {
    const std::string name = entry.path().filename().string();
    if (!expected.count(name)) problems.push_back("unexpected file " + name);
  }
  if (ec) problems.push_back("cannot list " + directory.string() + ": " + ec.message());
  return problems;
}

}  // namespace gcm::harness
