// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance --out DIR [--only 1,2,...] [--fresh]
//
// Training criteria write their runs under DIR. A run directory whose manifest
// is complete, audits clean and holds the identical config is reused unless
// --fresh is given.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gcm/baselines.hpp"
#include "gcm/env/card_game.hpp"
#include "gcm/env/cartpole.hpp"
#include "gcm/gcm.hpp"
#include "gcm/harness/config.hpp"
#include "gcm/harness/experiment.hpp"
#include "gcm/harness/summary.hpp"
#include "gcm/memory_graph.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gcm;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// --- 1 -----------------------------------------------------------------------

Verdict gradient_suite() {
  const auto start = Clock::now();
  auto cases = testing::primitive_cases();
  for (auto& c : testing::composite_cases()) cases.push_back(std::move(c));
  double worst = 0.0;
  std::string worst_case;
  int failures = 0;
  for (const auto& c : cases) {
    Rng rng(std::hash<std::string>{}(c.name));
    for (int instance = 0; instance < 100; ++instance) {
      const auto r = testing::check_gradients(c, rng);
      if (r.max_rel_error > testing::kRelTolerance) ++failures;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_case = c.name + " (" + r.worst + ")";
      }
    }
  }
  const double secs = seconds_since(start);
  return {failures == 0 && secs < 60.0,
          std::to_string(cases.size()) + " cases x 100 instances, " + std::to_string(failures) +
              " over 1e-4, worst rel " + fmt(worst) + " in " + worst_case + ", " + fmt(secs) + " s"};
}

// --- 2 -----------------------------------------------------------------------

testing::LeafCoverage g_coverage;

Verdict structural_oracle() {
  const auto start = Clock::now();
  Rng rng(20240);
  std::uniform_int_distribution<std::size_t> len(1, 50);
  int mismatches = 0;
  std::size_t edges = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto prior = testing::random_prior(rng);
    testing::count_leaves(prior, g_coverage);
    const auto ep = testing::random_episode(rng, len(rng), 3);
    MemoryState s(3);
    for (const auto& o : ep) s.append(o, prior);
    const std::set<Edge> got(s.edges().begin(), s.edges().end());
    if (got.size() != s.edges().size() || got != testing::brute_force_edges(prior, ep)) ++mismatches;
    edges += got.size();
  }
  const auto& c = g_coverage;
  const bool covered = c.empty && c.temporal && c.spatial && c.latent && c.identity && c.any && c.all;
  const double secs = seconds_since(start);
  return {mismatches == 0 && covered && secs < 60.0,
          "1000 episodes, " + std::to_string(edges) + " edges, " + std::to_string(mismatches) +
              " mismatches, leaves empty/temporal/spatial/latent/identity/or/and = " +
              std::to_string(c.empty) + "/" + std::to_string(c.temporal) + "/" +
              std::to_string(c.spatial) + "/" + std::to_string(c.latent) + "/" +
              std::to_string(c.identity) + "/" + std::to_string(c.any) + "/" +
              std::to_string(c.all) + ", " + fmt(secs) + " s"};
}

// --- 3 -----------------------------------------------------------------------

Verdict empty_prior_equivalence() {
  Rng rng(77);
  std::uniform_int_distribution<std::size_t> dim(1, 8), hidden(1, 32), len(1, 40);
  int differing = 0;
  std::size_t steps = 0;
  for (int stream = 0; stream < 100; ++stream) {
    GCMConfig c{dim(rng), hidden(rng), 2, Activation::kTanh,
                stream % 2 ? Aggregation::kSum : Aggregation::kMean, PriorSpec::empty()};
    GcmMemory gcm_memory(c);
    ParameterStore p;
    gcm_memory.init_params(p, rng);
    ParameterStore q;
    q.add("mlp.w1", p.get(gcm_param_name(1, "root_weight")).clone());
    q.add("mlp.b1", p.get(gcm_param_name(1, "bias")).clone());
    q.add("mlp.w2", p.get(gcm_param_name(2, "root_weight")).clone());
    q.add("mlp.b2", p.get(gcm_param_name(2, "bias")).clone());
    MlpMemory mlp(c.input_dim, c.hidden_size);
    const auto ep = testing::random_episode(rng, len(rng), c.input_dim);
    ModuleState g = gcm_memory.initial_state(), m = mlp.initial_state();
    MemoryState reference(c.input_dim);
    for (const auto& o : ep) {
      const auto expected = mlp.advance(q, o, m);
      auto ref = gcm_step(o, reference, p, c);
      reference = std::move(ref.state);
      if (gcm_memory.advance(p, o, g) != expected || ref.belief.to_vector() != expected) {
        ++differing;
      }
      ++steps;
    }
  }
  return {differing == 0, "100 streams, " + std::to_string(steps) + " beliefs, " +
                              std::to_string(differing) + " not bitwise equal"};
}

// --- 4 -----------------------------------------------------------------------

Verdict receptive_field() {
  Rng rng(4040);
  std::uniform_int_distribution<std::size_t> len(3, 40);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  int outside = 0, changed = 0;
  for (int graph = 0; graph < 200; ++graph) {
    GCMConfig c{3, 8, 2, graph % 3 ? Activation::kTanh : Activation::kRelu,
                graph % 2 ? Aggregation::kSum : Aggregation::kMean, testing::random_prior(rng)};
    testing::count_leaves(c.prior, g_coverage);
    ParameterStore p;
    init_gcm_params(p, c, rng);
    const auto ep = testing::random_episode(rng, len(rng), 3);
    MemoryState s(3);
    for (const auto& o : ep) s.append(o, c.prior);
    const auto field = testing::receptive_field(s, s.size() - 1, 2);
    MemoryState prefix(3);
    for (std::size_t i = 0; i + 1 < ep.size(); ++i) prefix.append(ep[i], c.prior);
    const auto base = gcm_step(ep.back(), prefix, p, c).belief.to_vector();
    for (std::size_t v = 0; v < s.size(); ++v) {
      if (field.count(v)) continue;
      auto moved = ep;
      for (auto& f : moved[v].features) f += noise(rng);
      MemoryState before(3);
      for (std::size_t i = 0; i + 1 < moved.size(); ++i) before.append(moved[i], c.prior);
      ++outside;
      if (gcm_step(moved.back(), before, p, c).belief.to_vector() != base) ++changed;
    }
  }
  return {changed == 0 && outside > 0, "200 graphs, " + std::to_string(outside) +
                                           " perturbations outside the 2-hop field, " +
                                           std::to_string(changed) + " changed b_t"};
}

// --- 5 -----------------------------------------------------------------------

Verdict parameter_counts() {
  int wrong = 0, unordered = 0;
  std::string table;
  for (const char* name : {"cartpole-ppo-gcm32", "cardgame8-a2c-gcm32"}) {
    const auto cfg = harness::preset(name);
    const std::int64_t d = cfg.env.kind == "cartpole" ? 2 : 31;
    const std::int64_t a = cfg.env.kind == "cartpole" ? 2 : 3;
    const auto rows = harness::count_params(cfg);
    for (std::int64_t z : {8, 16, 32}) {
      const std::int64_t heads = z * a + a + z + 1;
      const std::int64_t mlp = (d * z + z) + (z * z + z);
      std::int64_t gcm_total = -1, lstm_total = -1;
      for (const auto& r : rows) {
        if (r.hidden != std::size_t(z)) continue;
        std::int64_t expect = r.kind == "gcm"   ? (2 * d * z + z) + (2 * z * z + z) + heads
                              : r.kind == "mlp" ? mlp + heads
                                                : mlp + 4 * (2 * z * z + z) + heads;
        if (r.total != expect) ++wrong;
        if (r.kind == "gcm") gcm_total = r.total;
        if (r.kind == "lstm") lstm_total = r.total;
      }
      if (!(gcm_total > 0 && gcm_total < lstm_total)) ++unordered;
      table += " d" + std::to_string(d) + "/z" + std::to_string(z) + ":" +
               std::to_string(gcm_total) + "<" + std::to_string(lstm_total);
    }
  }
  return {wrong == 0 && unordered == 0, "gcm<lstm totals" + table + "; " + std::to_string(wrong) +
                                            " closed-form mismatches"};
}

// --- training runs -----------------------------------------------------------

struct Runner {
  fs::path root;
  bool fresh = false;

  // Returns the seed CSVs of a complete run, training it when needed.
  std::vector<fs::path> ensure(harness::ExperimentConfig config) {
    const auto dir = root / config.name;
    const auto text = harness::serialize_config(config);
    if (!fresh && fs::exists(dir / harness::kManifestName)) {
      try {
        const auto m = harness::read_manifest(dir);
        if (m.status == "complete" && m.config == text && harness::audit_run(dir).empty()) {
          std::cerr << "reusing " << dir << "\n";
          return csvs(m);
        }
      } catch (const std::exception&) {
      }
    }
    fs::remove_all(dir);
    fs::create_directories(root);
    std::ofstream log(root / (config.name + ".log"));
    harness::RunOptions opt;
    opt.output_root = root;
    opt.log = &log;
    const auto start = Clock::now();
    std::cerr << "training " << config.name << "\n";
    const auto m = harness::run_experiment(config, opt);
    std::cerr << "  done in " << fmt(seconds_since(start), 4) << " s\n";
    return csvs(m);
  }

  static std::vector<fs::path> csvs(const harness::RunManifest& m) {
    std::vector<fs::path> out;
    for (const auto& s : m.seeds) out.push_back(m.directory / s.metrics);
    return out;
  }
};

std::vector<double> returns(const fs::path& csv) {
  const auto t = harness::read_metrics(csv);
  const auto col = t.column("mean_return");
  std::vector<double> r;
  for (const auto& row : t.rows) r.push_back(row[col]);
  return r;
}

harness::ExperimentConfig named(const std::string& preset, const std::string& name) {
  auto c = harness::preset(preset);
  c.name = name;
  c.seeds = {0, 1, 2};
  return c;
}

// --- 6 -----------------------------------------------------------------------

Verdict cartpole(Runner& runner) {
  auto gcm_cfg = named("cartpole-ppo-gcm32", "cartpole-gcm32");
  auto mlp_cfg = named("cartpole-ppo-mlp32", "cartpole-mlp32");
  const auto gcm_csvs = runner.ensure(gcm_cfg);
  const auto mlp_csvs = runner.ensure(mlp_cfg);
  int solved = 0;
  std::string detail = "gcm solve iteration per seed:";
  for (const auto& csv : gcm_csvs) {
    const auto r = returns(csv);
    int streak = 0, at = -1;
    for (std::size_t i = 0; i < r.size() && at < 0; ++i) {
      streak = r[i] >= 195.0 ? streak + 1 : 0;
      if (streak == 5) at = int(i) + 1;
    }
    if (at > 0) ++solved;
    detail += " " + (at > 0 ? std::to_string(at) : std::string("never"));
  }
  bool mlp_low = true;
  detail += "; mlp max return per seed:";
  for (const auto& csv : mlp_csvs) {
    const auto r = returns(csv);
    const double best = *std::max_element(r.begin(), r.end());
    mlp_low = mlp_low && best < 120.0;
    detail += " " + fmt(best, 4);
  }
  return {solved >= 2 && mlp_low, detail};
}

// --- 7 -----------------------------------------------------------------------

// Mean training return over the last 10 iterations (20k steps at batch 2000).
double final_return(const fs::path& csv) {
  const auto r = returns(csv);
  const std::size_t k = std::min<std::size_t>(10, r.size());
  double s = 0.0;
  for (std::size_t i = r.size() - k; i < r.size(); ++i) s += r[i];
  return s / double(k);
}

Verdict card_game(Runner& runner) {
  const auto g = runner.ensure(named("cardgame8-a2c-gcm32", "cardgame8-gcm32"));
  const auto m = runner.ensure(named("cardgame8-a2c-mlp32", "cardgame8-mlp32"));
  const auto l = runner.ensure(named("cardgame8-a2c-lstm32", "cardgame8-lstm32"));
  int good = 0;
  std::string detail = "final return gcm/mlp/lstm per seed:";
  for (std::size_t s = 0; s < g.size(); ++s) {
    const double rg = final_return(g[s]), rm = final_return(m[s]), rl = final_return(l[s]);
    if (rg >= 2.0 * rm && rg >= 1.25 * rl) ++good;
    detail += " " + fmt(rg) + "/" + fmt(rm) + "/" + fmt(rl);
  }
  detail += "; seeds meeting both ratios: " + std::to_string(good);
  return {good >= 2, detail};
}

// --- 8 -----------------------------------------------------------------------

Verdict environment_oracles() {
  env::CardGame game({4, 30});
  std::mt19937_64 rng(123);
  int bad_reward = 0, bad_total = 0, completed = 0;
  for (int episode = 0; episode < 10000; ++episode) {
    auto r = game.reset(rng());
    double total = 0.0;
    while (!r.done) {
      r = game.step(static_cast<int>(rng() % 3));
      if (r.reward != 0.0f && r.reward != 0.5f) ++bad_reward;
      total += r.reward;
    }
    if (game.state().matched_count() == 4) {
      ++completed;
      if (total != 1.0) ++bad_total;
    }
  }
  env::Cartpole cart;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    cart.reset(100 + trial);
    const auto s0 = cart.full_observation();
    testing::ReferenceCartpole ref{s0[0], s0[1], s0[2], s0[3]};
    for (int step = 0; step < 200; ++step) {
      const double force = trial == 0 ? 0.0 : (rng() % 2 ? 10.0 : -10.0);
      cart.integrate(force);
      ref.step(force);
      const auto s = cart.full_observation();
      for (double gap : {s[0] - ref.x, s[1] - ref.x_dot, s[2] - ref.theta, s[3] - ref.theta_dot}) {
        worst = std::max(worst, std::abs(gap));
      }
    }
  }
  return {bad_reward == 0 && bad_total == 0 && completed > 0 && worst <= 1e-6,
          "card n=4: " + std::to_string(completed) + " completed of 10000, " +
              std::to_string(bad_reward) + " rewards outside {0, 0.5}, " +
              std::to_string(bad_total) + " completed returns != 1; cartpole worst gap " +
              fmt(worst) + " over 10 x 200 steps"};
}

// --- 9 -----------------------------------------------------------------------

std::string strip_wall_clock(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Verdict determinism(const fs::path& root) {
  std::string detail;
  bool ok = true;
  for (const char* preset : {"cartpole-ppo-gcm8", "cardgame8-a2c-gcm8"}) {
    auto c = harness::preset(preset);
    c.name = std::string("determinism-") + preset;
    c.trainer.batch_size = 1000;
    c.trainer.minibatch_size = std::min<std::size_t>(c.trainer.minibatch_size, 1000);
    c.trainer.sgd_iters = std::min<std::size_t>(c.trainer.sgd_iters, 4);
    c.total_env_steps = 5000;
    const auto dir = root / "determinism";
    fs::create_directories(dir);
    const auto yaml = dir / (std::string(preset) + ".yaml");
    std::ofstream(yaml) << harness::serialize_config(c);
    std::string csv[2];
    for (int k = 0; k < 2; ++k) {
      const auto out = dir / ("invocation" + std::to_string(k));
      fs::remove_all(out);
      const std::string cmd = std::string(GCM_CLI_PATH) + " run " + yaml.string() +
                              " --seed 4 --quiet --out " + out.string() + " > /dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        ok = false;
        detail += std::string(preset) + ": run failed; ";
        continue;
      }
      csv[k] = strip_wall_clock(out / c.name / "seed_4.csv");
    }
    const bool same = !csv[0].empty() && csv[0] == csv[1];
    ok = ok && same;
    detail += std::string(preset) + (same ? " identical" : " differs") + "; ";
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  fs::path out = "acceptance_runs";
  std::vector<int> only;
  bool fresh = false;
  app.add_option("--out", out, "Directory for training runs");
  app.add_option("--only", only, "Criteria to evaluate")->delimiter(',');
  app.add_flag("--fresh", fresh, "Retrain even when a matching run exists");
  CLI11_PARSE(app, argc, argv);

  Runner runner{out, fresh};
  bool all = true;
  auto report = [&](int id, auto&& criterion) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) return;
    Verdict v;
    try {
      v = criterion();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail
              << std::endl;
  };

  bool structural = false, receptive = false;
  report(1, gradient_suite);
  report(2, [&] {
    auto v = structural_oracle();
    structural = v.pass;
    return v;
  });
  report(3, empty_prior_equivalence);
  report(4, [&] {
    auto v = receptive_field();
    receptive = v.pass;
    return v;
  });
  report(5, parameter_counts);
  report(6, [&] { return cartpole(runner); });
  report(7, [&] { return card_game(runner); });
  report(8, environment_oracles);
  report(9, [&] { return determinism(out); });
  report(10, [&] {
    return Verdict{structural && receptive && g_coverage.spatial > 0 && g_coverage.latent > 0,
                   "navigation not reproduced; spatial and latent priors exercised by criteria 2 "
                   "and 4 (" +
                       std::to_string(g_coverage.spatial) + " spatial, " +
                       std::to_string(g_coverage.latent) + " latent leaves)"};
  });
  return all ? 0 : 1;
}
