#include <gtest/gtest.h>

#include <cmath>

#include "gcm/baselines.hpp"
#include "gcm/errors.hpp"
#include "gcm/gcm.hpp"
#include "gcm/memory_graph.hpp"
#include "gcm/prior.hpp"
#include "oracles.hpp"

namespace gcm {
namespace {

ObservationMeta at(float x, float y) {
  ObservationMeta m;
  m.position = std::vector<float>{x, y};
  return m;
}

Observation obs(std::vector<float> f) { return Observation{std::move(f), {}}; }

MemoryState build(const std::vector<Observation>& episode, const PriorSpec& prior) {
  MemoryState s(episode.front().features.size());
  for (const auto& o : episode) s.append(o, prior);
  return s;
}

// --- priors ------------------------------------------------------------------

TEST(Prior, Temporal) {
  const auto p = PriorSpec::temporal(1);
  EXPECT_TRUE(eval_prior(p, 4, 5, {}, {}));
  EXPECT_FALSE(eval_prior(p, 3, 5, {}, {}));
}

TEST(Prior, SpatialWithinRadius) {
  const auto p = PriorSpec::spatial(0.25);
  EXPECT_TRUE(eval_prior(p, 0, 1, at(0, 0), at(0, 0.2f)));
  EXPECT_FALSE(eval_prior(p, 0, 1, at(0, 0), at(0, 0.3f)));
}

TEST(Prior, OrOfTemporalLags) {
  const auto p = PriorSpec::any_of({PriorSpec::temporal(1), PriorSpec::temporal(2)});
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(eval_prior(p, j, 5, {}, {}), j == 3 || j == 4) << j;
}

TEST(Prior, AndRequiresEveryChild) {
  const auto p = PriorSpec::all_of({PriorSpec::temporal(1), PriorSpec::spatial(0.1)});
  EXPECT_TRUE(eval_prior(p, 1, 2, at(0, 0), at(0.05f, 0)));
  EXPECT_FALSE(eval_prior(p, 1, 2, at(0, 0), at(0.5f, 0)));
  EXPECT_FALSE(eval_prior(p, 0, 2, at(0, 0), at(0.05f, 0)));
}

TEST(Prior, LatentMetrics) {
  ObservationMeta a, b;
  a.latent = std::vector<float>{1, 0};
  b.latent = std::vector<float>{0.9f, 0.1f};
  EXPECT_TRUE(eval_prior(PriorSpec::latent(LatentMetric::kL2, 0.2), 0, 1, a, b));
  EXPECT_FALSE(eval_prior(PriorSpec::latent(LatentMetric::kL2, 0.1), 0, 1, a, b));
  EXPECT_TRUE(eval_prior(PriorSpec::latent(LatentMetric::kCosine, 0.01), 0, 1, a, b));
}

TEST(Prior, IdentityAbsentNeverMatches) {
  ObservationMeta j, t;
  j.set_field("pointer_value", 3);
  t.set_field("faceup_value", 3);
  const auto p = PriorSpec::identity("pointer_value", "faceup_value");
  EXPECT_TRUE(eval_prior(p, 0, 1, j, t));
  t.set_field("faceup_value", std::nullopt);
  EXPECT_FALSE(eval_prior(p, 0, 1, j, t));
  j.set_field("pointer_value", std::nullopt);
  EXPECT_FALSE(eval_prior(p, 0, 1, j, t));
}

TEST(Prior, MissingMetadataIsConfigError) {
  EXPECT_THROW(eval_prior(PriorSpec::spatial(1.0), 0, 1, {}, {}), ConfigError);
  EXPECT_THROW(eval_prior(PriorSpec::latent(LatentMetric::kL2, 1.0), 0, 1, {}, {}), ConfigError);
  EXPECT_THROW(eval_prior(PriorSpec::identity("a", "b"), 0, 1, {}, {}), ConfigError);
}

TEST(PriorParser, SingleChildOr) {
  const auto p = parse_prior("or(temporal(1))");
  const auto* node = std::get_if<OrPrior>(&p.node);
  ASSERT_NE(node, nullptr);
  ASSERT_EQ(node->children.size(), 1u);
  EXPECT_EQ(node->children[0], PriorSpec::temporal(1));
}

TEST(PriorParser, CardGameExpression) {
  const auto p = parse_prior("or(temporal(1), temporal(2), identity(pointer_value, faceup_value))");
  EXPECT_EQ(p, PriorSpec::any_of({PriorSpec::temporal(1), PriorSpec::temporal(2),
                                  PriorSpec::identity("pointer_value", "faceup_value")}));
}

TEST(PriorParser, RejectsInvalid) {
  for (const char* bad : {"temporal(0)", "temporal(-1)", "temporal(1.5)", "or()", "or(temporal(1)",
                          "spatial()", "latent(manhattan, 1)", "identity(a)", "nonsense(1)",
                          "temporal(1) temporal(2)", ""}) {
    EXPECT_THROW(parse_prior(bad), ConfigError) << bad;
  }
}

TEST(PriorParser, ErrorReportsColumn) {
  try {
    parse_prior("or(temporal(1), bogus(2))");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("column 17"), std::string::npos) << e.what();
  }
}

TEST(PriorParser, ToStringRoundTripsRandomTrees) {
  Rng rng(77);
  for (int i = 0; i < 300; ++i) {
    const auto p = testing::random_prior(rng);
    EXPECT_EQ(parse_prior(to_string(p)), p) << to_string(p);
  }
}

// --- memory graph ------------------------------------------------------------

TEST(MemoryGraph, FirstInsertionHasNoEdges) {
  for (const auto& prior : {PriorSpec::temporal(1), PriorSpec::empty()}) {
    auto s = insert_observation(MemoryState(2), obs({1, 2}), prior);
    EXPECT_EQ(s.size(), 1u);
    EXPECT_TRUE(s.edges().empty());
  }
}

TEST(MemoryGraph, TemporalPathMatchesBruteForce) {
  std::vector<Observation> ep(5, obs({0}));
  const auto prior = PriorSpec::temporal(1);
  auto s = build(ep, prior);
  const std::vector<Edge> expect{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  EXPECT_EQ(s.edges(), expect);
  EXPECT_EQ(std::set<Edge>(s.edges().begin(), s.edges().end()), testing::brute_force_edges(prior, ep));
  EXPECT_EQ(neighborhood(s, 3), (std::vector<std::size_t>{2}));
}

TEST(MemoryGraph, OrNeighborhood) {
  std::vector<Observation> ep(5, obs({0}));
  auto s = build(ep, PriorSpec::any_of({PriorSpec::temporal(1), PriorSpec::temporal(2)}));
  EXPECT_EQ(neighborhood(s, 4), (std::vector<std::size_t>{2, 3}));
}

TEST(MemoryGraph, EmptyPriorHasNoNeighbors) {
  std::vector<Observation> ep(7, obs({0}));
  auto s = build(ep, PriorSpec::empty());
  EXPECT_TRUE(s.edges().empty());
  for (std::size_t i = 0; i < 7; ++i) EXPECT_TRUE(neighborhood(s, i).empty());
}

TEST(MemoryGraph, DimensionMismatchThrows) {
  MemoryState s(3);
  EXPECT_THROW(s.append(obs({1, 2}), PriorSpec::empty()), DimensionError);
}

TEST(MemoryGraph, InsertLeavesPreviousStateUntouched) {
  const auto prior = PriorSpec::temporal(1);
  auto a = build({obs({1}), obs({2})}, prior);
  auto b = insert_observation(a, obs({3}), prior);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_EQ(a.edges().size(), 1u);
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.edges().size(), 2u);
  EXPECT_EQ(b.vertex(0)[0], 1.0f);
}

TEST(MemoryGraph, EdgeListExport) {
  auto s = build({obs({1, 0}), obs({2, 0}), obs({3, 0})}, PriorSpec::temporal(1));
  EXPECT_EQ(export_edge_list(s), "3 2\n0 1\n1 2\n");
}

TEST(MemoryGraph, IncrementalEdgesEqualBruteForce) {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 50);
  testing::LeafCoverage cover;
  for (int trial = 0; trial < 200; ++trial) {
    const auto prior = testing::random_prior(rng);
    testing::count_leaves(prior, cover);
    const auto ep = testing::random_episode(rng, len(rng), 3);
    auto s = build(ep, prior);
    for (const auto& e : s.edges()) ASSERT_LT(e.from, e.to);
    std::set<Edge> got(s.edges().begin(), s.edges().end());
    ASSERT_EQ(got.size(), s.edges().size());
    ASSERT_EQ(got, testing::brute_force_edges(prior, ep)) << to_string(prior);
  }
  EXPECT_GT(cover.empty, 0);
  EXPECT_GT(cover.temporal, 0);
  EXPECT_GT(cover.spatial, 0);
  EXPECT_GT(cover.latent, 0);
  EXPECT_GT(cover.identity, 0);
  EXPECT_GT(cover.any, 0);
  EXPECT_GT(cover.all, 0);
}

// --- GNN ---------------------------------------------------------------------

ParameterStore gcm_params(const GCMConfig& c, std::uint64_t seed) {
  ParameterStore store;
  Rng rng(seed);
  init_gcm_params(store, c, rng);
  return store;
}

void set(ParameterStore& s, const std::string& name, std::vector<float> v) {
  auto d = s.get(name).mutable_data();
  ASSERT_EQ(d.size(), v.size()) << name;
  std::copy(v.begin(), v.end(), d.begin());
}

TEST(Gnn, HandComputedSingleLayer) {
  GCMConfig c{2, 2, 1, Activation::kTanh, Aggregation::kSum, PriorSpec::temporal(1)};
  auto p = gcm_params(c, 0);
  set(p, gcm_param_name(1, "root_weight"), {0.5f, 0, 0, 0.5f});
  set(p, gcm_param_name(1, "bias"), {0.1f, -0.1f});
  set(p, gcm_param_name(1, "neighbor_weight"), {1, 0, 0, -1});
  auto s = build({obs({1, 0}), obs({0, 1})}, c.prior);
  auto z = gnn_forward(p, s, c);
  EXPECT_NEAR(z.at(0, 0), std::tanh(0.6), 1e-6);
  EXPECT_NEAR(z.at(0, 1), std::tanh(-0.1), 1e-6);
  EXPECT_NEAR(z.at(1, 0), std::tanh(1.1), 1e-6);
  EXPECT_NEAR(z.at(1, 1), std::tanh(0.4), 1e-6);
}

TEST(Gnn, HandUnrolledTemporalChain) {
  GCMConfig c{1, 1, 2, Activation::kTanh, Aggregation::kSum, PriorSpec::temporal(1)};
  auto p = gcm_params(c, 0);
  const double a1 = 0.7, c1 = -0.2, n1 = 0.4, a2 = -1.1, c2 = 0.3, n2 = 0.9;
  set(p, gcm_param_name(1, "root_weight"), {float(a1)});
  set(p, gcm_param_name(1, "bias"), {float(c1)});
  set(p, gcm_param_name(1, "neighbor_weight"), {float(n1)});
  set(p, gcm_param_name(2, "root_weight"), {float(a2)});
  set(p, gcm_param_name(2, "bias"), {float(c2)});
  set(p, gcm_param_name(2, "neighbor_weight"), {float(n2)});
  MemoryState m(1);
  Tensor b;
  for (float o : {0.5f, -1.0f, 2.0f}) {
    auto out = gcm_step(obs({o}), m, p, c);
    m = out.state;
    b = out.belief;
  }
  const double h0 = std::tanh(a1 * 0.5 + c1);
  const double h1 = std::tanh(a1 * -1.0 + c1 + n1 * 0.5);
  const double h2 = std::tanh(a1 * 2.0 + c1 + n1 * -1.0);
  const double expect = std::tanh(a2 * h2 + c2 + n2 * h1);
  (void)h0;
  ASSERT_EQ(b.numel(), 1u);
  EXPECT_NEAR(b.at(0), expect, 1e-6);
}

TEST(Gnn, ParameterShapeMismatchThrows) {
  GCMConfig c{2, 3, 1, Activation::kTanh, Aggregation::kSum, PriorSpec::empty()};
  ParameterStore p;
  p.add(gcm_param_name(1, "root_weight"), Tensor::zeros({3, 3}));
  p.add(gcm_param_name(1, "bias"), Tensor::zeros({3}));
  p.add(gcm_param_name(1, "neighbor_weight"), Tensor::zeros({2, 3}));
  auto s = build({obs({1, 0})}, c.prior);
  EXPECT_THROW(gnn_forward(p, s, c), DimensionError);
}

TEST(Gnn, NeighborListOrderIsIrrelevant) {
  GCMConfig c{3, 4, 2, Activation::kTanh, Aggregation::kSum, PriorSpec::empty()};
  Rng rng(6);
  auto v = uniform_tensor({5, 3}, 1.0f, rng);
  std::vector<std::vector<std::size_t>> a{{}, {0}, {0, 1}, {2, 0, 1}, {3, 1, 2, 0}};
  std::vector<std::vector<std::size_t>> b{{}, {0}, {1, 0}, {1, 2, 0}, {0, 2, 3, 1}};
  for (auto mode : {Aggregation::kSum, Aggregation::kMean}) {
    c.aggregation = mode;
    auto p = gcm_params(c, 3);
    EXPECT_EQ(gnn_forward(p, v, a, c).to_vector(), gnn_forward(p, v, b, c).to_vector());
  }
}

TEST(Gnn, EmptyPriorEqualsMlpBitwise) {
  GCMConfig c{4, 8, 2, Activation::kTanh, Aggregation::kSum, PriorSpec::empty()};
  MlpMemory mlp(4, 8);
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = gcm_params(c, trial);
    ParameterStore q;
    q.add("mlp.w1", p.get(gcm_param_name(1, "root_weight")).clone());
    q.add("mlp.b1", p.get(gcm_param_name(1, "bias")).clone());
    q.add("mlp.w2", p.get(gcm_param_name(2, "root_weight")).clone());
    q.add("mlp.b2", p.get(gcm_param_name(2, "bias")).clone());
    auto ep = testing::random_episode(rng, 12, 4);
    MemoryState m(4);
    for (const auto& o : ep) {
      auto out = gcm_step(o, m, p, c);
      m = out.state;
      ModuleState none = MlpState{};
      EXPECT_EQ(out.belief.to_vector(), mlp.advance(q, o, none));
    }
  }
}

TEST(Gnn, FirstStepIsMlpForAnyPrior) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    GCMConfig c{3, 4, 2, Activation::kTanh, Aggregation::kSum, testing::random_prior(rng)};
    GCMConfig bare = c;
    bare.prior = PriorSpec::empty();
    auto p = gcm_params(c, trial);
    auto o = testing::random_episode(rng, 1, 3)[0];
    EXPECT_EQ(gcm_step(o, MemoryState(3), p, c).belief.to_vector(),
              gcm_step(o, MemoryState(3), p, bare).belief.to_vector());
  }
}

TEST(Gnn, OutsideReceptiveFieldChangesNothing) {
  Rng rng(99);
  std::uniform_int_distribution<std::size_t> len(3, 30);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  int perturbed = 0;
  for (int trial = 0; trial < 60; ++trial) {
    GCMConfig c{3, 5, 2, Activation::kTanh,
                trial % 2 ? Aggregation::kSum : Aggregation::kMean, testing::random_prior(rng)};
    auto p = gcm_params(c, trial);
    auto ep = testing::random_episode(rng, len(rng), 3);
    auto s = build(ep, c.prior);
    const auto newest = s.size() - 1;
    const auto field = testing::receptive_field(s, newest, 2);
    const auto base = gnn_forward(p, s, c);
    for (std::size_t v = 0; v < s.size(); ++v) {
      auto moved = ep;
      for (auto& f : moved[v].features) f += noise(rng);
      auto b = gnn_forward(p, build(moved, c.prior), c);
      bool same = true;
      for (std::size_t k = 0; k < c.hidden_size; ++k) same = same && b.at(newest, k) == base.at(newest, k);
      if (!field.count(v)) {
        ++perturbed;
        EXPECT_TRUE(same) << "vertex " << v << " prior " << to_string(c.prior);
      }
    }
  }
  EXPECT_GT(perturbed, 100);
}

TEST(Gnn, ParamCounts) {
  EXPECT_EQ(gcm_param_count({4, 2, 2, Activation::kTanh, Aggregation::kSum, {}}), 28);
  EXPECT_EQ(gcm_param_count({1, 1, 1, Activation::kTanh, Aggregation::kSum, {}}), 3);
  for (std::size_t z : {std::size_t{8}, std::size_t{16}, std::size_t{32}}) {
    for (std::size_t d : {std::size_t{2}, std::size_t{31}, std::size_t{64}, z}) {
      const auto g = gcm_param_count({d, z, 2, Activation::kTanh, Aggregation::kSum, {}});
      const std::int64_t dd = d, zz = z;
      EXPECT_EQ(g, (2 * dd * zz + zz) + (2 * zz * zz + zz));
      if (d != 64 || z == 32) EXPECT_LT(g, baseline_param_count(BaselineKind::kLstm, d, z));
    }
  }
  // Wide inputs with a narrow belief favour the LSTM: its cell only sees |z|.
  EXPECT_GT(gcm_param_count({64, 8, 2, Activation::kTanh, Aggregation::kSum, {}}),
            baseline_param_count(BaselineKind::kLstm, 64, 8));
  ParameterStore s = gcm_params({5, 7, 3, Activation::kTanh, Aggregation::kSum, {}}, 1);
  EXPECT_EQ(s.total_elements(), gcm_param_count({5, 7, 3, Activation::kTanh, Aggregation::kSum, {}}));
}

TEST(Gnn, InvalidConfigRejected) {
  EXPECT_THROW(GcmMemory({0, 4, 2, Activation::kTanh, Aggregation::kSum, {}}), ConfigError);
  EXPECT_THROW(GcmMemory({3, 0, 2, Activation::kTanh, Aggregation::kSum, {}}), ConfigError);
  EXPECT_THROW(GcmMemory({3, 4, 0, Activation::kTanh, Aggregation::kSum, {}}), ConfigError);
}

// --- GcmMemory ---------------------------------------------------------------

TEST(GcmMemoryTest, IncrementalAdvanceMatchesReferenceStepBitwise) {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    GCMConfig c{3, 6, 2, Activation::kTanh, trial % 2 ? Aggregation::kMean : Aggregation::kSum,
                testing::random_prior(rng)};
    GcmMemory mem(c);
    auto p = gcm_params(c, trial);
    auto ep = testing::random_episode(rng, 25, 3);
    ModuleState state = mem.initial_state();
    MemoryState ref(3);
    for (const auto& o : ep) {
      auto belief = mem.advance(p, o, state);
      auto out = gcm_step(o, ref, p, c);
      ref = out.state;
      ASSERT_EQ(belief, out.belief.to_vector());
    }
  }
}

TEST(GcmMemoryTest, ReplayMatchesAdvanceBitwise) {
  Rng rng(43);
  GCMConfig c{3, 6, 2, Activation::kTanh, Aggregation::kSum,
              parse_prior("or(temporal(1), temporal(2), identity(a, b))")};
  GcmMemory mem(c);
  auto p = gcm_params(c, 1);
  std::vector<std::vector<Observation>> eps{testing::random_episode(rng, 7, 3),
                                            testing::random_episode(rng, 1, 3),
                                            testing::random_episode(rng, 13, 3)};
  std::vector<std::vector<float>> stepped;
  for (const auto& ep : eps) {
    ModuleState st = mem.initial_state();
    for (const auto& o : ep) stepped.push_back(mem.advance(p, o, st));
  }
  std::vector<std::unique_ptr<EpisodePlan>> plans;
  std::vector<EpisodeRef> refs;
  for (const auto& ep : eps) plans.push_back(mem.plan(ep));
  for (std::size_t i = 0; i < eps.size(); ++i) refs.push_back({eps[i], plans[i].get()});
  auto z = mem.replay(p, refs);
  ASSERT_EQ(z.dim(0), stepped.size());
  for (std::size_t r = 0; r < stepped.size(); ++r)
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(z.at(r, k), stepped[r][k]);
}

TEST(GcmMemoryTest, CacheInvalidatedByParameterUpdate) {
  GCMConfig c{2, 4, 2, Activation::kTanh, Aggregation::kSum, PriorSpec::temporal(1)};
  GcmMemory mem(c);
  auto p = gcm_params(c, 2);
  ModuleState st = mem.initial_state();
  mem.advance(p, obs({1, 2}), st);
  mem.advance(p, obs({3, 4}), st);
  for (auto& [name, t] : p.entries()) {
    (void)name;
    const_cast<Tensor&>(t).mutable_grad()[0] = 1.0f;
  }
  optimizer_step(p, {OptimizerKind::kSgd, 0.1f, 0.0f});
  auto fresh = mem.advance(p, obs({5, 6}), st);
  auto ref = gcm_step(obs({5, 6}), build({obs({1, 2}), obs({3, 4})}, c.prior), p, c);
  EXPECT_EQ(fresh, ref.belief.to_vector());
}

TEST(GcmMemoryTest, DeterministicStep) {
  GCMConfig c{2, 4, 2, Activation::kTanh, Aggregation::kSum, PriorSpec::temporal(1)};
  GcmMemory mem(c);
  auto p = gcm_params(c, 2);
  auto prev = mem.step(p, obs({1, 2}), mem.initial_state()).state;
  auto a = mem.step(p, obs({0.5f, 1}), prev);
  auto b = mem.step(p, obs({0.5f, 1}), prev);
  EXPECT_EQ(a.belief, b.belief);
  EXPECT_EQ(std::get<MemoryState>(prev).size(), 1u);
}

}  // namespace
}  // namespace gcm
