#include <gtest/gtest.h>

#include <cmath>

#include "gcm/baselines.hpp"
#include "gcm/errors.hpp"
#include "oracles.hpp"

namespace gcm {
namespace {

Observation obs(std::vector<float> f) { return Observation{std::move(f), {}}; }

void zero_all(ParameterStore& s) {
  for (auto& [name, t] : s.entries()) {
    (void)name;
    for (auto& v : const_cast<Tensor&>(t).mutable_data()) v = 0.0f;
  }
}

TEST(Mlp, ZeroWeightsGiveZeroBelief) {
  MlpMemory m(3, 4);
  ParameterStore p;
  Rng rng(0);
  m.init_params(p, rng);
  zero_all(p);
  ModuleState st = m.initial_state();
  EXPECT_EQ(m.advance(p, obs({1, -2, 3}), st), std::vector<float>(4, 0.0f));
}

TEST(Mlp, MatchesClosedForm) {
  MlpMemory m(2, 2);
  ParameterStore p;
  Rng rng(4);
  m.init_params(p, rng);
  ModuleState st = m.initial_state();
  const std::vector<float> x{0.3f, -0.8f};
  auto b = m.advance(p, obs(x), st);
  auto w1 = p.get("mlp.w1").to_vector(), b1 = p.get("mlp.b1").to_vector();
  auto w2 = p.get("mlp.w2").to_vector(), b2 = p.get("mlp.b2").to_vector();
  double h[2];
  for (int j = 0; j < 2; ++j) h[j] = std::tanh(x[0] * w1[j] + x[1] * w1[2 + j] + b1[j]);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(b[j], std::tanh(h[0] * w2[j] + h[1] * w2[2 + j] + b2[j]), 1e-6);
}

TEST(Mlp, WrongInputWidthThrows) {
  MlpMemory m(3, 4);
  ParameterStore p;
  Rng rng(0);
  m.init_params(p, rng);
  ModuleState st = m.initial_state();
  EXPECT_THROW(m.advance(p, obs({1, 2}), st), DimensionError);
}

TEST(Lstm, AllZeroGivesZeroState) {
  LstmMemory m(3, 4);
  ParameterStore p;
  Rng rng(0);
  m.init_params(p, rng);
  zero_all(p);
  ModuleState st = m.initial_state();
  EXPECT_EQ(std::get<LstmState>(st).h, std::vector<float>(4, 0.0f));
  auto b = m.advance(p, obs({0, 0, 0}), st);
  EXPECT_EQ(b, std::vector<float>(4, 0.0f));
  EXPECT_EQ(std::get<LstmState>(st).c, std::vector<float>(4, 0.0f));
}

// Forget gate driven to 1 and input gate to 0 through the bias: c is carried over.
TEST(Lstm, SaturatedForgetGateKeepsCell) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t z = 3;
    LstmMemory m(2, z);
    ParameterStore p;
    m.init_params(p, rng);
    auto bias = p.get("lstm.cell.bias").mutable_data();
    for (std::size_t k = 0; k < z; ++k) {
      bias[k] = -60.0f;
      bias[z + k] = 60.0f;
    }
    LstmState s;
    std::uniform_real_distribution<float> u(-1, 1);
    for (std::size_t k = 0; k < z; ++k) {
      s.h.push_back(u(rng));
      s.c.push_back(u(rng));
    }
    ModuleState st = s;
    auto b = m.advance(p, obs({u(rng), u(rng)}), st);
    const auto& next = std::get<LstmState>(st);
    for (std::size_t k = 0; k < z; ++k) {
      EXPECT_EQ(next.c[k], s.c[k]);
      EXPECT_EQ(b[k], next.h[k]);
      EXPECT_LE(std::abs(next.h[k]), std::abs(std::tanh(s.c[k])) + 1e-7);
    }
  }
}

TEST(Lstm, CellMatchesGateAlgebra) {
  const std::size_t z = 2;
  ParameterStore p;
  Rng rng(8);
  p.add("c.w_ih", uniform_tensor({z, 4 * z}, 1.0f, rng));
  p.add("c.w_hh", uniform_tensor({z, 4 * z}, 1.0f, rng));
  p.add("c.bias", uniform_tensor({4 * z}, 1.0f, rng));
  auto x = uniform_tensor({1, z}, 1.0f, rng);
  auto h = uniform_tensor({1, z}, 1.0f, rng);
  auto c = uniform_tensor({1, z}, 1.0f, rng);
  auto out = lstm_cell(p, "c.", x, h, c);
  auto wi = p.get("c.w_ih").to_vector(), wh = p.get("c.w_hh").to_vector();
  auto bb = p.get("c.bias").to_vector();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t k = 0; k < z; ++k) {
    double g[4];
    for (int gate = 0; gate < 4; ++gate) {
      const std::size_t col = gate * z + k;
      double s = bb[col];
      for (std::size_t r = 0; r < z; ++r) s += x.at(0, r) * wi[r * 4 * z + col] + h.at(0, r) * wh[r * 4 * z + col];
      g[gate] = s;
    }
    const double cn = sig(g[1]) * c.at(0, k) + sig(g[0]) * std::tanh(g[2]);
    EXPECT_NEAR(out.c.at(0, k), cn, 1e-6);
    EXPECT_NEAR(out.h.at(0, k), sig(g[3]) * std::tanh(cn), 1e-6);
  }
}

TEST(Lstm, ReplayMatchesAdvanceBitwise) {
  LstmMemory m(3, 5);
  ParameterStore p;
  Rng rng(3);
  m.init_params(p, rng);
  std::vector<std::vector<Observation>> eps{testing::random_episode(rng, 4, 3),
                                            testing::random_episode(rng, 9, 3),
                                            testing::random_episode(rng, 1, 3)};
  std::vector<std::vector<float>> stepped;
  std::vector<EpisodeRef> refs;
  for (const auto& ep : eps) {
    ModuleState st = m.initial_state();
    for (const auto& o : ep) stepped.push_back(m.advance(p, o, st));
    refs.push_back({ep, nullptr});
  }
  auto z = m.replay(p, refs);
  ASSERT_EQ(z.dim(0), stepped.size());
  for (std::size_t r = 0; r < stepped.size(); ++r)
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(z.at(r, k), stepped[r][k]);
}

TEST(Mlp, ReplayMatchesAdvanceBitwise) {
  MlpMemory m(3, 5);
  ParameterStore p;
  Rng rng(3);
  m.init_params(p, rng);
  auto ep = testing::random_episode(rng, 6, 3);
  std::vector<EpisodeRef> refs{{ep, nullptr}};
  auto z = m.replay(p, refs);
  ModuleState st = m.initial_state();
  for (std::size_t r = 0; r < ep.size(); ++r) {
    auto b = m.advance(p, ep[r], st);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(z.at(r, k), b[k]);
  }
}

TEST(Lstm, InitBounds) {
  const std::size_t z = 16;
  LstmMemory m(4, z);
  ParameterStore p;
  Rng rng(1);
  m.init_params(p, rng);
  const float k = 1.0f / std::sqrt(float(z));
  for (const char* name : {"lstm.cell.w_ih", "lstm.cell.w_hh"})
    for (float v : p.get(name).data()) EXPECT_LE(std::abs(v), k);
  for (float v : p.get("lstm.cell.bias").data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(p.total_elements(), m.param_count());
}

TEST(BaselineCounts, ClosedForms) {
  EXPECT_EQ(baseline_param_count(BaselineKind::kMlp, 4, 2), 16);
  EXPECT_EQ(baseline_param_count(BaselineKind::kLstm, 1, 1), 16);
  for (std::int64_t z : {8, 16, 32}) {
    for (std::int64_t d : {2, 20, 64}) {
      const auto mlp = (d * z + z) + (z * z + z);
      EXPECT_EQ(baseline_param_count(BaselineKind::kMlp, d, z), mlp);
      EXPECT_EQ(baseline_param_count(BaselineKind::kLstm, d, z), mlp + 4 * (2 * z * z + z));
    }
  }
}

TEST(Determinism, BaselinesStepIdentically) {
  LstmMemory m(2, 3);
  ParameterStore p;
  Rng rng(0);
  m.init_params(p, rng);
  auto a = m.step(p, obs({0.1f, 0.2f}), m.initial_state());
  auto b = m.step(p, obs({0.1f, 0.2f}), m.initial_state());
  EXPECT_EQ(a.belief, b.belief);
  EXPECT_EQ(std::get<LstmState>(a.state), std::get<LstmState>(b.state));
}

}  // namespace
}  // namespace gcm
