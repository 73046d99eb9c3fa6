#include "gcm/env/card_game.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "gcm/errors.hpp"

namespace gcm::env {

void CardGameConfig::validate() const {
  if (n < 2 || n % 2 != 0) {
    throw ConfigError("card game: n must be even and >= 2, got " + std::to_string(n));
  }
  if (episode_limit < 1) throw ConfigError("card game: episode_limit must be positive");
}

int CardGameState::matched_count() const {
  return static_cast<int>(std::count(matched.begin(), matched.end(), true));
}

CardGame::CardGame(CardGameConfig config) : config_(config) { config_.validate(); }

std::size_t CardGame::observation_dim() const {
  const auto n = static_cast<std::size_t>(config_.n);
  return n + (n / 2 + 1) + (n + 1) + (n / 2 + 1) + 4;
}

StepResult CardGame::reset(std::uint64_t seed) {
  const int n = config_.n;
  state_ = CardGameState{};
  state_.n = n;
  state_.episode_limit = config_.episode_limit;
  state_.values.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) state_.values[static_cast<std::size_t>(i)] = i / 2;
  std::mt19937_64 rng(seed);
  for (std::size_t i = state_.values.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(state_.values[i], state_.values[pick(rng)]);
  }
  state_.face_up.assign(static_cast<std::size_t>(n), false);
  state_.matched.assign(static_cast<std::size_t>(n), false);
  done_ = false;
  return observe(0.0f);
}

StepResult CardGame::step(int action) {
  if (done_) throw ContractError("card game: step after episode end");
  if (action < kLeft || action > kFlip) throw ContractError("card game: invalid action");
  auto& s = state_;

  for (int i : s.to_hide) s.face_up[static_cast<std::size_t>(i)] = false;
  s.to_hide.clear();
  if (s.last_flipped && s.pending != s.last_flipped) s.last_flipped.reset();

  float reward = 0.0f;
  if (action == kLeft) {
    s.pointer = std::max(0, s.pointer - 1);
  } else if (action == kRight) {
    s.pointer = std::min(s.n - 1, s.pointer + 1);
  } else {
    const auto card = static_cast<std::size_t>(s.pointer);
    if (!s.matched[card] && !s.face_up[card]) {
      s.face_up[card] = true;
      s.last_flipped = s.pointer;
      if (!s.pending) {
        s.pending = s.pointer;
      } else {
        const auto other = static_cast<std::size_t>(*s.pending);
        if (s.values[other] == s.values[card]) {
          s.matched[other] = true;
          s.matched[card] = true;
          reward = 2.0f / static_cast<float>(s.n);
        } else {
          s.to_hide = {*s.pending, s.pointer};
        }
        s.pending.reset();
      }
    }
  }
  s.previous_action = action;
  ++s.steps;
  done_ = s.matched_count() == s.n || s.steps >= s.episode_limit;
  return observe(reward);
}

StepResult CardGame::observe(float reward) const {
  const auto& s = state_;
  const auto n = static_cast<std::size_t>(s.n);
  const std::size_t labels = n / 2;
  StepResult r;
  auto& f = r.observation.features;
  f.assign(observation_dim(), 0.0f);

  std::size_t base = 0;
  f[base + static_cast<std::size_t>(s.pointer)] = 1.0f;
  base += n;

  const auto ptr = static_cast<std::size_t>(s.pointer);
  std::optional<int> pointer_value;
  if (s.face_up[ptr] || s.matched[ptr]) pointer_value = s.values[ptr];
  f[base + (pointer_value ? static_cast<std::size_t>(*pointer_value) : labels)] = 1.0f;
  base += labels + 1;

  std::optional<int> faceup_value;
  if (s.last_flipped) faceup_value = s.values[static_cast<std::size_t>(*s.last_flipped)];
  f[base + (s.last_flipped ? static_cast<std::size_t>(*s.last_flipped) : n)] = 1.0f;
  base += n + 1;
  f[base + (faceup_value ? static_cast<std::size_t>(*faceup_value) : labels)] = 1.0f;
  base += labels + 1;

  f[base + (s.previous_action ? static_cast<std::size_t>(*s.previous_action) : 3)] = 1.0f;

  r.observation.meta.set_field(kPointerValueField, pointer_value);
  r.observation.meta.set_field(kFaceupValueField, faceup_value);
  r.reward = reward;
  r.done = done_;
  return r;
}

}  // namespace gcm::env
