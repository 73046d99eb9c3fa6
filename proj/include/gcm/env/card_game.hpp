#pragma once

// Memory card game: n face-down cards holding n/2 pairs. The agent moves a
// pointer and flips cards; flipped pairs that match stay face-up, others are
// turned back over on the next step.

#include <optional>
#include <vector>

#include "gcm/env/environment.hpp"

namespace gcm::env {

struct CardGameConfig {
  int n = 8;
  int episode_limit = 30;

  void validate() const;
};

struct CardGameState {
  int n = 0;
  std::vector<int> values;
  std::vector<bool> face_up;
  std::vector<bool> matched;
  int pointer = 0;
  std::optional<int> last_flipped;
  // Face-up but unmatched first card of the current pair.
  std::optional<int> pending;
  // Mismatched pair shown for one observation before turning face-down.
  std::vector<int> to_hide;
  std::optional<int> previous_action;
  int steps = 0;
  int episode_limit = 0;

  int matched_count() const;
};

class CardGame final : public Environment {
 public:
  enum Action : int { kLeft = 0, kRight = 1, kFlip = 2 };

  explicit CardGame(CardGameConfig config = {});

  std::string_view name() const override { return "cardgame"; }
  // pointer one-hot (n) | pointer value (n/2 + 1) | last-flipped index (n + 1)
  // | last-flipped value (n/2 + 1) | previous action (4).
  std::size_t observation_dim() const override;
  int num_actions() const override { return 3; }

  StepResult reset(std::uint64_t seed) override;
  StepResult step(int action) override;

  const CardGameState& state() const { return state_; }
  bool done() const { return done_; }

 private:
  StepResult observe(float reward) const;

  CardGameConfig config_;
  CardGameState state_;
  bool done_ = true;
};

inline constexpr const char* kPointerValueField = "pointer_value";
inline constexpr const char* kFaceupValueField = "faceup_value";

}  // namespace gcm::env
