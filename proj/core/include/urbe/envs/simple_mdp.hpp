#pragma once

#include "urbe/mdp.hpp"

namespace urbe {

// Seven-state decision problem with one safe action and three identical
// risky ones. From the start state, action 0 moves deterministically to a
// terminal state paying 0.14. Actions 1..3 move to an intermediate node;
// from there the episode resolves to a winning terminal paying 1 with
// probability p_win, otherwise to a losing terminal paying 0. Episodes are
// two steps long and undiscounted, so the safe action is optimal exactly
// when p_win < 0.14.
class SimpleMdpEnv final : public TabularEnv {
 public:
  static constexpr int kNumStates = 7;
  static constexpr int kNumActions = 4;
  static constexpr int kStart = 0;
  static constexpr int kSafe = 1;  // safe terminal
  static constexpr int kWin = 3;   // winning terminal
  static constexpr int kLose = 6;  // losing terminal
  static constexpr double kSafeReward = 0.14;
  static constexpr double kWinReward = 1.0;

  explicit SimpleMdpEnv(double p_win = 0.5);

  int num_states() const override { return kNumStates; }
  int num_actions() const override { return kNumActions; }
  int horizon() const override { return 2; }
  double gamma() const override { return 1.0; }

  int reset(Rng& rng) override;
  Step step(int action, Rng& rng) override;

  // Same transition law with an explicit state and win probability; used
  // for stepping hypothetical models.
  Step step_under_param(int state, int action, double p_win, Rng& rng) const;

  double p_win() const { return p_win_; }
  void set_p_win(double p);

  // One-hot state encoding plus a trailing terminal flag.
  Vec featurize(int state) const;

  static bool is_terminal_state(int state) {
    return state == kSafe || state == kWin || state == kLose;
  }

  // Planning-side description: rewards, terminal values, successor sets.
  // The win/lose rewards live in terminal values because they depend on how
  // the branch resolves; the safe reward sits on the deterministic edge.
  static FiniteRMDP as_rmdp();

 private:
  double p_win_;
  int cur_ = kStart;
  bool done_ = false;
};

}  // namespace urbe
