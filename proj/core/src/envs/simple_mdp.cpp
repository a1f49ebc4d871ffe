#include "urbe/envs/simple_mdp.hpp"

#include <stdexcept>

namespace urbe {

namespace {

// Intermediate node reached by each risky action.
constexpr int kNodeOf[] = {-1, 2, 4, 5};

}  // namespace

SimpleMdpEnv::SimpleMdpEnv(double p_win) { set_p_win(p_win); }

void SimpleMdpEnv::set_p_win(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("SimpleMdpEnv: p_win outside [0,1]");
  p_win_ = p;
}

int SimpleMdpEnv::reset(Rng&) {
  cur_ = kStart;
  done_ = false;
  return cur_;
}

TabularEnv::Step SimpleMdpEnv::step(int action, Rng& rng) {
  if (done_) throw std::logic_error("SimpleMdpEnv: step after episode end");
  const Step out = step_under_param(cur_, action, p_win_, rng);
  cur_ = out.next_state;
  done_ = out.done;
  return out;
}

TabularEnv::Step SimpleMdpEnv::step_under_param(int state, int action, double p_win,
                                                Rng& rng) const {
  if (action < 0 || action >= kNumActions) {
    throw std::invalid_argument("SimpleMdpEnv: bad action");
  }
  if (state == kStart) {
    if (action == 0) return {kSafe, kSafeReward, true};
    return {kNodeOf[action], 0.0, false};
  }
  if (state == 2 || state == 4 || state == 5) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < p_win) return {kWin, kWinReward, true};
    return {kLose, 0.0, true};
  }
  throw std::logic_error("SimpleMdpEnv: step from terminal state");
}

Vec SimpleMdpEnv::featurize(int state) const {
  Vec f(kNumStates + 1, 0.0);
  f[state] = 1.0;
  if (is_terminal_state(state)) f[kNumStates] = 1.0;
  return f;
}

FiniteRMDP SimpleMdpEnv::as_rmdp() {
  FiniteRMDP m;
  m.num_states = kNumStates;
  m.num_actions = kNumActions;
  m.horizon = 2;
  m.gamma = 1.0;
  m.r_max = 1.0;
  m.reward.assign(kNumStates, std::vector<double>(kNumActions, 0.0));
  m.reward[kStart][0] = kSafeReward;
  m.successors.assign(kNumStates, std::vector<std::vector<int>>(kNumActions));
  m.terminal.assign(kNumStates, 0);
  m.terminal_value.assign(kNumStates, 0.0);
  for (int s : {kSafe, kWin, kLose}) m.terminal[s] = 1;
  m.terminal_value[kWin] = kWinReward;

  m.successors[kStart][0] = {kSafe};
  for (int a = 1; a < kNumActions; ++a) m.successors[kStart][a] = {kNodeOf[a]};
  for (int node : {2, 4, 5}) {
    for (int a = 0; a < kNumActions; ++a) m.successors[node][a] = {kWin, kLose};
  }
  m.validate();
  return m;
}

}  // namespace urbe
