#include "urbe/envs/mars_rover.hpp"

#include <cmath>
#include <stdexcept>

namespace urbe {

MarsRoverEnv::MarsRoverEnv(Config cfg) : cfg_(cfg) {
  if (cfg_.size < 2) throw std::invalid_argument("MarsRoverEnv: grid too small");
  set_param(cfg_.fail_prob);
}

void MarsRoverEnv::set_param(double fail_prob) {
  if (fail_prob < 0.0 || fail_prob > 1.0) {
    throw std::invalid_argument("MarsRoverEnv: fail_prob outside [0,1]");
  }
  cfg_.fail_prob = fail_prob;
}

int MarsRoverEnv::manhattan_to_goal(int cell) const {
  const int n = cfg_.size;
  return (n - 1 - cell / n) + (n - 1 - cell % n);
}

int MarsRoverEnv::clamped_target(int cell, int action) const {
  const int n = cfg_.size;
  int row = cell / n;
  int col = cell % n;
  switch (action) {
    case 0: row -= 1; break;  // up
    case 1: row += 1; break;  // down
    case 2: col -= 1; break;  // left
    case 3: col += 1; break;  // right
    default: throw std::invalid_argument("MarsRoverEnv: bad action");
  }
  row = std::clamp(row, 0, n - 1);
  col = std::clamp(col, 0, n - 1);
  return row * n + col;
}

bool MarsRoverEnv::goalward(int cell, int action) const {
  return manhattan_to_goal(clamped_target(cell, action)) < manhattan_to_goal(cell);
}

MarsRoverEnv::State MarsRoverEnv::reset(Rng& rng) const {
  std::uniform_int_distribution<int> pick(0, cfg_.start_zone * cfg_.start_zone - 1);
  const int k = pick(rng);
  return {(k / cfg_.start_zone) * cfg_.size + (k % cfg_.start_zone), kAlive};
}

std::vector<MarsRoverEnv::Outcome> MarsRoverEnv::outcomes_under_param(const State& s,
                                                                      int action,
                                                                      double fail_prob) const {
  if (s.status != kAlive) throw std::logic_error("MarsRoverEnv: step from terminal state");
  const int target = clamped_target(s.cell, action);
  std::vector<Outcome> out;
  const bool hazardous = goalward(s.cell, action);
  const double p_fail = hazardous ? fail_prob : 0.0;
  if (p_fail > 0.0) {
    out.push_back({{s.cell, kFailed}, p_fail, cfg_.reward_fail, true});
  }
  if (p_fail < 1.0) {
    if (target == goal_cell()) {
      out.push_back({{target, kGoal}, 1.0 - p_fail, cfg_.reward_success, true});
    } else {
      out.push_back({{target, kAlive}, 1.0 - p_fail, cfg_.reward_step, false});
    }
  }
  return out;
}

MarsRoverEnv::Out MarsRoverEnv::step_under_param(const State& s, int action, double fail_prob,
                                                 Rng& rng) const {
  const auto outcomes = outcomes_under_param(s, action, fail_prob);
  if (outcomes.size() == 1) {
    return {outcomes[0].next, outcomes[0].reward, outcomes[0].done};
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto& picked = unif(rng) < outcomes[0].prob ? outcomes[0] : outcomes[1];
  return {picked.next, picked.reward, picked.done};
}

MarsRoverEnv::Out MarsRoverEnv::step(const State& s, int action, Rng& rng) const {
  return step_under_param(s, action, cfg_.fail_prob, rng);
}

Eigen::VectorXd MarsRoverEnv::featurize(const State& s) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(feature_dim());
  f[s.cell] = 1.0;
  if (s.status != kAlive) f[feature_dim() - 1] = 1.0;
  return f;
}

}  // namespace urbe
