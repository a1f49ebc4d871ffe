#pragma once

#include <Eigen/Dense>

#include "urbe/mdp.hpp"

namespace urbe {

// Grid navigation with a directional hazard. Any move that strictly
// decreases the Manhattan distance to the goal fails with probability
// fail_prob; a failure ends the episode with reward_fail. Reaching the goal
// pays reward_success, every other completed move pays reward_step. Moves
// off the grid leave the rover in place (and are therefore never hazardous).
//
// Methods take the state explicitly so that hypothetical models, differing
// only in fail_prob, can step the same states.
class MarsRoverEnv {
 public:
  enum Status { kAlive = 0, kFailed = 1, kGoal = 2 };

  struct State {
    int cell = 0;
    int status = kAlive;
  };

  struct Out {
    State next;
    double reward = 0.0;
    bool done = false;
  };

  struct Outcome {
    State next;
    double prob = 0.0;
    double reward = 0.0;
    bool done = false;
  };

  struct Config {
    int size = 10;
    double fail_prob = 0.005;
    double reward_success = 1.0;
    double reward_fail = -1.0;
    double reward_step = -0.01;
    int horizon = 200;
    int start_zone = 3;  // start cell drawn uniformly from the top-left block
  };

  MarsRoverEnv() : MarsRoverEnv(Config()) {}
  explicit MarsRoverEnv(Config cfg);

  int num_actions() const { return 4; }  // up, down, left, right
  int feature_dim() const { return cfg_.size * cfg_.size + 1; }
  int horizon() const { return cfg_.horizon; }
  int goal_cell() const { return cfg_.size * cfg_.size - 1; }
  const Config& config() const { return cfg_; }

  double param() const { return cfg_.fail_prob; }
  void set_param(double fail_prob);

  State reset(Rng& rng) const;
  Out step(const State& s, int action, Rng& rng) const;
  Out step_under_param(const State& s, int action, double fail_prob, Rng& rng) const;

  // Exact outcome distribution of one move: at most two entries.
  std::vector<Outcome> outcomes_under_param(const State& s, int action,
                                            double fail_prob) const;

  // One-hot cell encoding plus a trailing terminal flag.
  Eigen::VectorXd featurize(const State& s) const;

  // True when the move from `cell` strictly decreases the distance to the
  // goal after clamping to the grid.
  bool goalward(int cell, int action) const;

 private:
  int clamped_target(int cell, int action) const;
  int manhattan_to_goal(int cell) const;

  Config cfg_;
};

}  // namespace urbe
