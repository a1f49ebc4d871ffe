#pragma once

#include <Eigen/Dense>

#include "urbe/mdp.hpp"

namespace urbe {

// Pole balancing with explicit-Euler integration. The uncertain parameter
// is the pole half-length; everything else is fixed by the config. Reward
// is 1 for every step that keeps the state inside the position and angle
// thresholds and 0 for the step that leaves them.
class CartPoleEnv {
 public:
  struct State {
    double x = 0.0;
    double x_dot = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;
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
    double pole_half_length = 0.75;
    double gravity = 9.8;
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double force_mag = 10.0;
    double dt = 0.02;
    double theta_threshold = 12.0 * 3.14159265358979323846 / 180.0;
    double x_threshold = 2.4;
    int horizon = 200;
  };

  CartPoleEnv() : CartPoleEnv(Config()) {}
  explicit CartPoleEnv(Config cfg);

  int num_actions() const { return 2; }  // push left, push right
  int feature_dim() const { return 4; }
  int horizon() const { return cfg_.horizon; }
  const Config& config() const { return cfg_; }

  double param() const { return cfg_.pole_half_length; }
  void set_param(double half_length);

  State reset(Rng& rng) const;
  Out step(const State& s, int action, Rng& rng) const;
  Out step_under_param(const State& s, int action, double half_length, Rng& rng) const;

  // The dynamics are deterministic given the parameter: one outcome.
  std::vector<Outcome> outcomes_under_param(const State& s, int action,
                                            double half_length) const;

  // Raw state scaled to roughly unit range.
  Eigen::VectorXd featurize(const State& s) const;

  bool out_of_bounds(const State& s) const;

 private:
  Config cfg_;
};

}  // namespace urbe
