#include "urbe/envs/cart_pole.hpp"

#include <cmath>
#include <stdexcept>

namespace urbe {

CartPoleEnv::CartPoleEnv(Config cfg) : cfg_(cfg) {
  set_param(cfg_.pole_half_length);
}

void CartPoleEnv::set_param(double half_length) {
  if (!(half_length > 0.0)) {
    throw std::invalid_argument("CartPoleEnv: pole half-length must be positive");
  }
  cfg_.pole_half_length = half_length;
}

CartPoleEnv::State CartPoleEnv::reset(Rng& rng) const {
  std::uniform_real_distribution<double> unif(-0.05, 0.05);
  return {unif(rng), unif(rng), unif(rng), unif(rng)};
}

bool CartPoleEnv::out_of_bounds(const State& s) const {
  return std::abs(s.x) > cfg_.x_threshold || std::abs(s.theta) > cfg_.theta_threshold;
}

std::vector<CartPoleEnv::Outcome> CartPoleEnv::outcomes_under_param(const State& s, int action,
                                                                    double half_length) const {
  if (action < 0 || action >= 2) throw std::invalid_argument("CartPoleEnv: bad action");
  const double force = action == 1 ? cfg_.force_mag : -cfg_.force_mag;
  const double total_mass = cfg_.cart_mass + cfg_.pole_mass;
  const double polemass_length = cfg_.pole_mass * half_length;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);

  const double temp = (force + polemass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc = (cfg_.gravity * sin_t - cos_t * temp) /
                           (half_length * (4.0 / 3.0 - cfg_.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  State n;
  n.x = s.x + cfg_.dt * s.x_dot;
  n.x_dot = s.x_dot + cfg_.dt * x_acc;
  n.theta = s.theta + cfg_.dt * s.theta_dot;
  n.theta_dot = s.theta_dot + cfg_.dt * theta_acc;

  const bool done = out_of_bounds(n);
  return {{n, 1.0, done ? 0.0 : 1.0, done}};
}

CartPoleEnv::Out CartPoleEnv::step_under_param(const State& s, int action, double half_length,
                                               Rng&) const {
  const auto outcome = outcomes_under_param(s, action, half_length)[0];
  return {outcome.next, outcome.reward, outcome.done};
}

CartPoleEnv::Out CartPoleEnv::step(const State& s, int action, Rng& rng) const {
  return step_under_param(s, action, cfg_.pole_half_length, rng);
}

Eigen::VectorXd CartPoleEnv::featurize(const State& s) const {
  Eigen::VectorXd f(4);
  f << s.x / cfg_.x_threshold, s.x_dot / 3.0, s.theta / cfg_.theta_threshold, s.theta_dot / 3.0;
  return f;
}

}  // namespace urbe
