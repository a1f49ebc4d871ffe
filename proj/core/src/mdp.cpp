#include "urbe/mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace urbe {

bool is_probability_vector(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= -tol)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

void validate_simplex(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= -tol)) {
      throw std::invalid_argument("simplex: component " + std::to_string(i) +
                                  " is negative: " + std::to_string(p[i]));
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > tol) {
    throw std::invalid_argument("simplex: components sum to " +
                                std::to_string(sum));
  }
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

int argmin_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

void FiniteRMDP::validate() const {
  if (num_states <= 0 || num_actions <= 0 || horizon <= 0) {
    throw std::invalid_argument("FiniteRMDP: sizes must be positive");
  }
  if (!(gamma > 0.0) || gamma > 1.0) {
    throw std::invalid_argument("FiniteRMDP: gamma must be in (0, 1]");
  }
  auto check_state_dim = [&](size_t n, const char* what) {
    if (n != static_cast<size_t>(num_states)) {
      throw std::invalid_argument(std::string("FiniteRMDP: ") + what +
                                  " has wrong state dimension");
    }
  };
  check_state_dim(reward.size(), "reward");
  check_state_dim(successors.size(), "successors");
  check_state_dim(terminal.size(), "terminal");
  check_state_dim(terminal_value.size(), "terminal_value");
  for (int s = 0; s < num_states; ++s) {
    if (reward[s].size() != static_cast<size_t>(num_actions) ||
        successors[s].size() != static_cast<size_t>(num_actions)) {
      throw std::invalid_argument("FiniteRMDP: action dimension mismatch at state " +
                                  std::to_string(s));
    }
    for (int a = 0; a < num_actions; ++a) {
      if (std::abs(reward[s][a]) > r_max + 1e-12) {
        throw std::invalid_argument("FiniteRMDP: |reward| exceeds r_max at (" +
                                    std::to_string(s) + "," + std::to_string(a) + ")");
      }
      if (!terminal[s] && successors[s][a].empty()) {
        throw std::invalid_argument("FiniteRMDP: non-terminal state " + std::to_string(s) +
                                    " has empty successor set");
      }
      for (int nxt : successors[s][a]) {
        if (nxt < 0 || nxt >= num_states) {
          throw std::invalid_argument("FiniteRMDP: successor out of range");
        }
      }
    }
    if (std::abs(terminal_value[s]) > r_max + 1e-12) {
      throw std::invalid_argument("FiniteRMDP: |terminal_value| exceeds r_max at state " +
                                  std::to_string(s));
    }
  }
}

StochasticPolicy StochasticPolicy::uniform(int horizon, int num_states, int num_actions) {
  StochasticPolicy p;
  p.pi.assign(horizon, std::vector<Vec>(num_states, Vec(num_actions, 1.0 / num_actions)));
  return p;
}

void StochasticPolicy::validate() const {
  for (const auto& slab : pi) {
    for (const auto& row : slab) validate_simplex(row);
  }
}

QTable QTable::zeros(int horizon, int num_states, int num_actions) {
  QTable t;
  t.q.assign(horizon + 1, std::vector<Vec>(num_states, Vec(num_actions, 0.0)));
  return t;
}

double QTable::max_abs() const {
  double m = 0.0;
  for (const auto& slab : q)
    for (const auto& row : slab)
      for (double x : row) m = std::max(m, std::abs(x));
  return m;
}

StochasticPolicy policy_greedy_from_q(const QTable& q) {
  StochasticPolicy p;
  const int horizon = q.horizon();
  p.pi.assign(horizon, {});
  for (int h = 0; h < horizon; ++h) {
    const auto& slab = q.q[h];
    p.pi[h].assign(slab.size(), {});
    for (size_t s = 0; s < slab.size(); ++s) {
      Vec row(slab[s].size(), 0.0);
      row[argmax_lowest(slab[s])] = 1.0;
      p.pi[h][s] = std::move(row);
    }
  }
  return p;
}

EpisodeLog rollout(TabularEnv& env, const ActionSelector& select, Rng& rng) {
  EpisodeLog log;
  int s = env.reset(rng);
  double discount = 1.0;
  const double gamma = env.gamma();
  for (int h = 0; h < env.horizon(); ++h) {
    const int a = select(h, s, rng);
    const auto step = env.step(a, rng);
    log.steps.push_back({h, s, a, step.reward, step.next_state});
    log.ret += discount * step.reward;
    discount *= gamma;
    s = step.next_state;
    if (step.done) break;
  }
  return log;
}

}  // namespace urbe
