#pragma once

#include "urbe/mdp.hpp"

namespace urbe {

// L1 ball of transition vectors around a nominal distribution, intersected
// with the probability simplex. The vector indices refer to an external
// successor support list; the set itself only sees dense positions.
struct L1UncertaintySet {
  Vec nominal;
  double radius = 0.0;
};

struct WorstCaseResult {
  double value = 0.0;
  Vec minimizer;
};

// Exact solution of  min_p p.v  over  {p in simplex : ||p - nominal||_1 <= radius}.
//
// Mass delta = min(radius/2, 1 - nominal[i*]) moves onto the index i* with
// the smallest v (ties to the lowest index); the same amount is drained from
// the other indices in decreasing order of v, never below zero. Runs in
// O(n log n). A radius above 2 is clamped to 2 (the L1 diameter of the
// simplex) with a warning on stderr.
WorstCaseResult worst_case_l1(const L1UncertaintySet& set, std::span<const double> v);

// Independent check used by tests: scans a regular grid on the simplex with
// the given step, keeping feasible points only, and returns the smallest
// p.v found. Exponential in the dimension; intended for dim <= 4.
double brute_force_oracle(const L1UncertaintySet& set, std::span<const double> v,
                          double grid_resolution);

// Product of independent per-(s,a) L1 balls. set[s][a].nominal is aligned
// with support[s][a]; rows of terminal states are unused and may be empty.
struct RectangularL1Sets {
  std::vector<std::vector<std::vector<int>>> support;
  std::vector<std::vector<L1UncertaintySet>> sets;

  void validate(const FiniteRMDP& mdp) const;
};

// One robust backup step: fills q.q[h] from q.q[h+1] and returns the
// adversarial rows it chose, aligned with sets.support.
//
//   q[h][s][a] = r[s][a] + gamma * min_{p in set(s,a)} p.u
//   u[s']      = terminal_value[s']                      if s' terminal
//              = sum_a' pi[h+1][s'][a'] * q[h+1][s'][a'] otherwise
//
// The slab q[horizon] is identically zero, so the backup at the last step
// needs no policy there. Terminal states get q rows pinned to their
// terminal value and empty adversarial rows.
std::vector<std::vector<Vec>> robust_bellman_backup(const FiniteRMDP& mdp,
                                                    const RectangularL1Sets& sets,
                                                    const StochasticPolicy& pi,
                                                    QTable& q, int h);

}  // namespace urbe
