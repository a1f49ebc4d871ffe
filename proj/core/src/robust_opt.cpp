#include "urbe/robust_opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace urbe {

WorstCaseResult worst_case_l1(const L1UncertaintySet& set, std::span<const double> v) {
  const size_t n = set.nominal.size();
  if (n == 0 || v.size() != n) {
    throw std::invalid_argument("worst_case_l1: dimension mismatch");
  }
  double radius = set.radius;
  if (radius < 0.0) throw std::invalid_argument("worst_case_l1: negative radius");
  if (radius > 2.0) {
    std::fprintf(stderr, "worst_case_l1: radius %g exceeds the simplex diameter, clamping to 2\n",
                 radius);
    radius = 2.0;
  }

  WorstCaseResult res;
  res.minimizer.assign(set.nominal.begin(), set.nominal.end());
  auto& p = res.minimizer;

  const int lo = argmin_lowest(v);
  const double delta = std::min(radius / 2.0, 1.0 - p[lo]);
  p[lo] += delta;

  // Drain the added mass from the most expensive components first.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return v[i] > v[j]; });
  double remaining = delta;
  for (int idx : order) {
    if (remaining <= 0.0) break;
    if (idx == lo) continue;
    const double take = std::min(p[idx], remaining);
    p[idx] -= take;
    remaining -= take;
  }

  res.value = dot(p, v);
  return res;
}

namespace {

// Recursively enumerates grid points with `ticks` remaining units spread
// over coordinates [i, n) and evaluates feasible completions.
void scan_grid(const L1UncertaintySet& set, std::span<const double> v, int ticks_total,
               size_t i, int ticks_left, Vec& point, double& best) {
  const size_t n = set.nominal.size();
  const double step = 1.0 / ticks_total;
  if (i + 1 == n) {
    point[i] = ticks_left * step;
    if (l1_distance(point, set.nominal) <= set.radius + 1e-12) {
      best = std::min(best, dot(point, v));
    }
    return;
  }
  for (int t = 0; t <= ticks_left; ++t) {
    point[i] = t * step;
    scan_grid(set, v, ticks_total, i + 1, ticks_left - t, point, best);
  }
}

}  // namespace

double brute_force_oracle(const L1UncertaintySet& set, std::span<const double> v,
                          double grid_resolution) {
  if (!(grid_resolution > 0.0) || grid_resolution > 1.0) {
    throw std::invalid_argument("brute_force_oracle: bad grid resolution");
  }
  const int ticks = std::max(1, static_cast<int>(std::lround(1.0 / grid_resolution)));
  Vec point(set.nominal.size(), 0.0);
  double best = std::numeric_limits<double>::infinity();
  scan_grid(set, v, ticks, 0, ticks, point, best);
  if (!std::isfinite(best)) {
    // The nominal itself is always feasible; reaching here means the grid
    // missed the ball entirely, so fall back to the nominal expectation.
    best = dot(set.nominal, v);
  }
  return best;
}

void RectangularL1Sets::validate(const FiniteRMDP& mdp) const {
  if (support.size() != static_cast<size_t>(mdp.num_states) ||
      sets.size() != static_cast<size_t>(mdp.num_states)) {
    throw std::invalid_argument("RectangularL1Sets: state dimension mismatch");
  }
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    if (support[s].size() != static_cast<size_t>(mdp.num_actions) ||
        sets[s].size() != static_cast<size_t>(mdp.num_actions)) {
      throw std::invalid_argument("RectangularL1Sets: action dimension mismatch");
    }
    for (int a = 0; a < mdp.num_actions; ++a) {
      const auto& supp = support[s][a];
      const auto& set = sets[s][a];
      if (supp.size() != set.nominal.size()) {
        throw std::invalid_argument("RectangularL1Sets: support/nominal size mismatch");
      }
      validate_simplex(set.nominal);
      for (int nxt : supp) {
        if (nxt < 0 || nxt >= mdp.num_states) {
          throw std::invalid_argument("RectangularL1Sets: successor out of range");
        }
      }
    }
  }
}

std::vector<std::vector<Vec>> robust_bellman_backup(const FiniteRMDP& mdp,
                                                    const RectangularL1Sets& sets,
                                                    const StochasticPolicy& pi,
                                                    QTable& q, int h) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int H = q.horizon();
  if (h < 0 || h >= H) throw std::invalid_argument("robust_bellman_backup: bad step index");

  // Continuation value of landing in each state at step h+1.
  Vec u(S, 0.0);
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal[s]) {
      u[s] = mdp.terminal_value[s];
    } else if (h + 1 < H) {
      u[s] = dot(pi.pi[h + 1][s], q.q[h + 1][s]);
    }
  }

  std::vector<std::vector<Vec>> rows(S, std::vector<Vec>(A));
  Vec u_supp;
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal[s]) {
      for (int a = 0; a < A; ++a) q.q[h][s][a] = mdp.terminal_value[s];
      continue;
    }
    for (int a = 0; a < A; ++a) {
      const auto& supp = sets.support[s][a];
      u_supp.resize(supp.size());
      for (size_t k = 0; k < supp.size(); ++k) u_supp[k] = u[supp[k]];
      auto wc = worst_case_l1(sets.sets[s][a], u_supp);
      q.q[h][s][a] = mdp.reward[s][a] + mdp.gamma * wc.value;
      rows[s][a] = std::move(wc.minimizer);
    }
  }
  return rows;
}

}  // namespace urbe
