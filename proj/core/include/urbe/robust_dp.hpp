#pragma once

#include "urbe/posterior.hpp"
#include "urbe/robust_opt.hpp"

namespace urbe {

// Adversarial transition rows chosen during a robust solve.
// rows[h][s][a] is aligned with the successor support of (s, a); rows of
// terminal states are empty. Slabs run over steps h in [0, horizon).
struct WorstCaseKernel {
  std::vector<std::vector<std::vector<Vec>>> rows;

  int horizon() const { return static_cast<int>(rows.size()); }
};

// w[h][s][a] for h in [0, horizon]; the slab at h == horizon stays zero,
// mirroring QTable. Entries are variance-scale and never negative.
struct WTable {
  std::vector<std::vector<Vec>> w;

  static WTable zeros(int horizon, int num_states, int num_actions);
  int horizon() const { return static_cast<int>(w.size()) - 1; }
  double at(int h, int s, int a) const { return w[h][s][a]; }
};

// Per-step local uncertainty table, nu[h][s][a] for h in [0, horizon).
using NuTable = std::vector<std::vector<Vec>>;

struct RobustSolveResult {
  QTable q;
  StochasticPolicy pi;      // the evaluated policy; greedy one if none was given
  WorstCaseKernel kernel;   // adversarial rows per step
};

// Backward induction with the exact L1 adversary at every (h, s, a).
// With a null policy the solve is greedy: the policy used for the
// continuation at step h+1 is the greedy policy of the slab computed there.
// The overload taking one set per step serves posteriors kept per step.
RobustSolveResult robust_q_solve(const FiniteRMDP& mdp, const RectangularL1Sets& sets,
                                 const StochasticPolicy* pi = nullptr);
RobustSolveResult robust_q_solve(const FiniteRMDP& mdp,
                                 std::span<const RectangularL1Sets> sets_per_step,
                                 const StochasticPolicy* pi = nullptr);

// Uncertainty Bellman recursion:
//   w[h][s][a] = nu[h][s][a]
//              + gamma^2 * sum_{s'} E_phat[h][s][a][s'] * sum_{a'} pi[h+1][s'][a'] w[h+1][s'][a']
// Terminal successors contribute nothing and the boundary slab is zero.
WTable urbe_solve(const FiniteRMDP& mdp, const WorstCaseKernel& e_phat,
                  const StochasticPolicy& pi, const NuTable& nu);

// Plain expected backup through the same kernel, used for the posterior
// mean of the value estimate:
//   qbar[h][s][a] = r[s][a] + gamma * sum_{s'} E_phat[h][s][a][s'] * u[s']
// with the same terminal-value continuation as the robust backup.
QTable mean_q_solve(const FiniteRMDP& mdp, const WorstCaseKernel& e_phat,
                    const StochasticPolicy& pi);

enum class EstimatorMode {
  kPlugIn,      // worst-case rows of the solve on the posterior-mean set
  kMonteCarlo,  // average worst-case rows over posterior re-centerings
};

// Estimate of the expected adversarial kernel E[phat]. Plug-in solves once
// on the set centered at the posterior mean. Monte Carlo draws num_samples
// kernels from the posterior, re-centers the set on each draw (same radius
// and support), re-solves, and averages the minimizer rows, renormalizing
// each averaged row. Both are approximations: the distribution of the
// minimizer is not tracked exactly anywhere.
WorstCaseKernel expected_worst_case(const FiniteRMDP& mdp, const PosteriorState& post,
                                    double psi, EstimatorMode mode, int num_samples,
                                    Rng& rng, const StochasticPolicy* pi = nullptr);

// nu tables for the tabular agent, one slab per step (identical slabs when
// the posterior collapses counts across steps). Entries of terminal states
// are zero.
NuTable build_nu_dirichlet(const FiniteRMDP& mdp, const PosteriorState& post);
NuTable build_nu_count(const FiniteRMDP& mdp, const PosteriorState& post, double beta);

}  // namespace urbe
