#pragma once

#include "urbe/robust_opt.hpp"

namespace urbe {

// The per-(s,a) L1 balls handed to the robust solvers are centered on
// posterior means, so the posterior module exports them under this name.
using PosteriorUncertaintySet = RectangularL1Sets;

// Independent Dirichlet posterior over each transition row, restricted to
// the declared successor support of its (s,a) pair. Counts only ever grow.
//
// By default counts are shared across episode steps (time-homogeneous
// dynamics). A per-step mode keeps one count table per step index; the
// layered random MDPs used in the variance tests need it.
class PosteriorState {
 public:
  PosteriorState() = default;
  PosteriorState(int num_states, int num_actions,
                 std::vector<std::vector<std::vector<int>>> support,
                 std::vector<std::uint8_t> terminal, double prior_count = 1.0,
                 int per_step_horizon = 0);

  static PosteriorState from_mdp(const FiniteRMDP& mdp, double prior_count = 1.0,
                                 bool per_step = false);

  void update_counts(int s, int a, int s_next, int h = 0);

  // (prior + counts) normalized; aligned with support(s, a).
  Vec posterior_mean(int s, int a, int h = 0) const;

  // Upper bound (prior + counts)_k / (sum(prior + counts))^2 on the
  // variance of one component of the row.
  double posterior_component_variance(int s, int a, int k, int h = 0) const;

  // Number of observed visits of (s, a), prior mass excluded.
  double visit_count(int s, int a, int h = 0) const;

  // Dirichlet draw per (s,a) row via normalized Gamma samples. Rows of
  // terminal states stay empty.
  std::vector<std::vector<Vec>> sample_model(Rng& rng, int h = 0) const;

  // L1 balls of the given radius around the posterior means. The scalar
  // overload uses one radius everywhere.
  PosteriorUncertaintySet build_uncertainty_set(double psi, int h = 0) const;
  PosteriorUncertaintySet build_uncertainty_set(const std::vector<std::vector<double>>& psi,
                                                int h = 0) const;

  // beta^2 / max(1, visit count): the count-based local uncertainty used
  // with function approximation and as a cheap tabular fallback.
  double local_uncertainty_tabular(int s, int a, double beta, int h = 0) const;

  // q_max^2 * sum over the support of variance-bound / mean. With the
  // bound above every summand collapses to 1 / sum(prior + counts), so this
  // is q_max^2 * |support| / posterior mass; kept as the explicit sum to
  // mirror the moment formulas it comes from.
  double local_uncertainty_dirichlet(int s, int a, double q_max, int h = 0) const;

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  bool per_step() const { return per_step_horizon_ > 0; }
  int per_step_horizon() const { return per_step_horizon_; }
  bool is_terminal(int s) const { return terminal_[s] != 0; }
  const std::vector<std::vector<std::vector<int>>>& support() const { return support_; }

 private:
  const Vec& counts_row(int s, int a, int h) const;
  Vec& counts_row(int s, int a, int h);
  int slab(int h) const;

  int num_states_ = 0;
  int num_actions_ = 0;
  int per_step_horizon_ = 0;  // 0 means collapsed counts
  double prior_count_ = 1.0;
  std::vector<std::vector<std::vector<int>>> support_;
  std::vector<std::uint8_t> terminal_;
  // counts_[slab][s][a] aligned with support_[s][a]; slab 0 in collapsed mode.
  std::vector<std::vector<std::vector<Vec>>> counts_;
};

}  // namespace urbe
