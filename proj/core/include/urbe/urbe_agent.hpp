#pragma once

#include "urbe/robust_dp.hpp"

namespace urbe {

struct UrbeAgentConfig {
  double psi = 0.5;   // radius of the posterior uncertainty balls
  double beta = 0.5;  // scale of the count-based local uncertainty

  // Local uncertainty fed into the variance recursion. kDirichlet uses the
  // posterior moment formulas, kCount uses beta^2 / max(1, n), kZero turns
  // the bonus off entirely (the agent then acts greedily).
  enum class NuMode { kDirichlet, kCount, kZero };
  NuMode nu_mode = NuMode::kDirichlet;

  EstimatorMode estimator = EstimatorMode::kPlugIn;
  int mc_samples = 32;      // draws for the Monte Carlo estimator
  double prior_count = 1.0; // symmetric Dirichlet pseudo-count
  double bonus_scale = 1.0; // multiplier on zeta * sqrt(w) at act time
  int replan_every = 1;     // episodes between full robust-DP resolves
};

// Piecewise-constant parameter schedule keyed by episode index.
struct ScheduleEntry {
  int episode = 0;
  double param = 0.0;
};

// Returns the parameter of the last entry whose episode index is <= episode.
// Entries must be sorted by episode; the first entry must start at or below
// the queried index.
double schedule_param(const std::vector<ScheduleEntry>& schedule, int episode);

struct UrbeEpisodeStats {
  EpisodeLog log;
  Vec q_start;  // robust Q at the episode's first state, per action
  Vec w_start;  // uncertainty estimate there, per action
};

// Tabular agent: each episode it draws a model from the posterior (kept for
// the log only), rebuilds the uncertainty set around the posterior means,
// solves the robust program greedily, propagates the uncertainty table, and
// acts with a = argmax_b q[h][s][b] + bonus_scale * zeta_b * sqrt(w[h][s][b])
// with fresh standard normal zeta per step and action. Observed transitions
// update the Dirichlet counts.
class UrbeAgent {
 public:
  UrbeAgent(FiniteRMDP model, UrbeAgentConfig cfg);

  UrbeEpisodeStats run_episode(TabularEnv& env, Rng& rng);

  const PosteriorState& posterior() const { return post_; }
  const QTable& q() const { return q_; }
  const WTable& w() const { return w_; }
  const StochasticPolicy& greedy_policy() const { return pi_; }

  // Re-solves from the current posterior without acting; run_episode does
  // this itself, the accessor exists for inspection between episodes.
  void replan(Rng& rng);

 private:
  FiniteRMDP model_;
  UrbeAgentConfig cfg_;
  PosteriorState post_;
  QTable q_;
  WTable w_;
  StochasticPolicy pi_;
  long episodes_seen_ = 0;
};

}  // namespace urbe
