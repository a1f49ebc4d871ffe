#include "urbe/urbe_agent.hpp"

#include <cmath>
#include <stdexcept>

namespace urbe {

double schedule_param(const std::vector<ScheduleEntry>& schedule, int episode) {
  if (schedule.empty()) throw std::invalid_argument("schedule_param: empty schedule");
  if (episode < schedule.front().episode) {
    throw std::invalid_argument("schedule_param: episode precedes first entry");
  }
  double param = schedule.front().param;
  for (const auto& entry : schedule) {
    if (entry.episode > episode) break;
    param = entry.param;
  }
  return param;
}

UrbeAgent::UrbeAgent(FiniteRMDP model, UrbeAgentConfig cfg)
    : model_(std::move(model)), cfg_(cfg) {
  model_.validate();
  if (cfg_.psi < 0.0 || cfg_.psi > 2.0) {
    throw std::invalid_argument("UrbeAgent: psi must lie in [0, 2]");
  }
  if (cfg_.beta <= 0.0) throw std::invalid_argument("UrbeAgent: beta must be positive");
  if (cfg_.replan_every < 1) {
    throw std::invalid_argument("UrbeAgent: replan_every must be at least 1");
  }
  post_ = PosteriorState::from_mdp(model_, cfg_.prior_count);
  q_ = QTable::zeros(model_.horizon, model_.num_states, model_.num_actions);
  w_ = WTable::zeros(model_.horizon, model_.num_states, model_.num_actions);
  pi_ = StochasticPolicy::uniform(model_.horizon, model_.num_states, model_.num_actions);
}

void UrbeAgent::replan(Rng& rng) {
  const auto sets = post_.build_uncertainty_set(cfg_.psi);
  auto solved = robust_q_solve(model_, sets);
  q_ = std::move(solved.q);
  pi_ = std::move(solved.pi);

  NuTable nu;
  switch (cfg_.nu_mode) {
    case UrbeAgentConfig::NuMode::kDirichlet:
      nu = build_nu_dirichlet(model_, post_);
      break;
    case UrbeAgentConfig::NuMode::kCount:
      nu = build_nu_count(model_, post_, cfg_.beta);
      break;
    case UrbeAgentConfig::NuMode::kZero:
      nu.assign(model_.horizon,
                std::vector<Vec>(model_.num_states, Vec(model_.num_actions, 0.0)));
      break;
  }

  WorstCaseKernel e_phat;
  if (cfg_.estimator == EstimatorMode::kPlugIn) {
    e_phat = std::move(solved.kernel);
  } else {
    e_phat = expected_worst_case(model_, post_, cfg_.psi, EstimatorMode::kMonteCarlo,
                                 cfg_.mc_samples, rng, &pi_);
  }
  w_ = urbe_solve(model_, e_phat, pi_, nu);
}

UrbeEpisodeStats UrbeAgent::run_episode(TabularEnv& env, Rng& rng) {
  // The posterior draw is part of the algorithm's trace; acting itself works
  // off the robust solve on the posterior-mean set.
  (void)post_.sample_model(rng);
  if (episodes_seen_ % cfg_.replan_every == 0) replan(rng);
  episodes_seen_ += 1;

  std::normal_distribution<double> normal(0.0, 1.0);
  ActionSelector select = [&](int h, int s, Rng& r) {
    const auto& q_row = q_.q[h][s];
    if (cfg_.bonus_scale == 0.0) return argmax_lowest(q_row);
    Vec perturbed(q_row.size());
    for (size_t b = 0; b < q_row.size(); ++b) {
      perturbed[b] = q_row[b] + cfg_.bonus_scale * normal(r) * std::sqrt(w_.w[h][s][b]);
    }
    return argmax_lowest(perturbed);
  };

  UrbeEpisodeStats stats;
  stats.log = rollout(env, select, rng);
  for (const auto& t : stats.log.steps) {
    post_.update_counts(t.s, t.a, t.s_next);
  }
  if (!stats.log.steps.empty()) {
    const int s0 = stats.log.steps.front().s;
    stats.q_start = q_.q[0][s0];
    stats.w_start = w_.w[0][s0];
  }
  return stats;
}

}  // namespace urbe
