#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "urbe/deep_agent.hpp"
#include "urbe/mdp.hpp"
#include "urbe/posterior.hpp"
#include "urbe/robust_dp.hpp"
#include "urbe/urbe_agent.hpp"

namespace urbe::test {

// Random layered MDP whose transition graph is a DAG: every successor has a
// strictly larger state id, the last state is absorbing. Rewards are U(-1,1)
// so r_max = 1.
inline FiniteRMDP random_dag_mdp(Rng& rng, int max_states = 8, int max_actions = 3,
                                 int max_horizon = 5) {
  std::uniform_int_distribution<int> pick_s(3, max_states);
  std::uniform_int_distribution<int> pick_a(2, max_actions);
  std::uniform_int_distribution<int> pick_h(2, max_horizon);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  FiniteRMDP m;
  m.num_states = pick_s(rng);
  m.num_actions = pick_a(rng);
  m.horizon = pick_h(rng);
  m.gamma = 0.9;
  m.r_max = 1.0;
  m.reward.assign(m.num_states, std::vector<double>(m.num_actions, 0.0));
  m.successors.assign(m.num_states, std::vector<std::vector<int>>(m.num_actions));
  m.terminal.assign(m.num_states, 0);
  m.terminal_value.assign(m.num_states, 0.0);

  for (int s = 0; s < m.num_states; ++s) {
    const bool must_terminate = s == m.num_states - 1;
    if (must_terminate || (s > 0 && u01(rng) < 0.2)) {
      m.terminal[s] = 1;
      m.terminal_value[s] = unif(rng);
      continue;
    }
    for (int a = 0; a < m.num_actions; ++a) {
      m.reward[s][a] = unif(rng);
      std::vector<int> later;
      for (int t = s + 1; t < m.num_states; ++t) later.push_back(t);
      std::shuffle(later.begin(), later.end(), rng);
      std::uniform_int_distribution<int> pick_k(1, std::min<int>(4, later.size()));
      later.resize(pick_k(rng));
      std::sort(later.begin(), later.end());
      m.successors[s][a] = std::move(later);
    }
  }
  m.validate();
  return m;
}

inline StochasticPolicy random_policy(const FiniteRMDP& mdp, Rng& rng) {
  std::gamma_distribution<double> gam(1.0, 1.0);
  StochasticPolicy pi = StochasticPolicy::uniform(mdp.horizon, mdp.num_states, mdp.num_actions);
  for (auto& slab : pi.pi) {
    for (auto& row : slab) {
      double total = 0.0;
      for (double& x : row) total += (x = gam(rng) + 1e-3);
      for (double& x : row) x /= total;
    }
  }
  pi.validate();
  return pi;
}

// Per-step posterior seeded with a random number of observations per
// (h, s, a) drawn from a random ground-truth row.
inline PosteriorState seeded_posterior(const FiniteRMDP& mdp, Rng& rng, int max_obs = 20) {
  PosteriorState post = PosteriorState::from_mdp(mdp, 1.0, true);
  std::gamma_distribution<double> gam(1.0, 1.0);
  for (int h = 0; h < mdp.horizon; ++h) {
    for (int s = 0; s < mdp.num_states; ++s) {
      if (mdp.terminal[s]) continue;
      for (int a = 0; a < mdp.num_actions; ++a) {
        const auto& supp = mdp.successors[s][a];
        Vec truth(supp.size());
        double total = 0.0;
        for (double& x : truth) total += (x = gam(rng) + 1e-3);
        for (double& x : truth) x /= total;
        std::uniform_int_distribution<int> pick_n(0, max_obs);
        std::discrete_distribution<int> pick_next(truth.begin(), truth.end());
        const int n = pick_n(rng);
        for (int i = 0; i < n; ++i) post.update_counts(s, a, supp[pick_next(rng)], h);
      }
    }
  }
  return post;
}

// Monte-Carlo posterior variance of robust Q: re-centers the uncertainty set
// at kernels drawn from the posterior, re-solves with the policy fixed, and
// returns the per-(h,s,a) sample variance plus the standard error of that
// variance estimate (via the fourth central moment).
struct VarianceOracle {
  std::vector<std::vector<Vec>> var;  // [h][s][a]
  std::vector<std::vector<Vec>> se;
};

inline VarianceOracle mc_variance_of_robust_q(const FiniteRMDP& mdp, const PosteriorState& post,
                                              double psi, const StochasticPolicy& pi, int n,
                                              Rng& rng) {
  const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
  auto zeros = [&] { return std::vector<std::vector<Vec>>(H, std::vector<Vec>(S, Vec(A, 0.0))); };
  auto s1 = zeros(), s2 = zeros(), s3 = zeros(), s4 = zeros();

  for (int draw = 0; draw < n; ++draw) {
    std::vector<RectangularL1Sets> sets(H);
    for (int h = 0; h < H; ++h) {
      sets[h].support = post.support();
      sets[h].sets.assign(S, std::vector<L1UncertaintySet>(A));
      const auto model = post.sample_model(rng, h);
      for (int s = 0; s < S; ++s) {
        if (mdp.terminal[s]) continue;
        for (int a = 0; a < A; ++a) sets[h].sets[s][a] = {model[s][a], psi};
      }
    }
    const RobustSolveResult solved = robust_q_solve(mdp, sets, &pi);
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const double q = solved.q.at(h, s, a);
          s1[h][s][a] += q;
          s2[h][s][a] += q * q;
          s3[h][s][a] += q * q * q;
          s4[h][s][a] += q * q * q * q;
        }
      }
    }
  }

  VarianceOracle out{zeros(), zeros()};
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double mu = s1[h][s][a] / n;
        const double m2 = std::max(0.0, s2[h][s][a] / n - mu * mu);
        const double m3 = s3[h][s][a] / n - 3.0 * mu * s2[h][s][a] / n + 2.0 * mu * mu * mu;
        (void)m3;
        const double m4 = s4[h][s][a] / n - 4.0 * mu * s3[h][s][a] / n +
                          6.0 * mu * mu * s2[h][s][a] / n - 3.0 * mu * mu * mu * mu;
        out.var[h][s][a] = m2 * n / (n - 1.0);
        const double var_of_var =
            (m4 - (n - 3.0) / (n - 1.0) * m2 * m2) / n;
        out.se[h][s][a] = std::sqrt(std::max(0.0, var_of_var));
      }
    }
  }
  return out;
}

// In-process version of the deep training loop used by the experiment
// driver: linear epsilon anneal, horizon truncation, piecewise-constant
// parameter schedule.
struct DeepTrainOptions {
  int episodes = 1000;
  int update_every = 1;
  double eps_start = 1.0;
  double eps_final = 1e-3;
  double eps_decay_frac = 0.6;
  std::vector<ScheduleEntry> schedule;  // empty keeps the env's nominal
};

struct DeepTrainResult {
  DeepAgent agent;
  std::vector<double> returns;
  std::vector<double> smoothed;  // trailing 50-episode mean
};

// Trains the given agent in place for opt.episodes more episodes, appending
// per-episode returns and their trailing mean; calling it twice continues
// where the first call stopped (the anneal index restarts per call).
inline void run_episodes(GenerativeEnv& env, DeepAgent& agent, const DeepTrainOptions& opt,
                         Rng& rng, std::vector<double>& returns, std::vector<double>& smoothed,
                         long& global_steps) {
  const double span = std::max(1.0, opt.eps_decay_frac * opt.episodes);
  const double nominal = env.param();

  for (int e = 0; e < opt.episodes; ++e) {
    const double p = opt.schedule.empty() ? nominal : schedule_param(opt.schedule, e);
    if (env.param() != p) env.set_param(p);
    const double eps = std::max(
        opt.eps_final, opt.eps_start + (opt.eps_final - opt.eps_start) * (e / span));

    VectorXd feat = env.reset(rng);
    double ep_return = 0.0;
    int steps = 0;
    bool fin = false;
    while (!fin) {
      const int action = agent.act(feat, eps, rng);
      VectorXd raw = env.raw_state();
      auto out = env.step(action, rng);
      steps += 1;
      const bool truncated = !out.done && steps >= env.horizon();
      fin = out.done || truncated;
      StepRecord rec;
      rec.raw_s = std::move(raw);
      rec.feat_s = feat;
      rec.feat_next = out.feat_next;
      rec.a = action;
      rec.r = out.reward;
      rec.done = fin;
      rec.truncated = truncated;
      rec.h = steps - 1;
      agent.observe(std::move(rec));
      ep_return += out.reward;
      feat = std::move(out.feat_next);
      global_steps += 1;
      if (global_steps % opt.update_every == 0 && agent.ready()) agent.train_step(env, rng);
    }
    returns.push_back(ep_return);
    const size_t lo = returns.size() > 50 ? returns.size() - 50 : 0;
    double m = 0.0;
    for (size_t i = lo; i < returns.size(); ++i) m += returns[i];
    smoothed.push_back(m / (returns.size() - lo));
  }
}

inline DeepTrainResult train_deep_agent(GenerativeEnv& env, const DeepAgentConfig& acfg,
                                        const DeepTrainOptions& opt, long seed) {
  Rng rng(static_cast<std::uint64_t>(seed));
  DeepAgent agent(acfg, env.feature_dim(), env.num_actions(), rng);
  std::vector<double> returns, smoothed;
  returns.reserve(opt.episodes);
  long global_steps = 0;
  run_episodes(env, agent, opt, rng, returns, smoothed, global_steps);
  return {std::move(agent), std::move(returns), std::move(smoothed)};
}

struct DeepEvalStats {
  double mean_return = 0.0;
  double success_rate = 0.0;
};

// Greedy-or-Thompson test rollouts under one env parameter; the agent acts
// by its own rule with the epsilon floor removed.
inline DeepEvalStats eval_deep_agent(GenerativeEnv& env, DeepAgent& agent, double param,
                                     int episodes, long seed) {
  env.set_param(param);
  Rng rng(static_cast<std::uint64_t>(seed));
  DeepEvalStats stats;
  for (int e = 0; e < episodes; ++e) {
    VectorXd feat = env.reset(rng);
    double ret = 0.0;
    int steps = 0;
    bool fin = false;
    while (!fin) {
      const int action = agent.act(feat, 0.0, rng);
      auto out = env.step(action, rng);
      ret += out.reward;
      steps += 1;
      fin = out.done || steps >= env.horizon();
      feat = std::move(out.feat_next);
    }
    stats.mean_return += ret;
    if (env.succeeded()) stats.success_rate += 1.0;
  }
  stats.mean_return /= episodes;
  stats.success_rate /= episodes;
  return stats;
}

}  // namespace urbe::test
