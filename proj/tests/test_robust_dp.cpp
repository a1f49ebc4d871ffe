#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "urbe/envs/simple_mdp.hpp"
#include "urbe/robust_dp.hpp"
#include "urbe/urbe_agent.hpp"

using namespace urbe;
using urbe::test::random_dag_mdp;
using urbe::test::random_policy;
using urbe::test::seeded_posterior;

namespace {

RectangularL1Sets sets_at_mean(const PosteriorState& post, double psi) {
  return post.build_uncertainty_set(psi);
}

}  // namespace

TEST_CASE("zero radius robust solve equals the plain expected backup") {
  Rng rng(11);
  for (int it = 0; it < 25; ++it) {
    const FiniteRMDP mdp = random_dag_mdp(rng);
    PosteriorState post = PosteriorState::from_mdp(mdp);
    const auto solved = robust_q_solve(mdp, sets_at_mean(post, 0.0));
    // With radius zero the adversary is pinned to the nominal, so the plain
    // backup through the chosen kernel must reproduce the same table.
    const QTable plain = mean_q_solve(mdp, solved.kernel, solved.pi);
    for (int h = 0; h <= mdp.horizon; ++h) {
      for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
          CHECK(solved.q.at(h, s, a) == doctest::Approx(plain.at(h, s, a)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("widening the uncertainty set never raises robust values") {
  Rng rng(12);
  for (int it = 0; it < 25; ++it) {
    const FiniteRMDP mdp = random_dag_mdp(rng);
    PosteriorState post = seeded_posterior(mdp, rng);
    // Collapse to one slab: evaluate a fixed random policy on slab-0 sets.
    PosteriorState flat = PosteriorState::from_mdp(mdp);
    const StochasticPolicy pi = random_policy(mdp, rng);
    const auto narrow = robust_q_solve(mdp, sets_at_mean(flat, 0.2), &pi);
    const auto wide = robust_q_solve(mdp, sets_at_mean(flat, 1.0), &pi);
    for (int h = 0; h < mdp.horizon; ++h) {
      for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
          CHECK(wide.q.at(h, s, a) <= narrow.q.at(h, s, a) + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("greedy solve dominates any fixed policy") {
  Rng rng(13);
  for (int it = 0; it < 20; ++it) {
    const FiniteRMDP mdp = random_dag_mdp(rng);
    PosteriorState post = PosteriorState::from_mdp(mdp);
    const auto sets = sets_at_mean(post, 0.5);
    const auto greedy = robust_q_solve(mdp, sets);
    const StochasticPolicy pi = random_policy(mdp, rng);
    const auto fixed = robust_q_solve(mdp, sets, &pi);
    for (int h = 0; h < mdp.horizon; ++h) {
      for (int s = 0; s < mdp.num_states; ++s) {
        if (mdp.terminal[s]) continue;
        double v_greedy = greedy.q.at(h, s, 0);
        double v_fixed = 0.0;
        for (int a = 0; a < mdp.num_actions; ++a) {
          v_greedy = std::max(v_greedy, greedy.q.at(h, s, a));
          v_fixed += pi.pi[h][s][a] * fixed.q.at(h, s, a);
        }
        CHECK(v_greedy >= v_fixed - 1e-10);
      }
    }
  }
}

TEST_CASE("terminal rows are pinned and the boundary slab stays zero") {
  Rng rng(14);
  const FiniteRMDP mdp = random_dag_mdp(rng);
  PosteriorState post = PosteriorState::from_mdp(mdp);
  const auto solved = robust_q_solve(mdp, sets_at_mean(post, 0.4));
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      CHECK(solved.q.at(mdp.horizon, s, a) == 0.0);
      if (mdp.terminal[s]) {
        for (int h = 0; h < mdp.horizon; ++h) {
          CHECK(solved.q.at(h, s, a) == doctest::Approx(mdp.terminal_value[s]));
          CHECK(solved.kernel.rows[h][s][a].empty());
        }
      }
    }
  }
}

TEST_CASE("constant reward shift moves fixed-policy values by the discounted run length") {
  Rng rng(15);
  FiniteRMDP mdp = random_dag_mdp(rng);
  mdp.gamma = 1.0;
  // Zero the terminal values so the shift is the only effect.
  for (auto& tv : mdp.terminal_value) tv = 0.0;
  PosteriorState post = PosteriorState::from_mdp(mdp);
  const StochasticPolicy pi = random_policy(mdp, rng);
  const auto sets = sets_at_mean(post, 0.3);
  const auto base = robust_q_solve(mdp, sets, &pi);

  FiniteRMDP shifted = mdp;
  const double c = 0.25;
  shifted.r_max += c;
  for (auto& row : shifted.reward) {
    for (double& r : row) r += c;
  }
  const auto moved = robust_q_solve(shifted, sets, &pi);
  // With gamma = 1, zero terminal values, and every non-terminal holding the
  // full action set, an episode from (h, s) earns the shift once per step
  // until it ends. That run length depends on when the adversarial chain
  // hits a terminal state, so only the one-step slab is exact.
  const int h = mdp.horizon - 1;
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a) {
      CHECK(moved.q.at(h, s, a) == doctest::Approx(base.q.at(h, s, a) + c).epsilon(1e-10));
    }
  }
}

TEST_CASE("urbe recursion is linear in the local uncertainty") {
  Rng rng(16);
  for (int it = 0; it < 10; ++it) {
    const FiniteRMDP mdp = random_dag_mdp(rng);
    PosteriorState post = seeded_posterior(mdp, rng);
    const StochasticPolicy pi = random_policy(mdp, rng);
    Rng solver_rng(100 + it);
    const auto e_phat =
        expected_worst_case(mdp, post, 0.5, EstimatorMode::kPlugIn, 0, solver_rng, &pi);

    const NuTable nu1 = build_nu_dirichlet(mdp, post);
    const NuTable nu2 = build_nu_count(mdp, post, 0.5);
    NuTable sum = nu1;
    for (size_t h = 0; h < sum.size(); ++h) {
      for (size_t s = 0; s < sum[h].size(); ++s) {
        for (size_t a = 0; a < sum[h][s].size(); ++a) sum[h][s][a] += nu2[h][s][a];
      }
    }
    const WTable w1 = urbe_solve(mdp, e_phat, pi, nu1);
    const WTable w2 = urbe_solve(mdp, e_phat, pi, nu2);
    const WTable ws = urbe_solve(mdp, e_phat, pi, sum);
    for (int h = 0; h <= mdp.horizon; ++h) {
      for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
          CHECK(ws.at(h, s, a) ==
                doctest::Approx(w1.at(h, s, a) + w2.at(h, s, a)).epsilon(1e-10));
          CHECK(w1.at(h, s, a) >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("urbe values vanish with zero local uncertainty and at the boundary") {
  Rng rng(17);
  const FiniteRMDP mdp = random_dag_mdp(rng);
  PosteriorState post = PosteriorState::from_mdp(mdp);
  const auto solved = robust_q_solve(mdp, sets_at_mean(post, 0.5));
  const NuTable zero(mdp.horizon,
                     std::vector<Vec>(mdp.num_states, Vec(mdp.num_actions, 0.0)));
  const WTable w = urbe_solve(mdp, solved.kernel, solved.pi, zero);
  for (int h = 0; h <= mdp.horizon; ++h) {
    for (int s = 0; s < mdp.num_states; ++s) {
      for (int a = 0; a < mdp.num_actions; ++a) CHECK(w.at(h, s, a) == 0.0);
    }
  }
}

TEST_CASE("plug-in and monte carlo adversary estimates agree under tight posteriors") {
  const FiniteRMDP mdp = SimpleMdpEnv::as_rmdp();
  PosteriorState post = PosteriorState::from_mdp(mdp);
  // Hammer the posterior so draws concentrate on the mean.
  for (int node : {2, 4, 5}) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      for (int i = 0; i < 4000; ++i) post.update_counts(node, a, SimpleMdpEnv::kWin);
      for (int i = 0; i < 4000; ++i) post.update_counts(node, a, SimpleMdpEnv::kLose);
    }
  }
  Rng rng(5);
  const auto plug = expected_worst_case(mdp, post, 0.3, EstimatorMode::kPlugIn, 0, rng);
  const auto mc = expected_worst_case(mdp, post, 0.3, EstimatorMode::kMonteCarlo, 64, rng);
  for (int h = 0; h < mdp.horizon; ++h) {
    for (int s = 0; s < mdp.num_states; ++s) {
      if (mdp.terminal[s]) continue;
      for (int a = 0; a < mdp.num_actions; ++a) {
        REQUIRE(plug.rows[h][s][a].size() == mc.rows[h][s][a].size());
        CHECK(is_probability_vector(mc.rows[h][s][a], 1e-9));
        for (size_t k = 0; k < plug.rows[h][s][a].size(); ++k) {
          CHECK(mc.rows[h][s][a][k] == doctest::Approx(plug.rows[h][s][a][k]).epsilon(0.05));
        }
      }
    }
  }
}

TEST_CASE("urbe dominance on a handful of small dag mdps") {
  // Desk-scale preview of the acceptance property: fewer MDPs, fewer draws.
  Rng rng(18);
  for (int it = 0; it < 3; ++it) {
    const FiniteRMDP mdp = random_dag_mdp(rng, 6, 2, 3);
    PosteriorState post = seeded_posterior(mdp, rng, 12);
    const StochasticPolicy pi = random_policy(mdp, rng);
    const double psi = 0.4;

    Rng est_rng(900 + it);
    const auto e_phat =
        expected_worst_case(mdp, post, psi, EstimatorMode::kMonteCarlo, 512, est_rng, &pi);
    const WTable w = urbe_solve(mdp, e_phat, pi, build_nu_dirichlet(mdp, post));

    Rng mc_rng(7000 + it);
    const auto oracle = urbe::test::mc_variance_of_robust_q(mdp, post, psi, pi, 600, mc_rng);
    for (int h = 0; h < mdp.horizon; ++h) {
      for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
          CHECK(w.at(h, s, a) + 3.0 * oracle.se[h][s][a] + 1e-12 >= oracle.var[h][s][a]);
        }
      }
    }
  }
}

TEST_CASE("schedule lookup is piecewise constant from the last passed entry") {
  const std::vector<ScheduleEntry> sched{{0, 0.001}, {250, 0.8}, {500, 0.1}, {750, 0.9}};
  CHECK(schedule_param(sched, 0) == doctest::Approx(0.001));
  CHECK(schedule_param(sched, 249) == doctest::Approx(0.001));
  CHECK(schedule_param(sched, 250) == doctest::Approx(0.8));
  CHECK(schedule_param(sched, 700) == doctest::Approx(0.1));
  CHECK(schedule_param(sched, 5000) == doctest::Approx(0.9));
}

TEST_CASE("tabular agent learns counts and reports start-state tables") {
  const FiniteRMDP mdp = SimpleMdpEnv::as_rmdp();
  UrbeAgentConfig cfg;
  cfg.psi = 0.5;
  UrbeAgent agent(mdp, cfg);
  SimpleMdpEnv env(0.9);
  Rng rng(3);

  double before = 0.0;
  for (int a = 0; a < mdp.num_actions; ++a) before += agent.posterior().visit_count(0, a);
  CHECK(before == 0.0);

  const auto stats = agent.run_episode(env, rng);
  CHECK(stats.q_start.size() == static_cast<size_t>(mdp.num_actions));
  CHECK(stats.w_start.size() == static_cast<size_t>(mdp.num_actions));
  for (double w : stats.w_start) CHECK(w >= 0.0);

  double after = 0.0;
  for (int a = 0; a < mdp.num_actions; ++a) after += agent.posterior().visit_count(0, a);
  CHECK(after == 1.0);  // exactly one decision at the start state per episode
}

TEST_CASE("identical seeds reproduce identical tabular episodes") {
  const FiniteRMDP mdp = SimpleMdpEnv::as_rmdp();
  UrbeAgentConfig cfg;
  cfg.psi = 0.5;

  auto run = [&](long seed) {
    UrbeAgent agent(mdp, cfg);
    SimpleMdpEnv env(0.5);
    Rng rng(static_cast<std::uint64_t>(seed));
    std::vector<double> rets;
    for (int e = 0; e < 30; ++e) rets.push_back(agent.run_episode(env, rng).log.ret);
    return rets;
  };
  CHECK(run(41) == run(41));
  CHECK(run(41) != run(42));
}

TEST_CASE("replan gating keeps the q table frozen between replans") {
  const FiniteRMDP mdp = SimpleMdpEnv::as_rmdp();
  UrbeAgentConfig cfg;
  cfg.psi = 0.5;
  cfg.replan_every = 4;
  UrbeAgent agent(mdp, cfg);
  // A skewed win probability so the observed branches cannot leave the
  // posterior means where the prior put them.
  SimpleMdpEnv env(1.0);
  Rng rng(9);

  agent.run_episode(env, rng);  // episode 0 replans
  const QTable snap = agent.q();
  for (int e = 1; e < 4; ++e) {
    agent.run_episode(env, rng);
    CHECK(agent.q().q == snap.q);
  }
  agent.run_episode(env, rng);  // episode 4 replans again
  CHECK(agent.q().q != snap.q);
}

TEST_CASE("agent configuration is validated") {
  const FiniteRMDP mdp = SimpleMdpEnv::as_rmdp();
  UrbeAgentConfig bad;
  bad.psi = -0.1;
  CHECK_THROWS_AS(UrbeAgent(mdp, bad), std::invalid_argument);
  bad = UrbeAgentConfig{};
  bad.psi = 2.5;
  CHECK_THROWS_AS(UrbeAgent(mdp, bad), std::invalid_argument);
  bad = UrbeAgentConfig{};
  bad.beta = 0.0;
  CHECK_THROWS_AS(UrbeAgent(mdp, bad), std::invalid_argument);
  bad = UrbeAgentConfig{};
  bad.replan_every = 0;
  CHECK_THROWS_AS(UrbeAgent(mdp, bad), std::invalid_argument);
}
