#include <benchmark/benchmark.h>

#include <random>

#include "urbe/deep_agent.hpp"
#include "urbe/nn.hpp"
#include "urbe/posterior.hpp"
#include "urbe/robust_dp.hpp"

namespace {

urbe::Vec random_simplex(int d, urbe::Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  urbe::Vec p(d);
  double total = 0.0;
  for (double& x : p) total += (x = u01(rng) + 1e-3);
  for (double& x : p) x /= total;
  return p;
}

void BM_WorstCaseL1(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  urbe::Rng rng(7);
  std::uniform_real_distribution<double> vals(-1.0, 1.0);
  const urbe::L1UncertaintySet set{random_simplex(d, rng), 0.6};
  urbe::Vec v(d);
  for (double& x : v) x = vals(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(urbe::worst_case_l1(set, v));
  }
}
BENCHMARK(BM_WorstCaseL1)->Arg(3)->Arg(10)->Arg(50);

void BM_ShermanMorrison(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  urbe::Rng rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  urbe::MatrixXd sigma = 0.01 * urbe::MatrixXd::Identity(d, d);
  urbe::VectorXd phi(d);
  for (int i = 0; i < d; ++i) phi[i] = normal(rng);
  for (auto _ : state) {
    sigma = urbe::sherman_morrison_update(sigma, phi);
    benchmark::DoNotOptimize(sigma);
  }
}
BENCHMARK(BM_ShermanMorrison)->Arg(32)->Arg(128);

void BM_MlpForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  urbe::Rng rng(7);
  urbe::Mlp net({4, 128, 128, 128, 2}, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  urbe::MatrixXd x(4, batch), g(2, batch);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (int i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  urbe::Mlp::Grads grads = net.make_grads();
  for (auto _ : state) {
    urbe::Mlp::Cache cache;
    benchmark::DoNotOptimize(net.forward(x, cache));
    grads.setZero();
    benchmark::DoNotOptimize(net.backward(cache, g, grads));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(32)->Arg(256);

void BM_RobustQSolve(benchmark::State& state) {
  urbe::Rng rng(7);
  urbe::FiniteRMDP mdp;
  mdp.num_states = 8;
  mdp.num_actions = 3;
  mdp.horizon = 5;
  mdp.gamma = 0.9;
  mdp.r_max = 1.0;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  mdp.reward.assign(8, std::vector<double>(3, 0.0));
  mdp.successors.assign(8, std::vector<std::vector<int>>(3));
  mdp.terminal.assign(8, 0);
  mdp.terminal_value.assign(8, 0.0);
  mdp.terminal[7] = 1;
  for (int s = 0; s < 7; ++s) {
    for (int a = 0; a < 3; ++a) {
      mdp.reward[s][a] = unif(rng);
      for (int t = s + 1; t < 8; ++t) mdp.successors[s][a].push_back(t);
    }
  }
  mdp.validate();
  urbe::PosteriorState post = urbe::PosteriorState::from_mdp(mdp);
  const urbe::RectangularL1Sets sets = post.build_uncertainty_set(0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(urbe::robust_q_solve(mdp, sets));
  }
}
BENCHMARK(BM_RobustQSolve);

}  // namespace

BENCHMARK_MAIN();
