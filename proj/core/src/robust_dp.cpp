#include "urbe/robust_dp.hpp"

#include <cmath>
#include <stdexcept>

namespace urbe {

WTable WTable::zeros(int horizon, int num_states, int num_actions) {
  WTable t;
  t.w.assign(horizon + 1, std::vector<Vec>(num_states, Vec(num_actions, 0.0)));
  return t;
}

RobustSolveResult robust_q_solve(const FiniteRMDP& mdp, const RectangularL1Sets& sets,
                                 const StochasticPolicy* pi) {
  std::vector<RectangularL1Sets> per_step(mdp.horizon, sets);
  return robust_q_solve(mdp, std::span<const RectangularL1Sets>(per_step), pi);
}

RobustSolveResult robust_q_solve(const FiniteRMDP& mdp,
                                 std::span<const RectangularL1Sets> sets_per_step,
                                 const StochasticPolicy* pi) {
  const int H = mdp.horizon;
  if (static_cast<int>(sets_per_step.size()) != H) {
    throw std::invalid_argument("robust_q_solve: need one uncertainty set per step");
  }
  const bool greedy = (pi == nullptr);
  RobustSolveResult res;
  res.q = QTable::zeros(H, mdp.num_states, mdp.num_actions);
  res.kernel.rows.assign(H, {});
  if (greedy) {
    res.pi.pi.assign(H, std::vector<Vec>(mdp.num_states, Vec(mdp.num_actions, 0.0)));
  } else {
    res.pi = *pi;
  }

  for (int h = H - 1; h >= 0; --h) {
    res.kernel.rows[h] = robust_bellman_backup(mdp, sets_per_step[h], res.pi, res.q, h);
    if (greedy) {
      for (int s = 0; s < mdp.num_states; ++s) {
        Vec row(mdp.num_actions, 0.0);
        row[argmax_lowest(res.q.q[h][s])] = 1.0;
        res.pi.pi[h][s] = std::move(row);
      }
    }
  }
  return res;
}

namespace {

// Continuation sum_{a'} pi[h+1][s'][a'] * table[h+1][s'][a'] for
// non-terminal s'; terminal states contribute `terminal_of(s')`.
Vec continuation(const FiniteRMDP& mdp, const StochasticPolicy& pi,
                 const std::vector<Vec>& next_slab, int h_next, int horizon,
                 const std::function<double(int)>& terminal_of) {
  Vec u(mdp.num_states, 0.0);
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) {
      u[s] = terminal_of(s);
    } else if (h_next < horizon) {
      u[s] = dot(pi.pi[h_next][s], next_slab[s]);
    }
  }
  return u;
}

}  // namespace

WTable urbe_solve(const FiniteRMDP& mdp, const WorstCaseKernel& e_phat,
                  const StochasticPolicy& pi, const NuTable& nu) {
  const int H = mdp.horizon;
  if (e_phat.horizon() != H || static_cast<int>(nu.size()) != H) {
    throw std::invalid_argument("urbe_solve: slab count mismatch");
  }
  WTable out = WTable::zeros(H, mdp.num_states, mdp.num_actions);
  const double g2 = mdp.gamma * mdp.gamma;
  for (int h = H - 1; h >= 0; --h) {
    const Vec u = continuation(mdp, pi, out.w[h + 1], h + 1, H, [](int) { return 0.0; });
    for (int s = 0; s < mdp.num_states; ++s) {
      if (mdp.terminal[s]) continue;
      for (int a = 0; a < mdp.num_actions; ++a) {
        const auto& supp = e_phat.rows[h][s][a];
        const auto& ids = (mdp.successors[s][a]);
        double acc = 0.0;
        for (size_t k = 0; k < supp.size(); ++k) acc += supp[k] * u[ids[k]];
        out.w[h][s][a] = nu[h][s][a] + g2 * acc;
      }
    }
  }
  return out;
}

QTable mean_q_solve(const FiniteRMDP& mdp, const WorstCaseKernel& e_phat,
                    const StochasticPolicy& pi) {
  const int H = mdp.horizon;
  if (e_phat.horizon() != H) {
    throw std::invalid_argument("mean_q_solve: slab count mismatch");
  }
  QTable out = QTable::zeros(H, mdp.num_states, mdp.num_actions);
  for (int h = H - 1; h >= 0; --h) {
    const Vec u = continuation(mdp, pi, out.q[h + 1], h + 1, H,
                               [&](int s) { return mdp.terminal_value[s]; });
    for (int s = 0; s < mdp.num_states; ++s) {
      if (mdp.terminal[s]) {
        for (int a = 0; a < mdp.num_actions; ++a) out.q[h][s][a] = mdp.terminal_value[s];
        continue;
      }
      for (int a = 0; a < mdp.num_actions; ++a) {
        const auto& row = e_phat.rows[h][s][a];
        const auto& ids = mdp.successors[s][a];
        double acc = 0.0;
        for (size_t k = 0; k < row.size(); ++k) acc += row[k] * u[ids[k]];
        out.q[h][s][a] = mdp.reward[s][a] + mdp.gamma * acc;
      }
    }
  }
  return out;
}

WorstCaseKernel expected_worst_case(const FiniteRMDP& mdp, const PosteriorState& post,
                                    double psi, EstimatorMode mode, int num_samples,
                                    Rng& rng, const StochasticPolicy* pi) {
  const bool per_step = post.per_step();
  auto sets_for = [&](int h) { return post.build_uncertainty_set(psi, h); };

  auto solve_with_sets = [&](std::vector<RectangularL1Sets>&& sets) {
    return robust_q_solve(mdp, std::span<const RectangularL1Sets>(sets), pi);
  };
  auto base_sets = [&]() {
    std::vector<RectangularL1Sets> sets;
    sets.reserve(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) sets.push_back(sets_for(per_step ? h : 0));
    return sets;
  };

  if (mode == EstimatorMode::kPlugIn) {
    return solve_with_sets(base_sets()).kernel;
  }

  if (num_samples <= 0) {
    throw std::invalid_argument("expected_worst_case: need a positive sample count");
  }
  WorstCaseKernel acc;
  acc.rows.assign(mdp.horizon, std::vector<std::vector<Vec>>(
                                   mdp.num_states, std::vector<Vec>(mdp.num_actions)));
  for (int k = 0; k < num_samples; ++k) {
    auto sets = base_sets();
    for (int h = 0; h < mdp.horizon; ++h) {
      auto kernel = post.sample_model(rng, per_step ? h : 0);
      for (int s = 0; s < mdp.num_states; ++s) {
        if (post.is_terminal(s)) continue;
        for (int a = 0; a < mdp.num_actions; ++a) {
          sets[h].sets[s][a].nominal = kernel[s][a];
        }
      }
      if (!per_step) {
        // One shared draw per sample when counts are collapsed.
        for (int h2 = 1; h2 < mdp.horizon; ++h2) sets[h2] = sets[0];
        break;
      }
    }
    auto solved = solve_with_sets(std::move(sets));
    for (int h = 0; h < mdp.horizon; ++h) {
      for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
          auto& dst = acc.rows[h][s][a];
          const auto& src = solved.kernel.rows[h][s][a];
          if (dst.empty()) dst.assign(src.size(), 0.0);
          for (size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
        }
      }
    }
  }
  for (auto& slab : acc.rows) {
    for (auto& state_rows : slab) {
      for (auto& row : state_rows) {
        double sum = 0.0;
        for (double x : row) sum += x;
        if (sum > 0.0) {
          for (double& x : row) x /= sum;
        }
      }
    }
  }
  return acc;
}

namespace {

NuTable build_nu(const FiniteRMDP& mdp, const PosteriorState& post,
                 const std::function<double(int, int, int)>& local) {
  NuTable nu(mdp.horizon, std::vector<Vec>(mdp.num_states, Vec(mdp.num_actions, 0.0)));
  for (int h = 0; h < mdp.horizon; ++h) {
    for (int s = 0; s < mdp.num_states; ++s) {
      if (mdp.terminal[s]) continue;
      for (int a = 0; a < mdp.num_actions; ++a) {
        nu[h][s][a] = local(s, a, post.per_step() ? h : 0);
      }
    }
  }
  return nu;
}

}  // namespace

NuTable build_nu_dirichlet(const FiniteRMDP& mdp, const PosteriorState& post) {
  return build_nu(mdp, post, [&](int s, int a, int h) {
    return post.local_uncertainty_dirichlet(s, a, mdp.q_max(), h);
  });
}

NuTable build_nu_count(const FiniteRMDP& mdp, const PosteriorState& post, double beta) {
  return build_nu(mdp, post, [&](int s, int a, int h) {
    return post.local_uncertainty_tabular(s, a, beta, h);
  });
}

}  // namespace urbe
