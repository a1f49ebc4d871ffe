#include "urbe/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace urbe {

PosteriorState::PosteriorState(int num_states, int num_actions,
                               std::vector<std::vector<std::vector<int>>> support,
                               std::vector<std::uint8_t> terminal, double prior_count,
                               int per_step_horizon)
    : num_states_(num_states),
      num_actions_(num_actions),
      per_step_horizon_(per_step_horizon),
      prior_count_(prior_count),
      support_(std::move(support)),
      terminal_(std::move(terminal)) {
  if (prior_count_ <= 0.0) {
    throw std::invalid_argument("PosteriorState: prior pseudo-count must be positive");
  }
  const int slabs = per_step_horizon_ > 0 ? per_step_horizon_ : 1;
  counts_.assign(slabs, std::vector<std::vector<Vec>>(num_states_));
  for (int t = 0; t < slabs; ++t) {
    for (int s = 0; s < num_states_; ++s) {
      counts_[t][s].assign(num_actions_, {});
      if (terminal_[s]) continue;
      for (int a = 0; a < num_actions_; ++a) {
        if (support_[s][a].empty()) {
          throw std::invalid_argument("PosteriorState: empty support at non-terminal (s,a)");
        }
        counts_[t][s][a].assign(support_[s][a].size(), 0.0);
      }
    }
  }
}

PosteriorState PosteriorState::from_mdp(const FiniteRMDP& mdp, double prior_count,
                                        bool per_step) {
  return PosteriorState(mdp.num_states, mdp.num_actions, mdp.successors, mdp.terminal,
                        prior_count, per_step ? mdp.horizon : 0);
}

int PosteriorState::slab(int h) const {
  if (per_step_horizon_ == 0) return 0;
  if (h < 0 || h >= per_step_horizon_) {
    throw std::out_of_range("PosteriorState: step index outside horizon");
  }
  return h;
}

const Vec& PosteriorState::counts_row(int s, int a, int h) const {
  return counts_[slab(h)][s][a];
}

Vec& PosteriorState::counts_row(int s, int a, int h) {
  return counts_[slab(h)][s][a];
}

void PosteriorState::update_counts(int s, int a, int s_next, int h) {
  const auto& supp = support_[s][a];
  auto it = std::find(supp.begin(), supp.end(), s_next);
  if (it == supp.end()) {
    throw std::invalid_argument("PosteriorState: observed successor " +
                                std::to_string(s_next) + " not in declared support of (" +
                                std::to_string(s) + "," + std::to_string(a) + ")");
  }
  counts_row(s, a, h)[it - supp.begin()] += 1.0;
}

Vec PosteriorState::posterior_mean(int s, int a, int h) const {
  const auto& counts = counts_row(s, a, h);
  Vec mean(counts.size());
  double total = 0.0;
  for (size_t k = 0; k < counts.size(); ++k) {
    mean[k] = prior_count_ + counts[k];
    total += mean[k];
  }
  for (double& x : mean) x /= total;
  return mean;
}

double PosteriorState::posterior_component_variance(int s, int a, int k, int h) const {
  const auto& counts = counts_row(s, a, h);
  double total = 0.0;
  for (double c : counts) total += prior_count_ + c;
  const double alpha_k = prior_count_ + counts.at(k);
  return alpha_k / (total * total);
}

double PosteriorState::visit_count(int s, int a, int h) const {
  const auto& counts = counts_row(s, a, h);
  double n = 0.0;
  for (double c : counts) n += c;
  return n;
}

std::vector<std::vector<Vec>> PosteriorState::sample_model(Rng& rng, int h) const {
  std::vector<std::vector<Vec>> kernel(num_states_, std::vector<Vec>(num_actions_));
  for (int s = 0; s < num_states_; ++s) {
    if (terminal_[s]) continue;
    for (int a = 0; a < num_actions_; ++a) {
      const auto& counts = counts_row(s, a, h);
      Vec row(counts.size());
      double sum = 0.0;
      for (size_t k = 0; k < counts.size(); ++k) {
        std::gamma_distribution<double> gamma(prior_count_ + counts[k], 1.0);
        row[k] = gamma(rng);
        sum += row[k];
      }
      if (sum <= 0.0) {
        row.assign(counts.size(), 1.0 / counts.size());
      } else {
        for (double& x : row) x /= sum;
      }
      kernel[s][a] = std::move(row);
    }
  }
  return kernel;
}

PosteriorUncertaintySet PosteriorState::build_uncertainty_set(double psi, int h) const {
  std::vector<std::vector<double>> radii(num_states_, std::vector<double>(num_actions_, psi));
  return build_uncertainty_set(radii, h);
}

PosteriorUncertaintySet PosteriorState::build_uncertainty_set(
    const std::vector<std::vector<double>>& psi, int h) const {
  PosteriorUncertaintySet out;
  out.support = support_;
  out.sets.assign(num_states_, std::vector<L1UncertaintySet>(num_actions_));
  for (int s = 0; s < num_states_; ++s) {
    if (terminal_[s]) continue;
    for (int a = 0; a < num_actions_; ++a) {
      out.sets[s][a].nominal = posterior_mean(s, a, h);
      out.sets[s][a].radius = psi[s][a];
    }
  }
  return out;
}

double PosteriorState::local_uncertainty_tabular(int s, int a, double beta, int h) const {
  return beta * beta / std::max(1.0, visit_count(s, a, h));
}

double PosteriorState::local_uncertainty_dirichlet(int s, int a, double q_max, int h) const {
  const auto& counts = counts_row(s, a, h);
  const Vec mean = posterior_mean(s, a, h);
  double sum = 0.0;
  for (size_t k = 0; k < counts.size(); ++k) {
    sum += posterior_component_variance(s, a, static_cast<int>(k), h) / mean[k];
  }
  return q_max * q_max * sum;
}

}  // namespace urbe
