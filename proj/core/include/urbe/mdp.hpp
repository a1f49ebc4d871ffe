#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace urbe {

using Vec = std::vector<double>;
using Rng = std::mt19937_64;

// Tolerance for "is this a probability vector" checks.
inline constexpr double kSimplexTol = 1e-9;

bool is_probability_vector(std::span<const double> p, double tol = kSimplexTol);

// Throws std::invalid_argument with the offending index/value in the message.
void validate_simplex(std::span<const double> p, double tol = kSimplexTol);

// Lowest index wins ties. This convention is shared by greedy action
// selection and by the worst-case transition solver.
int argmax_lowest(std::span<const double> v);
int argmin_lowest(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double l1_distance(std::span<const double> a, std::span<const double> b);

// Finite-horizon MDP skeleton with known deterministic rewards. Transition
// probabilities are deliberately not stored here: solvers receive them
// separately as uncertainty sets, posterior means, or sampled kernels.
// successors[s][a] lists the next states an action can reach; probability
// vectors over that support are what the rest of the library passes around.
//
// A terminal state ends the episode on arrival and pays terminal_value[s]
// once. Backups treat that value as the whole continuation, so reward rows
// of terminal states are never used.
struct FiniteRMDP {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  double gamma = 1.0;
  double r_max = 1.0;
  std::vector<std::vector<double>> reward;               // [s][a]
  std::vector<std::vector<std::vector<int>>> successors; // [s][a] -> state ids
  std::vector<std::uint8_t> terminal;                    // per state
  std::vector<double> terminal_value;                    // paid once on arrival

  double q_max() const { return horizon * r_max; }

  // Shape and range checks; throws std::invalid_argument on violation.
  void validate() const;
};

// pi[h][s][a] for step index h in [0, horizon).
struct StochasticPolicy {
  std::vector<std::vector<Vec>> pi;

  static StochasticPolicy uniform(int horizon, int num_states, int num_actions);

  int horizon() const { return static_cast<int>(pi.size()); }
  void validate() const;
};

// q[h][s][a] for step index h in [0, horizon]. The slab at h == horizon is
// the continuation past the end of the episode and must stay identically
// zero; solvers rely on reading it for the final backup.
struct QTable {
  std::vector<std::vector<Vec>> q;

  static QTable zeros(int horizon, int num_states, int num_actions);

  int horizon() const { return static_cast<int>(q.size()) - 1; }
  double& at(int h, int s, int a) { return q[h][s][a]; }
  double at(int h, int s, int a) const { return q[h][s][a]; }

  // Max |q| over all entries, useful for bound checks.
  double max_abs() const;
};

// Deterministic policy choosing argmax_a q[h][s][a], ties to lowest index.
StochasticPolicy policy_greedy_from_q(const QTable& q);

struct Transition {
  int h = 0;  // step index within the episode, starting at 0
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
};

struct EpisodeLog {
  std::vector<Transition> steps;
  double ret = 0.0;  // sum of gamma^h * r over the logged steps
};

// Minimal interface for environments with integer states, used by the
// tabular agents and the test harnesses.
class TabularEnv {
 public:
  virtual ~TabularEnv() = default;
  virtual int num_states() const = 0;
  virtual int num_actions() const = 0;
  virtual int horizon() const = 0;
  virtual double gamma() const = 0;

  struct Step {
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
  };

  virtual int reset(Rng& rng) = 0;
  virtual Step step(int action, Rng& rng) = 0;
};

// Plays one episode. The selector sees (h, s) and returns an action.
using ActionSelector = std::function<int(int h, int s, Rng& rng)>;
EpisodeLog rollout(TabularEnv& env, const ActionSelector& select, Rng& rng);

}  // namespace urbe
