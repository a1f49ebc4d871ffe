#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "urbe/envs/cart_pole.hpp"
#include "urbe/envs/mars_rover.hpp"
#include "urbe/nn.hpp"

namespace urbe {

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct StepRecord {
  VectorXd raw_s;     // env-native encoding, re-steppable under any member model
  VectorXd feat_s;    // network input at s
  VectorXd feat_next; // network input at s'
  int a = 0;
  double r = 0.0;
  bool done = false;      // episode ended here (env terminal or horizon cut)
  bool truncated = false; // ended purely by the horizon cut
  int h = 0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(StepRecord rec);
  size_t size() const { return items_.size(); }
  size_t capacity() const { return capacity_; }
  const StepRecord& at(size_t i) const { return items_[i]; }

  // Uniform indices with replacement; requires size() >= 1.
  std::vector<size_t> sample(size_t batch, Rng& rng) const;

 private:
  size_t capacity_ = 0;
  size_t next_ = 0;
  std::vector<StepRecord> items_;
};

// ---------------------------------------------------------------------------
// Feature-covariance bookkeeping (inverse count estimator)
// ---------------------------------------------------------------------------

// Rank-one downdate keeping sigma equal to (I/mu + sum phi phi^T)^-1.
MatrixXd sherman_morrison_update(const MatrixXd& sigma, const VectorXd& phi);

// beta^2 * phi^T Sigma phi; shrinks as the same features repeat.
double local_uncertainty_fa(const MatrixXd& sigma, const VectorXd& phi, double beta);

class SigmaSet {
 public:
  SigmaSet() = default;
  SigmaSet(int num_actions, int dim, double mu);

  int num_actions() const { return static_cast<int>(sigma_.size()); }
  int dim() const { return sigma_.empty() ? 0 : static_cast<int>(sigma_[0].rows()); }
  const MatrixXd& at(int a) const { return sigma_[a]; }

  void update(int a, const VectorXd& phi);
  double quad(int a, const VectorXd& phi) const;

  void save(std::ostream& os) const;
  static SigmaSet load(std::istream& is);

 private:
  std::vector<MatrixXd> sigma_;
};

// ---------------------------------------------------------------------------
// Finite model sets and generative env access
// ---------------------------------------------------------------------------

struct FiniteUncertaintySet {
  std::vector<double> params;
  void validate() const;
};

FiniteUncertaintySet rover_model_set(int n, Rng& rng);                       // p ~ U(0,1)
FiniteUncertaintySet cartpole_model_set(int n, double center, double sigma,
                                        Rng& rng);                          // clamped > 0

// Uniform view over the parametric env families: a behavior env (reset/step
// under the current parameter) plus exact branch enumeration under any
// member model, used for robust TD targets.
class GenerativeEnv {
 public:
  virtual ~GenerativeEnv() = default;

  virtual int feature_dim() const = 0;
  virtual int num_actions() const = 0;
  virtual int horizon() const = 0;

  virtual double param() const = 0;
  virtual void set_param(double param) = 0;

  virtual VectorXd reset(Rng& rng) = 0;
  struct Step {
    VectorXd feat_next;
    double reward = 0.0;
    bool done = false;
  };
  virtual Step step(int action, Rng& rng) = 0;
  virtual VectorXd raw_state() const = 0;
  // Success notion of the family: the rover stands on the goal; the pole is
  // still inside its thresholds.
  virtual bool succeeded() const = 0;

  struct Branch {
    double prob = 0.0;
    double reward = 0.0;
    bool done = false;
    VectorXd feat_next;
  };
  virtual std::vector<Branch> branches_under_param(const VectorXd& raw, int action,
                                                   double model_param) const = 0;
};

class RoverDeepEnv final : public GenerativeEnv {
 public:
  explicit RoverDeepEnv(MarsRoverEnv::Config cfg = {});

  int feature_dim() const override { return env_.feature_dim(); }
  int num_actions() const override { return env_.num_actions(); }
  int horizon() const override { return env_.horizon(); }
  double param() const override { return env_.param(); }
  void set_param(double param) override { env_.set_param(param); }

  VectorXd reset(Rng& rng) override;
  Step step(int action, Rng& rng) override;
  VectorXd raw_state() const override;
  bool succeeded() const override { return state_.status == MarsRoverEnv::kGoal; }
  std::vector<Branch> branches_under_param(const VectorXd& raw, int action,
                                           double model_param) const override;

  const MarsRoverEnv& env() const { return env_; }
  const MarsRoverEnv::State& state() const { return state_; }

 private:
  MarsRoverEnv env_;
  MarsRoverEnv::State state_{};
  bool done_ = true;
};

class CartPoleDeepEnv final : public GenerativeEnv {
 public:
  explicit CartPoleDeepEnv(CartPoleEnv::Config cfg = {});

  int feature_dim() const override { return env_.feature_dim(); }
  int num_actions() const override { return env_.num_actions(); }
  int horizon() const override { return env_.horizon(); }
  double param() const override { return env_.param(); }
  void set_param(double param) override { env_.set_param(param); }

  VectorXd reset(Rng& rng) override;
  Step step(int action, Rng& rng) override;
  VectorXd raw_state() const override;
  bool succeeded() const override { return !env_.out_of_bounds(state_); }
  std::vector<Branch> branches_under_param(const VectorXd& raw, int action,
                                           double model_param) const override;

  const CartPoleEnv& env() const { return env_; }
  const CartPoleEnv::State& state() const { return state_; }

 private:
  CartPoleEnv env_;
  CartPoleEnv::State state_{};
  bool done_ = true;
};

// ---------------------------------------------------------------------------
// Targets and acting
// ---------------------------------------------------------------------------

// min over member models of the exact-expectation bootstrapped value
//   E_m[ r + gamma * (1 - done) * max_a' Q_target(s') ].
// `truncated` kills the bootstrap under every member (horizon cut).
double robust_td_target(const GenerativeEnv& env, const FiniteUncertaintySet& models,
                        const VectorXd& raw_s, int action, const TwoHeadNet& target,
                        double gamma, bool truncated);

// Batched form of the same computation, one target-net pass per member model.
VectorXd robust_td_targets(const GenerativeEnv& env, const FiniteUncertaintySet& models,
                           const std::vector<VectorXd>& raw, const std::vector<int>& actions,
                           const std::vector<std::uint8_t>& truncated,
                           const TwoHeadNet& target, double gamma);

// y = phi' Sigma_a phi (terminal) or the same plus gamma^2 * w_next.
double urbe_head_target(const VectorXd& phi, const MatrixXd& sigma_a, double w_next,
                        double gamma, bool terminal);

// argmax_b q_b + beta * zeta_b * sqrt(w_b), zeta_b iid standard normal.
int act_thompson(const VectorXd& q, const VectorXd& w, double beta, Rng& rng);

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

enum class AgentKind { kDqn, kRobustDqn, kDqnUbe, kDqnUrbe };

const char* agent_kind_name(AgentKind kind);
AgentKind agent_kind_from_name(const std::string& name);

struct DeepAgentConfig {
  AgentKind kind = AgentKind::kDqnUrbe;
  double gamma = 0.9;
  AdamConfig q_opt{};  // lr 1e-4
  AdamConfig u_opt{};
  double beta = 0.5;          // Thompson scale; also scales the w-head bonus
  double mu = 1e-2;           // Sigma_a initial variance coefficient
  int batch_size = 100;
  int target_interval = 10;   // gradient updates between target refreshes
  int replay_capacity = 50000;
  int min_replay = 1000;      // steps observed before training starts
  std::vector<int> trunk_hidden = {10, 10};
  int uncertainty_hidden = 15;
  FiniteUncertaintySet models;  // empty => singleton {nominal} resolved at build

  bool uses_robust_targets() const {
    return kind == AgentKind::kRobustDqn || kind == AgentKind::kDqnUrbe;
  }
  bool uses_uncertainty_head() const {
    return kind == AgentKind::kDqnUbe || kind == AgentKind::kDqnUrbe;
  }
};

class DeepAgent {
 public:
  DeepAgent(DeepAgentConfig cfg, int feature_dim, int num_actions, Rng& init_rng);

  // Behavior action: epsilon-greedy wrapper; inside the greedy branch UBE and
  // URBE use the Thompson bonus, the others plain argmax over q.
  int act(const VectorXd& feat, double eps, Rng& rng);
  // Plain argmax over q, no exploration; used by evaluation.
  int act_greedy(const VectorXd& feat) const;

  // Records the transition and, for agents with an uncertainty head, applies
  // the Sherman-Morrison update on the acted features.
  void observe(StepRecord rec);

  bool ready() const;

  struct TrainMetrics {
    double q_loss = 0.0;
    double u_loss = 0.0;
  };
  TrainMetrics train_step(const GenerativeEnv& env, Rng& rng);

  double mean_uncertainty(const VectorXd& feat) const;
  long updates() const { return updates_; }
  const DeepAgentConfig& config() const { return cfg_; }
  const TwoHeadNet& net() const { return net_; }

  void save(std::ostream& os) const;
  // Rebuilds from a checkpoint; the config must match the one used to train.
  static DeepAgent load(std::istream& is, DeepAgentConfig cfg);

 private:
  DeepAgent(DeepAgentConfig cfg);  // load path

  DeepAgentConfig cfg_;
  TwoHeadNet net_;
  TwoHeadNet target_;
  SigmaSet sigma_;
  ReplayBuffer buffer_;
  long updates_ = 0;
};

}  // namespace urbe
