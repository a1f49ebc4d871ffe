#pragma once

#include <Eigen/Dense>
#include <iosfwd>

#include "urbe/mdp.hpp"

namespace urbe {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool plain_sgd = false;  // skip the moment estimates, take lr-scaled steps
};

// Fully connected stack with ReLU hidden activations and, optionally, a
// rectified output (used by the uncertainty head to keep estimates
// non-negative; the clamp has zero subgradient where it binds). Batches go
// through as columns. All gradients are computed by hand so tests can pit
// them against finite differences.
class Mlp {
 public:
  struct Cache {
    // acts[0] is the input, acts[i] the post-activation output of layer i.
    std::vector<MatrixXd> acts;
  };

  struct Grads {
    std::vector<MatrixXd> w;
    std::vector<VectorXd> b;
    void setZero();
  };

  struct AdamState {
    std::vector<MatrixXd> m_w, v_w;
    std::vector<VectorXd> m_b, v_b;
    long step = 0;
  };

  Mlp() = default;
  // sizes = {input, hidden..., output}; He-style uniform fan-in init.
  Mlp(std::vector<int> sizes, Rng& rng, bool rectified_output = false);

  MatrixXd forward(const MatrixXd& x) const;
  MatrixXd forward(const MatrixXd& x, Cache& cache) const;

  // Backpropagates dLoss/dOutput, accumulating parameter gradients into
  // `grads` (which it shapes on first use) and returning dLoss/dInput.
  MatrixXd backward(const Cache& cache, const MatrixXd& d_out, Grads& grads) const;

  Grads make_grads() const;
  AdamState make_adam() const;
  void adam_step(const Grads& grads, AdamState& state, const AdamConfig& cfg);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  bool rectified_output() const { return rectified_output_; }

  // Flat parameter access, weights then bias per layer, row-major weights.
  // Used by save/load and by the finite-difference tests.
  long num_params() const;
  void get_params(std::vector<double>& out) const;
  void set_params(const std::vector<double>& in);

  // Sign pattern of every ReLU unit (hidden and rectified output) for the
  // given input; finite-difference probes use it to detect kink crossings.
  std::vector<std::uint8_t> activation_pattern(const MatrixXd& x) const;

  void save(std::ostream& os) const;
  static Mlp load(std::istream& is);

 private:
  std::vector<int> sizes_;
  bool rectified_output_ = false;
  std::vector<MatrixXd> w_;  // w_[l] maps layer l activations to l+1 pre-activations
  std::vector<VectorXd> b_;
};

// Q-network with an uncertainty head grafted on. The trunk plus the final
// linear layer form the Q stack; phi(s) is the last hidden activation. The
// uncertainty head is a one-hidden-layer rectified-output stack reading
// phi(s) through a stop gradient: its loss never moves trunk or Q weights.
class TwoHeadNet {
 public:
  TwoHeadNet() = default;
  TwoHeadNet(int input_dim, const std::vector<int>& trunk_hidden, int num_actions,
             int uncertainty_hidden, Rng& rng);

  int num_actions() const { return q_net_.output_dim(); }
  int input_dim() const { return q_net_.input_dim(); }
  int feature_dim() const { return q_net_.sizes()[q_net_.sizes().size() - 2]; }

  struct Forward {
    MatrixXd q;    // actions x batch
    MatrixXd u;    // actions x batch, non-negative
    MatrixXd phi;  // feature_dim x batch
  };
  Forward forward(const MatrixXd& x) const;

  MatrixXd q_values(const MatrixXd& x) const { return q_net_.forward(x); }
  VectorXd features(const VectorXd& x) const;

  // One Adam step on the Q stack for the squared error between q(s,a) and
  // `target` on the taken actions. Returns the mean squared TD error.
  double train_q(const MatrixXd& x, const std::vector<int>& actions,
                 const VectorXd& targets, const AdamConfig& cfg);

  // One Adam step on the uncertainty head only (stop gradient at phi).
  double train_u(const MatrixXd& x, const std::vector<int>& actions,
                 const VectorXd& targets, const AdamConfig& cfg);

  Mlp& q_net() { return q_net_; }
  Mlp& u_net() { return u_net_; }
  const Mlp& q_net() const { return q_net_; }
  const Mlp& u_net() const { return u_net_; }

  void save(std::ostream& os) const;
  static TwoHeadNet load(std::istream& is);

 private:
  Mlp q_net_;  // input -> trunk hidden -> num_actions
  Mlp u_net_;  // feature_dim -> uncertainty_hidden -> num_actions, rectified
  Mlp::AdamState q_adam_;
  Mlp::AdamState u_adam_;
};

// Deep copy helper for target networks; explicit name at call sites.
inline TwoHeadNet target_copy(const TwoHeadNet& net) { return net; }

}  // namespace urbe
