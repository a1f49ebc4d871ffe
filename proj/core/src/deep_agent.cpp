#include "urbe/deep_agent.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace urbe {

namespace {

constexpr std::uint32_t kAgentMagic = 0x4142'5255;  // "URBA"
constexpr std::uint32_t kAgentVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("checkpoint: truncated");
  return v;
}

void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::int64_t read_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("checkpoint: truncated");
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ReplayBuffer
// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  items_.reserve(std::min<size_t>(capacity_, 4096));
}

void ReplayBuffer::push(StepRecord rec) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(rec));
  } else {
    items_[next_] = std::move(rec);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<size_t> ReplayBuffer::sample(size_t batch, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
  std::uniform_int_distribution<size_t> pick(0, items_.size() - 1);
  std::vector<size_t> out(batch);
  for (auto& i : out) i = pick(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Sigma bookkeeping
// ---------------------------------------------------------------------------

MatrixXd sherman_morrison_update(const MatrixXd& sigma, const VectorXd& phi) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != phi.size()) {
    throw std::invalid_argument("sherman_morrison_update: dimension mismatch");
  }
  if (!phi.allFinite()) throw std::invalid_argument("sherman_morrison_update: non-finite features");
  const VectorXd sp = sigma * phi;
  const double denom = 1.0 + phi.dot(sp);
  MatrixXd out = sigma - (sp * sp.transpose()) / denom;
  // Counter the symmetry drift of the rank-one arithmetic.
  out = 0.5 * (out + out.transpose()).eval();
  return out;
}

double local_uncertainty_fa(const MatrixXd& sigma, const VectorXd& phi, double beta) {
  if (sigma.rows() != phi.size()) {
    throw std::invalid_argument("local_uncertainty_fa: dimension mismatch");
  }
  return beta * beta * phi.dot(sigma * phi);
}

SigmaSet::SigmaSet(int num_actions, int dim, double mu) {
  if (num_actions <= 0 || dim <= 0) throw std::invalid_argument("SigmaSet: bad dimensions");
  if (mu <= 0.0) throw std::invalid_argument("SigmaSet: mu must be positive");
  sigma_.assign(num_actions, mu * MatrixXd::Identity(dim, dim));
}

void SigmaSet::update(int a, const VectorXd& phi) {
  sigma_.at(a) = sherman_morrison_update(sigma_.at(a), phi);
}

double SigmaSet::quad(int a, const VectorXd& phi) const {
  return phi.dot(sigma_.at(a) * phi);
}

void SigmaSet::save(std::ostream& os) const {
  write_u32(os, static_cast<std::uint32_t>(sigma_.size()));
  write_u32(os, static_cast<std::uint32_t>(dim()));
  for (const auto& m : sigma_) {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
}

SigmaSet SigmaSet::load(std::istream& is) {
  const auto n = read_u32(is);
  const auto d = read_u32(is);
  SigmaSet set;
  set.sigma_.assign(n, MatrixXd::Zero(d, d));
  for (auto& m : set.sigma_) {
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated sigma block");
  }
  return set;
}

// ---------------------------------------------------------------------------
// Model sets
// ---------------------------------------------------------------------------

void FiniteUncertaintySet::validate() const {
  if (params.empty()) throw std::invalid_argument("model set: must be non-empty");
  for (double p : params) {
    if (!std::isfinite(p)) throw std::invalid_argument("model set: non-finite parameter");
  }
}

FiniteUncertaintySet rover_model_set(int n, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("model set: need at least one member");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  FiniteUncertaintySet set;
  set.params.reserve(n);
  while (static_cast<int>(set.params.size()) < n) {
    const double p = unif(rng);
    if (p > 0.0 && p < 1.0) set.params.push_back(p);
  }
  return set;
}

FiniteUncertaintySet cartpole_model_set(int n, double center, double sigma, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("model set: need at least one member");
  std::normal_distribution<double> normal(center, sigma);
  FiniteUncertaintySet set;
  set.params.reserve(n);
  for (int i = 0; i < n; ++i) set.params.push_back(std::max(normal(rng), 1e-3));
  return set;
}

// ---------------------------------------------------------------------------
// Env adapters
// ---------------------------------------------------------------------------

RoverDeepEnv::RoverDeepEnv(MarsRoverEnv::Config cfg) : env_(cfg) {}

VectorXd RoverDeepEnv::reset(Rng& rng) {
  state_ = env_.reset(rng);
  done_ = false;
  return env_.featurize(state_);
}

GenerativeEnv::Step RoverDeepEnv::step(int action, Rng& rng) {
  if (done_) throw std::logic_error("RoverDeepEnv: step after episode end");
  const auto out = env_.step(state_, action, rng);
  state_ = out.next;
  done_ = out.done;
  return {env_.featurize(out.next), out.reward, out.done};
}

VectorXd RoverDeepEnv::raw_state() const {
  VectorXd raw(2);
  raw << static_cast<double>(state_.cell), static_cast<double>(state_.status);
  return raw;
}

std::vector<GenerativeEnv::Branch> RoverDeepEnv::branches_under_param(
    const VectorXd& raw, int action, double model_param) const {
  MarsRoverEnv::State s;
  s.cell = static_cast<int>(std::lround(raw[0]));
  s.status = static_cast<int>(std::lround(raw[1]));
  std::vector<Branch> out;
  for (const auto& oc : env_.outcomes_under_param(s, action, model_param)) {
    out.push_back({oc.prob, oc.reward, oc.done, env_.featurize(oc.next)});
  }
  return out;
}

CartPoleDeepEnv::CartPoleDeepEnv(CartPoleEnv::Config cfg) : env_(cfg) {}

VectorXd CartPoleDeepEnv::reset(Rng& rng) {
  state_ = env_.reset(rng);
  done_ = false;
  return env_.featurize(state_);
}

GenerativeEnv::Step CartPoleDeepEnv::step(int action, Rng& rng) {
  if (done_) throw std::logic_error("CartPoleDeepEnv: step after episode end");
  const auto out = env_.step(state_, action, rng);
  state_ = out.next;
  done_ = out.done;
  return {env_.featurize(out.next), out.reward, out.done};
}

VectorXd CartPoleDeepEnv::raw_state() const {
  VectorXd raw(4);
  raw << state_.x, state_.x_dot, state_.theta, state_.theta_dot;
  return raw;
}

std::vector<GenerativeEnv::Branch> CartPoleDeepEnv::branches_under_param(
    const VectorXd& raw, int action, double model_param) const {
  CartPoleEnv::State s{raw[0], raw[1], raw[2], raw[3]};
  std::vector<Branch> out;
  for (const auto& oc : env_.outcomes_under_param(s, action, model_param)) {
    out.push_back({oc.prob, oc.reward, oc.done, env_.featurize(oc.next)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Targets and acting
// ---------------------------------------------------------------------------

double robust_td_target(const GenerativeEnv& env, const FiniteUncertaintySet& models,
                        const VectorXd& raw_s, int action, const TwoHeadNet& target,
                        double gamma, bool truncated) {
  models.validate();
  double best = std::numeric_limits<double>::infinity();
  for (double m : models.params) {
    double value = 0.0;
    for (const auto& br : env.branches_under_param(raw_s, action, m)) {
      double boot = 0.0;
      if (!br.done && !truncated) {
        boot = target.q_values(br.feat_next).maxCoeff();
      }
      value += br.prob * (br.reward + gamma * boot);
    }
    best = std::min(best, value);
  }
  return best;
}

VectorXd robust_td_targets(const GenerativeEnv& env, const FiniteUncertaintySet& models,
                           const std::vector<VectorXd>& raw, const std::vector<int>& actions,
                           const std::vector<std::uint8_t>& truncated,
                           const TwoHeadNet& target, double gamma) {
  models.validate();
  const size_t batch = raw.size();
  if (actions.size() != batch || truncated.size() != batch) {
    throw std::invalid_argument("robust_td_targets: batch size mismatch");
  }
  VectorXd best = VectorXd::Constant(batch, std::numeric_limits<double>::infinity());
  std::vector<std::vector<GenerativeEnv::Branch>> branches(batch);
  for (double m : models.params) {
    int n_boot = 0;
    for (size_t j = 0; j < batch; ++j) {
      branches[j] = env.branches_under_param(raw[j], actions[j], m);
      if (!truncated[j]) {
        for (const auto& br : branches[j]) {
          if (!br.done) ++n_boot;
        }
      }
    }
    Eigen::RowVectorXd max_q;
    if (n_boot > 0) {
      MatrixXd x(env.feature_dim(), n_boot);
      int k = 0;
      for (size_t j = 0; j < batch; ++j) {
        if (truncated[j]) continue;
        for (const auto& br : branches[j]) {
          if (!br.done) x.col(k++) = br.feat_next;
        }
      }
      max_q = target.q_values(x).colwise().maxCoeff();
    }
    int k = 0;
    for (size_t j = 0; j < batch; ++j) {
      double value = 0.0;
      for (const auto& br : branches[j]) {
        double boot = 0.0;
        if (!br.done && !truncated[j]) boot = max_q[k++];
        value += br.prob * (br.reward + gamma * boot);
      }
      best[j] = std::min(best[j], value);
    }
  }
  return best;
}

double urbe_head_target(const VectorXd& phi, const MatrixXd& sigma_a, double w_next,
                        double gamma, bool terminal) {
  if (w_next < 0.0) throw std::invalid_argument("urbe_head_target: negative w_next");
  const double quad = phi.dot(sigma_a * phi);
  if (terminal) return quad;
  return quad + gamma * gamma * w_next;
}

int act_thompson(const VectorXd& q, const VectorXd& w, double beta, Rng& rng) {
  if (q.size() != w.size() || q.size() == 0) {
    throw std::invalid_argument("act_thompson: dimension mismatch");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < q.size(); ++a) {
    const double wa = w[a] < 0.0 ? 0.0 : w[a];
    const double score = q[a] + beta * normal(rng) * std::sqrt(wa);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

const char* agent_kind_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::kDqn: return "dqn";
    case AgentKind::kRobustDqn: return "robust-dqn";
    case AgentKind::kDqnUbe: return "dqn-ube";
    case AgentKind::kDqnUrbe: return "dqn-urbe";
  }
  throw std::logic_error("agent_kind_name: unknown kind");
}

AgentKind agent_kind_from_name(const std::string& name) {
  if (name == "dqn") return AgentKind::kDqn;
  if (name == "robust-dqn") return AgentKind::kRobustDqn;
  if (name == "dqn-ube") return AgentKind::kDqnUbe;
  if (name == "dqn-urbe") return AgentKind::kDqnUrbe;
  throw std::invalid_argument("unknown agent kind: " + name);
}

DeepAgent::DeepAgent(DeepAgentConfig cfg) : cfg_(std::move(cfg)), buffer_(cfg_.replay_capacity) {}

DeepAgent::DeepAgent(DeepAgentConfig cfg, int feature_dim, int num_actions, Rng& init_rng)
    : cfg_(std::move(cfg)),
      net_(feature_dim, cfg_.trunk_hidden, num_actions, cfg_.uncertainty_hidden, init_rng),
      target_(net_),
      sigma_(num_actions, net_.feature_dim(), cfg_.mu),
      buffer_(cfg_.replay_capacity) {
  if (cfg_.batch_size <= 0) throw std::invalid_argument("DeepAgent: batch size must be positive");
  if (cfg_.target_interval <= 0) {
    throw std::invalid_argument("DeepAgent: target interval must be positive");
  }
  if (!cfg_.models.params.empty()) cfg_.models.validate();
}

int DeepAgent::act(const VectorXd& feat, double eps, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (unif(rng) < eps) {
    std::uniform_int_distribution<int> pick(0, net_.num_actions() - 1);
    return pick(rng);
  }
  if (cfg_.uses_uncertainty_head()) {
    const auto fwd = net_.forward(feat);
    return act_thompson(fwd.q.col(0), fwd.u.col(0), cfg_.beta, rng);
  }
  const VectorXd q = net_.q_values(feat);
  return argmax_lowest(std::span<const double>(q.data(), static_cast<size_t>(q.size())));
}

int DeepAgent::act_greedy(const VectorXd& feat) const {
  const VectorXd q = net_.q_values(feat);
  return argmax_lowest(std::span<const double>(q.data(), static_cast<size_t>(q.size())));
}

void DeepAgent::observe(StepRecord rec) {
  if (cfg_.uses_uncertainty_head()) {
    sigma_.update(rec.a, net_.features(rec.feat_s));
  }
  buffer_.push(std::move(rec));
}

bool DeepAgent::ready() const {
  const size_t need = std::max<size_t>(cfg_.batch_size, cfg_.min_replay);
  return buffer_.size() >= need;
}

DeepAgent::TrainMetrics DeepAgent::train_step(const GenerativeEnv& env, Rng& rng) {
  if (!ready()) throw std::logic_error("DeepAgent: train_step before replay is warm");
  const int batch = cfg_.batch_size;
  const auto idx = buffer_.sample(batch, rng);

  const int in_dim = net_.input_dim();
  MatrixXd x(in_dim, batch);
  MatrixXd x_next(in_dim, batch);
  std::vector<int> actions(batch);
  for (int j = 0; j < batch; ++j) {
    const auto& rec = buffer_.at(idx[j]);
    x.col(j) = rec.feat_s;
    x_next.col(j) = rec.feat_next;
    actions[j] = rec.a;
  }

  // Q-head targets.
  VectorXd y_q(batch);
  if (cfg_.uses_robust_targets()) {
    FiniteUncertaintySet models = cfg_.models;
    if (models.params.empty()) models.params.push_back(env.param());
    std::vector<VectorXd> raw(batch);
    std::vector<std::uint8_t> truncated(batch);
    for (int j = 0; j < batch; ++j) {
      const auto& rec = buffer_.at(idx[j]);
      raw[j] = rec.raw_s;
      truncated[j] = rec.truncated ? 1 : 0;
    }
    y_q = robust_td_targets(env, models, raw, actions, truncated, target_, cfg_.gamma);
  } else {
    const MatrixXd q_next = target_.q_values(x_next);
    for (int j = 0; j < batch; ++j) {
      const auto& rec = buffer_.at(idx[j]);
      const double boot = rec.done ? 0.0 : q_next.col(j).maxCoeff();
      y_q[j] = rec.r + cfg_.gamma * boot;
    }
  }

  TrainMetrics metrics;
  metrics.q_loss = net_.train_q(x, actions, y_q, cfg_.q_opt);

  // Uncertainty-head targets.
  if (cfg_.uses_uncertainty_head()) {
    const auto fwd = net_.forward(x);
    const auto fwd_next = target_.forward(x_next);
    VectorXd y_u(batch);
    for (int j = 0; j < batch; ++j) {
      const auto& rec = buffer_.at(idx[j]);
      double w_next = 0.0;
      if (!rec.done) {
        int a_next = 0;
        fwd_next.q.col(j).maxCoeff(&a_next);
        w_next = fwd_next.u(a_next, j);
      }
      y_u[j] = urbe_head_target(fwd.phi.col(j), sigma_.at(rec.a), w_next, cfg_.gamma,
                                rec.done);
    }
    metrics.u_loss = net_.train_u(x, actions, y_u, cfg_.u_opt);
  }

  if (!std::isfinite(metrics.q_loss) || !std::isfinite(metrics.u_loss)) {
    throw std::runtime_error(std::string("DeepAgent: non-finite loss (agent ") +
                             agent_kind_name(cfg_.kind) + ", update " +
                             std::to_string(updates_) + ")");
  }

  updates_ += 1;
  if (updates_ % cfg_.target_interval == 0) target_ = net_;
  return metrics;
}

double DeepAgent::mean_uncertainty(const VectorXd& feat) const {
  if (!cfg_.uses_uncertainty_head()) return 0.0;
  const auto fwd = net_.forward(feat);
  return fwd.u.col(0).mean();
}

void DeepAgent::save(std::ostream& os) const {
  write_u32(os, kAgentMagic);
  write_u32(os, kAgentVersion);
  write_u32(os, static_cast<std::uint32_t>(cfg_.kind));
  write_i64(os, updates_);
  net_.save(os);
  target_.save(os);
  sigma_.save(os);
}

DeepAgent DeepAgent::load(std::istream& is, DeepAgentConfig cfg) {
  if (read_u32(is) != kAgentMagic) throw std::runtime_error("checkpoint: bad magic");
  if (read_u32(is) != kAgentVersion) throw std::runtime_error("checkpoint: unsupported version");
  const auto kind = static_cast<AgentKind>(read_u32(is));
  if (kind != cfg.kind) throw std::runtime_error("checkpoint: agent kind mismatch");
  DeepAgent agent(std::move(cfg));
  agent.updates_ = read_i64(is);
  agent.net_ = TwoHeadNet::load(is);
  agent.target_ = TwoHeadNet::load(is);
  agent.sigma_ = SigmaSet::load(is);
  return agent;
}

}  // namespace urbe
