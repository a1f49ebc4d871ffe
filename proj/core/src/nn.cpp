#include "urbe/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace urbe {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("network file: truncated header");
  return v;
}

void write_doubles(std::ostream& os, const double* p, size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* p, size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("network file: truncated parameter block");
}

constexpr std::uint32_t kMlpMagic = 0x4e42'5255;   // "URBN"
constexpr std::uint32_t kTwoHeadMagic = 0x3242'5255;  // "URB2"
constexpr std::uint32_t kVersion = 1;

}  // namespace

void Mlp::Grads::setZero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

Mlp::Mlp(std::vector<int> sizes, Rng& rng, bool rectified_output)
    : sizes_(std::move(sizes)), rectified_output_(rectified_output) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output");
  for (int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
  }
  const size_t layers = sizes_.size() - 1;
  w_.resize(layers);
  b_.resize(layers);
  for (size_t l = 0; l < layers; ++l) {
    const int fan_in = sizes_[l];
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> unif(-bound, bound);
    w_[l].resize(sizes_[l + 1], sizes_[l]);
    for (int i = 0; i < w_[l].rows(); ++i) {
      for (int j = 0; j < w_[l].cols(); ++j) w_[l](i, j) = unif(rng);
    }
    b_[l] = VectorXd::Zero(sizes_[l + 1]);
    // A rectified output with a zero bias starts half-dead: the clamp has no
    // subgradient below zero, so outputs born negative could never train.
    if (rectified_output_ && l + 1 == layers) b_[l].setConstant(0.5);
  }
}

MatrixXd Mlp::forward(const MatrixXd& x) const {
  Cache cache;
  return forward(x, cache);
}

MatrixXd Mlp::forward(const MatrixXd& x, Cache& cache) const {
  if (x.rows() != sizes_.front()) throw std::invalid_argument("Mlp: input dim mismatch");
  cache.acts.clear();
  cache.acts.reserve(w_.size() + 1);
  cache.acts.push_back(x);
  for (size_t l = 0; l < w_.size(); ++l) {
    MatrixXd z = w_[l] * cache.acts.back();
    z.colwise() += b_[l];
    const bool rectify = l + 1 < w_.size() || rectified_output_;
    if (rectify) z = z.cwiseMax(0.0);
    cache.acts.push_back(std::move(z));
  }
  return cache.acts.back();
}

MatrixXd Mlp::backward(const Cache& cache, const MatrixXd& d_out, Grads& grads) const {
  if (grads.w.empty()) grads = make_grads();
  MatrixXd delta = d_out;
  for (size_t l = w_.size(); l-- > 0;) {
    const bool rectified = l + 1 < w_.size() || rectified_output_;
    if (rectified) {
      // Post-activation is positive exactly where the unit is active.
      delta = delta.cwiseProduct(
          (cache.acts[l + 1].array() > 0.0).cast<double>().matrix());
    }
    grads.w[l] += delta * cache.acts[l].transpose();
    grads.b[l] += delta.rowwise().sum();
    delta = w_[l].transpose() * delta;  // at l == 0 this is dLoss/dInput
  }
  return delta;
}

Mlp::Grads Mlp::make_grads() const {
  Grads g;
  g.w.reserve(w_.size());
  g.b.reserve(b_.size());
  for (size_t l = 0; l < w_.size(); ++l) {
    g.w.push_back(MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
    g.b.push_back(VectorXd::Zero(b_[l].size()));
  }
  return g;
}

Mlp::AdamState Mlp::make_adam() const {
  AdamState st;
  for (size_t l = 0; l < w_.size(); ++l) {
    st.m_w.push_back(MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
    st.v_w.push_back(MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
    st.m_b.push_back(VectorXd::Zero(b_[l].size()));
    st.v_b.push_back(VectorXd::Zero(b_[l].size()));
  }
  return st;
}

void Mlp::adam_step(const Grads& grads, AdamState& state, const AdamConfig& cfg) {
  state.step += 1;
  if (cfg.plain_sgd) {
    for (size_t l = 0; l < w_.size(); ++l) {
      w_[l] -= cfg.lr * grads.w[l];
      b_[l] -= cfg.lr * grads.b[l];
    }
    return;
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t l = 0; l < w_.size(); ++l) {
    state.m_w[l] = cfg.beta1 * state.m_w[l] + (1.0 - cfg.beta1) * grads.w[l];
    state.v_w[l] = cfg.beta2 * state.v_w[l] + (1.0 - cfg.beta2) * grads.w[l].cwiseProduct(grads.w[l]);
    w_[l] -= cfg.lr * (state.m_w[l] / bc1)
                 .cwiseQuotient(((state.v_w[l] / bc2).cwiseSqrt().array() + cfg.eps).matrix());
    state.m_b[l] = cfg.beta1 * state.m_b[l] + (1.0 - cfg.beta1) * grads.b[l];
    state.v_b[l] = cfg.beta2 * state.v_b[l] + (1.0 - cfg.beta2) * grads.b[l].cwiseProduct(grads.b[l]);
    b_[l] -= cfg.lr * (state.m_b[l] / bc1)
                 .cwiseQuotient(((state.v_b[l] / bc2).cwiseSqrt().array() + cfg.eps).matrix());
  }
}

long Mlp::num_params() const {
  long n = 0;
  for (size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
  return n;
}

void Mlp::get_params(std::vector<double>& out) const {
  out.clear();
  out.reserve(num_params());
  for (size_t l = 0; l < w_.size(); ++l) {
    for (int i = 0; i < w_[l].rows(); ++i) {
      for (int j = 0; j < w_[l].cols(); ++j) out.push_back(w_[l](i, j));
    }
    for (int i = 0; i < b_[l].size(); ++i) out.push_back(b_[l][i]);
  }
}

void Mlp::set_params(const std::vector<double>& in) {
  if (static_cast<long>(in.size()) != num_params()) {
    throw std::invalid_argument("Mlp: parameter vector size mismatch");
  }
  size_t k = 0;
  for (size_t l = 0; l < w_.size(); ++l) {
    for (int i = 0; i < w_[l].rows(); ++i) {
      for (int j = 0; j < w_[l].cols(); ++j) w_[l](i, j) = in[k++];
    }
    for (int i = 0; i < b_[l].size(); ++i) b_[l][i] = in[k++];
  }
}

std::vector<std::uint8_t> Mlp::activation_pattern(const MatrixXd& x) const {
  Cache cache;
  forward(x, cache);
  std::vector<std::uint8_t> pattern;
  for (size_t l = 1; l < cache.acts.size(); ++l) {
    const bool rectified = l < cache.acts.size() - 1 || rectified_output_;
    if (!rectified) continue;
    const auto& a = cache.acts[l];
    for (int j = 0; j < a.cols(); ++j) {
      for (int i = 0; i < a.rows(); ++i) pattern.push_back(a(i, j) > 0.0 ? 1 : 0);
    }
  }
  return pattern;
}

void Mlp::save(std::ostream& os) const {
  write_u32(os, kMlpMagic);
  write_u32(os, kVersion);
  write_u32(os, rectified_output_ ? 1 : 0);
  write_u32(os, static_cast<std::uint32_t>(sizes_.size()));
  for (int s : sizes_) write_u32(os, static_cast<std::uint32_t>(s));
  std::vector<double> params;
  get_params(params);
  write_doubles(os, params.data(), params.size());
}

Mlp Mlp::load(std::istream& is) {
  if (read_u32(is) != kMlpMagic) throw std::runtime_error("network file: bad magic");
  if (read_u32(is) != kVersion) throw std::runtime_error("network file: unsupported version");
  const bool rectified = read_u32(is) != 0;
  const auto n_sizes = read_u32(is);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("network file: corrupt layer count");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = static_cast<int>(read_u32(is));
  Rng rng(0);  // layout only; parameters are overwritten below
  Mlp net(sizes, rng, rectified);
  std::vector<double> params(net.num_params());
  read_doubles(is, params.data(), params.size());
  net.set_params(params);
  return net;
}

TwoHeadNet::TwoHeadNet(int input_dim, const std::vector<int>& trunk_hidden, int num_actions,
                       int uncertainty_hidden, Rng& rng) {
  if (trunk_hidden.empty()) throw std::invalid_argument("TwoHeadNet: need a hidden trunk");
  std::vector<int> q_sizes;
  q_sizes.push_back(input_dim);
  q_sizes.insert(q_sizes.end(), trunk_hidden.begin(), trunk_hidden.end());
  q_sizes.push_back(num_actions);
  q_net_ = Mlp(q_sizes, rng);
  u_net_ = Mlp({trunk_hidden.back(), uncertainty_hidden, num_actions}, rng,
               /*rectified_output=*/true);
  q_adam_ = q_net_.make_adam();
  u_adam_ = u_net_.make_adam();
}

TwoHeadNet::Forward TwoHeadNet::forward(const MatrixXd& x) const {
  Mlp::Cache cache;
  Forward out;
  out.q = q_net_.forward(x, cache);
  out.phi = cache.acts[cache.acts.size() - 2];
  out.u = u_net_.forward(out.phi);
  return out;
}

VectorXd TwoHeadNet::features(const VectorXd& x) const {
  Mlp::Cache cache;
  q_net_.forward(x, cache);
  return cache.acts[cache.acts.size() - 2].col(0);
}

double TwoHeadNet::train_q(const MatrixXd& x, const std::vector<int>& actions,
                           const VectorXd& targets, const AdamConfig& cfg) {
  const int batch = static_cast<int>(x.cols());
  Mlp::Cache cache;
  const MatrixXd q = q_net_.forward(x, cache);
  MatrixXd d_out = MatrixXd::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (int j = 0; j < batch; ++j) {
    const double diff = q(actions[j], j) - targets[j];
    loss += diff * diff;
    d_out(actions[j], j) = 2.0 * diff / batch;
  }
  auto grads = q_net_.make_grads();
  q_net_.backward(cache, d_out, grads);
  q_net_.adam_step(grads, q_adam_, cfg);
  return loss / batch;
}

double TwoHeadNet::train_u(const MatrixXd& x, const std::vector<int>& actions,
                           const VectorXd& targets, const AdamConfig& cfg) {
  const int batch = static_cast<int>(x.cols());
  // Stop gradient: features are computed once and treated as constants; the
  // backward pass below never touches the Q stack.
  Mlp::Cache trunk_cache;
  q_net_.forward(x, trunk_cache);
  const MatrixXd phi = trunk_cache.acts[trunk_cache.acts.size() - 2];

  Mlp::Cache cache;
  const MatrixXd u = u_net_.forward(phi, cache);
  MatrixXd d_out = MatrixXd::Zero(u.rows(), u.cols());
  double loss = 0.0;
  for (int j = 0; j < batch; ++j) {
    const double diff = u(actions[j], j) - targets[j];
    loss += diff * diff;
    d_out(actions[j], j) = 2.0 * diff / batch;
  }
  auto grads = u_net_.make_grads();
  u_net_.backward(cache, d_out, grads);
  u_net_.adam_step(grads, u_adam_, cfg);
  return loss / batch;
}

void TwoHeadNet::save(std::ostream& os) const {
  write_u32(os, kTwoHeadMagic);
  write_u32(os, kVersion);
  q_net_.save(os);
  u_net_.save(os);
}

TwoHeadNet TwoHeadNet::load(std::istream& is) {
  if (read_u32(is) != kTwoHeadMagic) throw std::runtime_error("network file: bad magic");
  if (read_u32(is) != kVersion) throw std::runtime_error("network file: unsupported version");
  TwoHeadNet net;
  net.q_net_ = Mlp::load(is);
  net.u_net_ = Mlp::load(is);
  net.q_adam_ = net.q_net_.make_adam();
  net.u_adam_ = net.u_net_.make_adam();
  return net;
}

}  // namespace urbe
