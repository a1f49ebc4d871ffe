#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "urbe/nn.hpp"

using namespace urbe;

namespace {

MatrixXd random_batch(int dim, int cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd x(dim, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < dim; ++i) x(i, j) = normal(rng);
  }
  return x;
}

// Linear probe loss L = sum(G .* f(X)); its output gradient is exactly G.
double probe_loss(const Mlp& net, const MatrixXd& x, const MatrixXd& g) {
  return (net.forward(x).array() * g.array()).sum();
}

struct GradCheckStats {
  int checked = 0;
  int skipped = 0;
  double max_rel = 0.0;
};

// Central-difference check on `probes` random parameters. Probes that flip a
// ReLU activation pattern between theta-eps and theta+eps sit on a kink and
// are resampled.
GradCheckStats gradcheck_params(Mlp& net, const MatrixXd& x, const MatrixXd& g, int probes,
                                Rng& rng) {
  Mlp::Cache cache;
  net.forward(x, cache);
  Mlp::Grads grads = net.make_grads();
  grads.setZero();
  net.backward(cache, g, grads);

  std::vector<double> flat_w;
  net.get_params(flat_w);

  // get_params lays weights out row-major per layer followed by the bias;
  // rebuild the analytic gradient in the same order.
  std::vector<double> analytic_flat;
  for (size_t l = 0; l < grads.w.size(); ++l) {
    const MatrixXd& wm = grads.w[l];
    for (int r = 0; r < wm.rows(); ++r) {
      for (int c = 0; c < wm.cols(); ++c) analytic_flat.push_back(wm(r, c));
    }
    for (int r = 0; r < grads.b[l].size(); ++r) analytic_flat.push_back(grads.b[l][r]);
  }
  REQUIRE(analytic_flat.size() == flat_w.size());

  GradCheckStats stats;
  std::uniform_int_distribution<size_t> pick(0, flat_w.size() - 1);
  const auto base_pattern = net.activation_pattern(x);
  while (stats.checked < probes && stats.skipped < probes * 50) {
    const size_t i = pick(rng);
    const double theta = flat_w[i];
    const double eps = 1e-5 * std::max(1.0, std::abs(theta));

    flat_w[i] = theta + eps;
    net.set_params(flat_w);
    const bool same_hi = net.activation_pattern(x) == base_pattern;
    const double hi = probe_loss(net, x, g);
    flat_w[i] = theta - eps;
    net.set_params(flat_w);
    const bool same_lo = net.activation_pattern(x) == base_pattern;
    const double lo = probe_loss(net, x, g);
    flat_w[i] = theta;
    net.set_params(flat_w);

    if (!same_hi || !same_lo) {
      stats.skipped += 1;
      continue;
    }
    const double numeric = (hi - lo) / (2.0 * eps);
    const double rel = std::abs(analytic_flat[i] - numeric) /
                       std::max({std::abs(analytic_flat[i]), std::abs(numeric), 1.0});
    stats.max_rel = std::max(stats.max_rel, rel);
    stats.checked += 1;
  }
  return stats;
}

}  // namespace

TEST_CASE("forward shapes, hidden rectification, and optional output clamp") {
  Rng rng(1);
  Mlp net({3, 5, 2}, rng);
  const MatrixXd x = random_batch(3, 7, rng);
  const MatrixXd y = net.forward(x);
  CHECK(y.rows() == 2);
  CHECK(y.cols() == 7);
  CHECK(net.input_dim() == 3);
  CHECK(net.output_dim() == 2);

  Mlp rect({3, 5, 2}, rng, true);
  const MatrixXd yr = rect.forward(x);
  CHECK((yr.array() >= 0.0).all());

  Mlp::Cache cache;
  net.forward(x, cache);
  REQUIRE(cache.acts.size() == 3);
  CHECK((cache.acts[1].array() >= 0.0).all());  // hidden layer is rectified
}

TEST_CASE("analytic parameter gradients match central differences") {
  Rng rng(2);
  for (const bool rectified : {false, true}) {
    Mlp net({4, 8, 6, 3}, rng, rectified);
    const MatrixXd x = random_batch(4, 6, rng);
    const MatrixXd g = random_batch(3, 6, rng);
    Rng probe_rng(77);
    const auto stats = gradcheck_params(net, x, g, 120, probe_rng);
    CHECK(stats.checked == 120);
    CHECK(stats.max_rel <= 1e-6);
  }
}

TEST_CASE("backward returns the loss gradient with respect to the input") {
  Rng rng(3);
  Mlp net({5, 9, 2}, rng);
  const MatrixXd x = random_batch(5, 4, rng);
  const MatrixXd g = random_batch(2, 4, rng);

  Mlp::Cache cache;
  net.forward(x, cache);
  Mlp::Grads grads = net.make_grads();
  grads.setZero();
  const MatrixXd d_input = net.backward(cache, g, grads);
  REQUIRE(d_input.rows() == 5);
  REQUIRE(d_input.cols() == 4);

  const auto base_pattern = net.activation_pattern(x);
  Rng probe_rng(5);
  std::uniform_int_distribution<int> pr(0, 4), pc(0, 3);
  int checked = 0;
  for (int it = 0; it < 200 && checked < 40; ++it) {
    MatrixXd xp = x;
    const int i = pr(probe_rng), j = pc(probe_rng);
    const double eps = 1e-6;
    xp(i, j) = x(i, j) + eps;
    if (net.activation_pattern(xp) != base_pattern) continue;
    const double hi = probe_loss(net, xp, g);
    xp(i, j) = x(i, j) - eps;
    if (net.activation_pattern(xp) != base_pattern) continue;
    const double lo = probe_loss(net, xp, g);
    const double numeric = (hi - lo) / (2.0 * eps);
    CHECK(d_input(i, j) == doctest::Approx(numeric).epsilon(1e-5));
    checked += 1;
  }
  CHECK(checked == 40);
}

TEST_CASE("plain sgd steps exactly along the negative gradient") {
  Rng rng(4);
  Mlp net({3, 4, 2}, rng);
  const MatrixXd x = random_batch(3, 5, rng);
  const MatrixXd g = random_batch(2, 5, rng);

  Mlp::Cache cache;
  net.forward(x, cache);
  Mlp::Grads grads = net.make_grads();
  grads.setZero();
  net.backward(cache, g, grads);

  std::vector<double> before;
  net.get_params(before);

  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.plain_sgd = true;
  Mlp::AdamState state = net.make_adam();
  net.adam_step(grads, state, cfg);

  std::vector<double> after;
  net.get_params(after);

  size_t i = 0;
  for (size_t l = 0; l < grads.w.size(); ++l) {
    for (int r = 0; r < grads.w[l].rows(); ++r) {
      for (int c = 0; c < grads.w[l].cols(); ++c, ++i) {
        CHECK(after[i] == doctest::Approx(before[i] - 0.01 * grads.w[l](r, c)).epsilon(1e-15));
      }
    }
    for (int r = 0; r < grads.b[l].size(); ++r, ++i) {
      CHECK(after[i] == doctest::Approx(before[i] - 0.01 * grads.b[l][r]).epsilon(1e-15));
    }
  }
}

TEST_CASE("first adam step moves each parameter by roughly the learning rate") {
  Rng rng(5);
  Mlp net({2, 3, 1}, rng);
  const MatrixXd x = random_batch(2, 4, rng);
  const MatrixXd g = MatrixXd::Ones(1, 4);

  Mlp::Cache cache;
  net.forward(x, cache);
  Mlp::Grads grads = net.make_grads();
  grads.setZero();
  net.backward(cache, g, grads);

  std::vector<double> before;
  net.get_params(before);
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Mlp::AdamState state = net.make_adam();
  net.adam_step(grads, state, cfg);
  CHECK(state.step == 1);
  std::vector<double> after;
  net.get_params(after);

  size_t i = 0;
  for (size_t l = 0; l < grads.w.size(); ++l) {
    auto check_one = [&](double grad_entry) {
      const double delta = after[i] - before[i];
      if (std::abs(grad_entry) > 1e-9) {
        CHECK(delta == doctest::Approx(-cfg.lr * grad_entry /
                                       (std::abs(grad_entry) + cfg.eps))
                           .epsilon(1e-6));
      } else {
        CHECK(std::abs(delta) <= cfg.lr);
      }
      ++i;
    };
    for (int r = 0; r < grads.w[l].rows(); ++r) {
      for (int c = 0; c < grads.w[l].cols(); ++c) check_one(grads.w[l](r, c));
    }
    for (int r = 0; r < grads.b[l].size(); ++r) check_one(grads.b[l][r]);
  }
}

TEST_CASE("save and load round-trip bit-identical parameters") {
  Rng rng(6);
  Mlp net({4, 7, 3}, rng, true);
  std::stringstream buf;
  net.save(buf);
  const Mlp back = Mlp::load(buf);

  std::vector<double> a, b;
  net.get_params(a);
  back.get_params(b);
  CHECK(a == b);
  CHECK(back.rectified_output());

  const MatrixXd x = random_batch(4, 5, rng);
  CHECK(net.forward(x) == back.forward(x));
}

TEST_CASE("corrupted stream is rejected on load") {
  Rng rng(7);
  Mlp net({2, 2, 1}, rng);
  std::stringstream buf;
  net.save(buf);
  std::string bytes = buf.str();
  bytes[0] ^= 0xff;  // clobber the magic
  std::stringstream bad(bytes);
  CHECK_THROWS(Mlp::load(bad));
}

TEST_CASE("activation pattern reacts to inputs crossing a kink") {
  Rng rng(8);
  Mlp net({2, 4, 1}, rng);
  const MatrixXd x = random_batch(2, 3, rng);
  CHECK(net.activation_pattern(x) == net.activation_pattern(x));
  CHECK(net.activation_pattern(x) != net.activation_pattern(MatrixXd(-5.0 * x)));
}

TEST_CASE("two-head net exposes trunk features and a rectified head") {
  Rng rng(9);
  TwoHeadNet net(6, {10, 8}, 3, 12, rng);
  CHECK(net.input_dim() == 6);
  CHECK(net.num_actions() == 3);
  CHECK(net.feature_dim() == 8);

  const MatrixXd x = random_batch(6, 5, rng);
  const auto out = net.forward(x);
  CHECK(out.q.rows() == 3);
  CHECK(out.u.rows() == 3);
  CHECK(out.phi.rows() == 8);
  CHECK((out.u.array() >= 0.0).all());
  CHECK(out.q == net.q_values(x));

  const VectorXd phi0 = net.features(x.col(0));
  CHECK(phi0 == out.phi.col(0));
  CHECK((phi0.array() >= 0.0).all());
}

TEST_CASE("training the q head lowers its squared error") {
  Rng rng(10);
  TwoHeadNet net(4, {16, 16}, 2, 8, rng);
  const MatrixXd x = random_batch(4, 32, rng);
  std::vector<int> actions;
  std::uniform_int_distribution<int> pa(0, 1);
  for (int j = 0; j < 32; ++j) actions.push_back(pa(rng));
  VectorXd targets(32);
  for (int j = 0; j < 32; ++j) targets[j] = std::sin(0.5 * j);

  AdamConfig cfg;
  cfg.lr = 3e-3;
  const double first = net.train_q(x, actions, targets, cfg);
  double last = first;
  for (int it = 0; it < 400; ++it) last = net.train_q(x, actions, targets, cfg);
  CHECK(last < 0.2 * first);
}

TEST_CASE("uncertainty head training never touches the trunk") {
  Rng rng(11);
  TwoHeadNet net(4, {8, 8}, 2, 6, rng);
  const MatrixXd x = random_batch(4, 16, rng);
  std::vector<int> actions(16, 1);
  VectorXd targets = VectorXd::Constant(16, 0.3);

  std::vector<double> trunk_before;
  net.q_net().get_params(trunk_before);
  AdamConfig cfg;
  const double loss = net.train_u(x, actions, targets, cfg);
  CHECK(std::isfinite(loss));
  std::vector<double> trunk_after;
  net.q_net().get_params(trunk_after);
  CHECK(trunk_before == trunk_after);

  std::vector<double> head_before;
  net.u_net().get_params(head_before);
  net.train_q(x, actions, targets, cfg);
  std::vector<double> head_after;
  net.u_net().get_params(head_after);
  CHECK(head_before == head_after);
}

TEST_CASE("two-head save and load round-trip preserves behavior") {
  Rng rng(12);
  TwoHeadNet net(5, {6, 6}, 2, 4, rng);
  std::stringstream buf;
  net.save(buf);
  TwoHeadNet back = TwoHeadNet::load(buf);

  const MatrixXd x = random_batch(5, 3, rng);
  const auto a = net.forward(x);
  const auto b = back.forward(x);
  CHECK(a.q == b.q);
  CHECK(a.u == b.u);
  CHECK(a.phi == b.phi);
}

TEST_CASE("target copies are detached from the online net") {
  Rng rng(13);
  TwoHeadNet net(3, {5}, 2, 4, rng);
  TwoHeadNet frozen = target_copy(net);
  const MatrixXd x = random_batch(3, 4, rng);
  const MatrixXd before = frozen.q_values(x);

  std::vector<int> actions(4, 0);
  VectorXd targets = VectorXd::Constant(4, 1.0);
  AdamConfig cfg;
  cfg.lr = 1e-2;
  for (int i = 0; i < 20; ++i) net.train_q(x, actions, targets, cfg);

  CHECK(frozen.q_values(x) == before);
  CHECK(net.q_values(x) != before);
}
