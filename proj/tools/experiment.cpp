#include "experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "urbe/deep_agent.hpp"
#include "urbe/envs/simple_mdp.hpp"
#include "urbe/urbe_agent.hpp"

namespace fs = std::filesystem;

namespace urbe::exp {

namespace {

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

Json agent_defaults(const std::string& env_id) {
  Json a{{"id", "dqn-urbe"},
         {"gamma", 0.9},
         {"lr_q", 1e-4},
         {"lr_u", 1e-4},
         {"plain_sgd", false},
         {"beta", 0.5},
         {"mu", 1e-2},
         {"target_interval", 10},
         {"replay_capacity", 50000},
         {"min_replay", 500},
         {"update_every", 1},
         {"eps_start", 1.0},
         {"eps_decay_frac", 0.6}};
  if (env_id == "cartpole") {
    a["batch_size"] = 256;
    a["trunk_hidden"] = Json::array({128, 128, 128});
    a["uncertainty_hidden"] = 100;
    a["eps_final"] = 1e-5;
  } else {
    a["batch_size"] = 100;
    a["trunk_hidden"] = Json::array({10, 10});
    a["uncertainty_hidden"] = 15;
    a["eps_final"] = 1e-3;
    a["plain_sgd"] = true;
  }
  return a;
}

Json schedule_entry(int episode, double param) {
  return Json{{"episode", episode}, {"param", param}};
}

}  // namespace

Json default_config(const std::string& env_id) {
  if (env_id == "simple-mdp") {
    return Json{
        {"env", {{"id", "simple-mdp"}, {"p_win", 0.5}}},
        {"schedule", Json::array({schedule_entry(0, 0.001), schedule_entry(250, 0.8),
                                  schedule_entry(500, 0.1), schedule_entry(750, 0.9)})},
        {"tabular",
         {{"psi", 0.1},
          {"beta", 0.5},
          {"nu", "dirichlet"},
          {"estimator", "plug-in"},
          {"mc_samples", 32},
          {"prior_count", 1.0},
          {"bonus_scale", 0.25},
          {"replan_every", 1},
          {"episodes", 1000},
          {"seeds", 10},
          {"base_seed", 1}}},
        {"out", "runs/urbe-simple"}};
  }
  if (env_id == "marsrover") {
    return Json{
        {"env",
         {{"id", "marsrover"},
          {"size", 10},
          {"fail_prob", 0.005},
          {"reward_success", 1.0},
          {"reward_fail", -0.2},
          {"reward_step", -0.01},
          {"horizon", 200},
          {"start_zone", 3}}},
        {"agent", agent_defaults("marsrover")},
        {"models", {{"count", 15}, {"seed", 20190607}}},
        {"schedule", Json::array({schedule_entry(0, 0.005)})},
        {"train",
         {{"episodes", 3000}, {"seed", 1}, {"checkpoint", "agent.ckpt"}, {"resume", ""}}},
        {"eval",
         {{"episodes", 200},
          {"grid", Json::array({0.005, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3})},
          {"seed", 9090},
          {"checkpoint", "agent.ckpt"},
          {"policy", "algorithm"}}},
        {"heatmap",
         {{"episodes", 100},
          {"param", 0.005},
          {"seed", 4242},
          {"checkpoint", "agent.ckpt"},
          {"policy", "algorithm"}}},
        {"out", "runs/marsrover"}};
  }
  if (env_id == "cartpole") {
    return Json{
        {"env",
         {{"id", "cartpole"},
          {"pole_half_length", 0.75},
          {"gravity", 9.8},
          {"cart_mass", 1.0},
          {"pole_mass", 0.1},
          {"force_mag", 10.0},
          {"dt", 0.02},
          {"x_threshold", 2.4},
          {"theta_threshold_deg", 12.0},
          {"horizon", 200}}},
        {"agent", agent_defaults("cartpole")},
        {"models", {{"count", 15}, {"center", 0.75}, {"sigma", 0.25}, {"seed", 20190607}}},
        {"schedule", Json::array({schedule_entry(0, 0.75)})},
        {"train",
         {{"episodes", 4000}, {"seed", 1}, {"checkpoint", "agent.ckpt"}, {"resume", ""}}},
        {"eval",
         {{"episodes", 200},
          {"grid", Json::array({0.25, 0.5, 0.75, 1.0, 1.25, 1.5})},
          {"seed", 9090},
          {"checkpoint", "agent.ckpt"},
          {"policy", "algorithm"}}},
        {"heatmap",
         {{"episodes", 100},
          {"param", 0.75},
          {"seed", 4242},
          {"checkpoint", "agent.ckpt"},
          {"policy", "algorithm"}}},
        {"out", "runs/cartpole"}};
  }
  throw std::invalid_argument("config: unknown env id '" + env_id + "'");
}

void deep_merge(Json& base, const Json& over) {
  if (!over.is_object() || !base.is_object()) {
    base = over;
    return;
  }
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (base.contains(it.key())) {
      deep_merge(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

void apply_override(Json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must look like KEY=VALUE: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;  // plain string
  }

  Json* node = &cfg;
  std::stringstream path(key);
  std::string token;
  std::vector<std::string> tokens;
  while (std::getline(path, token, '.')) tokens.push_back(token);
  if (tokens.empty()) throw std::invalid_argument("override: empty key in " + assignment);
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    const auto& t = tokens[i];
    const bool is_index = !t.empty() && t.find_first_not_of("0123456789") == std::string::npos;
    if (is_index && node->is_array()) {
      const size_t idx = std::stoul(t);
      if (idx >= node->size()) throw std::invalid_argument("override: index out of range in " + key);
      node = &(*node)[idx];
    } else {
      node = &(*node)[t];
    }
  }
  const auto& last = tokens.back();
  const bool is_index = !last.empty() && last.find_first_not_of("0123456789") == std::string::npos;
  if (is_index && node->is_array()) {
    const size_t idx = std::stoul(last);
    if (idx >= node->size()) throw std::invalid_argument("override: index out of range in " + key);
    (*node)[idx] = value;
  } else {
    (*node)[last] = value;
  }
}

Json resolve_config(const std::string& config_path, const std::vector<std::string>& overrides,
                    const std::string& out_flag) {
  Json user = Json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("config: cannot open " + config_path);
    in >> user;
  }
  for (const auto& o : overrides) apply_override(user, o);

  std::string env_id = "simple-mdp";
  if (user.contains("env") && user["env"].contains("id")) {
    env_id = user["env"]["id"].get<std::string>();
  }
  Json cfg = default_config(env_id);
  deep_merge(cfg, user);
  if (!out_flag.empty()) cfg["out"] = out_flag;
  return cfg;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(long v) { return std::to_string(v); }

namespace {

// Header config: the semantic part of the tree; the output location is not.
Json header_config(Json cfg) {
  cfg.erase("out");
  return cfg;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const Json& header_cfg, long seed,
            const std::string& columns, bool append = false) {
    const bool fresh = !append || !fs::exists(path) || fs::file_size(path) == 0;
    os_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!os_) throw std::runtime_error("cannot open " + path.string());
    if (fresh) {
      os_ << "# config: " << header_cfg.dump() << "\n";
      os_ << "# seed: " << seed << "\n";
      os_ << columns << "\n";
    }
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ",";
      os_ << cells[i];
    }
    os_ << "\n";
  }

 private:
  std::ofstream os_;
};

class JsonlWriter {
 public:
  JsonlWriter(const fs::path& path, const Json& header_cfg, long seed, bool append = false) {
    const bool fresh = !append || !fs::exists(path) || fs::file_size(path) == 0;
    os_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!os_) throw std::runtime_error("cannot open " + path.string());
    if (fresh) os_ << Json{{"config", header_cfg}, {"seed", seed}}.dump() << "\n";
  }

  void row(const Json& j) { os_ << j.dump() << "\n"; }

 private:
  std::ofstream os_;
};

std::vector<ScheduleEntry> parse_schedule(const Json& j) {
  std::vector<ScheduleEntry> schedule;
  for (const auto& entry : j) {
    schedule.push_back({entry.at("episode").get<int>(), entry.at("param").get<double>()});
  }
  for (size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i].episode <= schedule[i - 1].episode) {
      throw std::invalid_argument("schedule: episode indices must increase strictly");
    }
  }
  return schedule;
}

double current_param(const std::vector<ScheduleEntry>& schedule, int episode, double fallback) {
  if (schedule.empty()) return fallback;
  return schedule_param(schedule, episode);
}

fs::path resolve_against(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// ---------------------------------------------------------------------------
// Env and agent construction
// ---------------------------------------------------------------------------

MarsRoverEnv::Config rover_config(const Json& env) {
  MarsRoverEnv::Config c;
  c.size = env.at("size").get<int>();
  c.fail_prob = env.at("fail_prob").get<double>();
  c.reward_success = env.at("reward_success").get<double>();
  c.reward_fail = env.at("reward_fail").get<double>();
  c.reward_step = env.at("reward_step").get<double>();
  c.horizon = env.at("horizon").get<int>();
  c.start_zone = env.at("start_zone").get<int>();
  return c;
}

CartPoleEnv::Config cartpole_config(const Json& env) {
  CartPoleEnv::Config c;
  c.pole_half_length = env.at("pole_half_length").get<double>();
  c.gravity = env.at("gravity").get<double>();
  c.cart_mass = env.at("cart_mass").get<double>();
  c.pole_mass = env.at("pole_mass").get<double>();
  c.force_mag = env.at("force_mag").get<double>();
  c.dt = env.at("dt").get<double>();
  c.x_threshold = env.at("x_threshold").get<double>();
  c.theta_threshold = env.at("theta_threshold_deg").get<double>() * M_PI / 180.0;
  c.horizon = env.at("horizon").get<int>();
  return c;
}

std::unique_ptr<GenerativeEnv> make_deep_env(const Json& env) {
  const std::string id = env.at("id").get<std::string>();
  if (id == "marsrover") return std::make_unique<RoverDeepEnv>(rover_config(env));
  if (id == "cartpole") return std::make_unique<CartPoleDeepEnv>(cartpole_config(env));
  throw std::invalid_argument("env '" + id + "' has no deep runner");
}

FiniteUncertaintySet make_model_set(const Json& cfg, const std::string& env_id) {
  const Json& m = cfg.at("models");
  Rng rng(static_cast<std::uint64_t>(m.at("seed").get<long>()));
  const int count = m.at("count").get<int>();
  if (env_id == "marsrover") return rover_model_set(count, rng);
  const double center =
      m.contains("center") ? m.at("center").get<double>()
                           : cfg.at("env").at("pole_half_length").get<double>();
  return cartpole_model_set(count, center, m.at("sigma").get<double>(), rng);
}

DeepAgentConfig agent_config_from(const Json& cfg, const std::string& env_id) {
  const Json& a = cfg.at("agent");
  DeepAgentConfig c;
  c.kind = agent_kind_from_name(a.at("id").get<std::string>());
  c.gamma = a.at("gamma").get<double>();
  c.q_opt.lr = a.at("lr_q").get<double>();
  c.u_opt.lr = a.at("lr_u").get<double>();
  c.q_opt.plain_sgd = c.u_opt.plain_sgd = a.at("plain_sgd").get<bool>();
  c.beta = a.at("beta").get<double>();
  c.mu = a.at("mu").get<double>();
  c.batch_size = a.at("batch_size").get<int>();
  c.target_interval = a.at("target_interval").get<int>();
  c.replay_capacity = a.at("replay_capacity").get<int>();
  c.min_replay = a.at("min_replay").get<int>();
  c.trunk_hidden = a.at("trunk_hidden").get<std::vector<int>>();
  c.uncertainty_hidden = a.at("uncertainty_hidden").get<int>();
  if (c.uses_robust_targets()) c.models = make_model_set(cfg, env_id);
  return c;
}

UrbeAgentConfig tabular_config_from(const Json& tab, double psi) {
  UrbeAgentConfig c;
  c.psi = psi;
  c.beta = tab.at("beta").get<double>();
  const std::string nu = tab.at("nu").get<std::string>();
  if (nu == "dirichlet") c.nu_mode = UrbeAgentConfig::NuMode::kDirichlet;
  else if (nu == "count") c.nu_mode = UrbeAgentConfig::NuMode::kCount;
  else if (nu == "zero") c.nu_mode = UrbeAgentConfig::NuMode::kZero;
  else throw std::invalid_argument("tabular.nu must be dirichlet, count or zero");
  const std::string est = tab.at("estimator").get<std::string>();
  if (est == "plug-in") c.estimator = EstimatorMode::kPlugIn;
  else if (est == "monte-carlo") c.estimator = EstimatorMode::kMonteCarlo;
  else throw std::invalid_argument("tabular.estimator must be plug-in or monte-carlo");
  c.mc_samples = tab.at("mc_samples").get<int>();
  c.prior_count = tab.at("prior_count").get<double>();
  c.bonus_scale = tab.at("bonus_scale").get<double>();
  c.replan_every = tab.at("replan_every").get<int>();
  return c;
}

Json vec_to_json(const Vec& v) {
  Json arr = Json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// urbe-simple
// ---------------------------------------------------------------------------

int cmd_urbe_simple(Json cfg, const CommonArgs& args) {
  if (cfg.at("env").at("id").get<std::string>() != "simple-mdp") {
    throw std::invalid_argument("urbe-simple: env.id must be simple-mdp");
  }
  Json tab = cfg.at("tabular");
  const int episodes = tab.at("episodes").get<int>();
  const int num_seeds = tab.at("seeds").get<int>();
  long base_seed = tab.at("base_seed").get<long>();
  if (args.seed >= 0) base_seed = args.seed;
  cfg["tabular"]["base_seed"] = base_seed;

  const auto schedule = parse_schedule(cfg.at("schedule"));
  const double p_default = cfg.at("env").at("p_win").get<double>();
  const fs::path out(cfg.at("out").get<std::string>());
  fs::create_directories(out);
  const Json hdr = header_config(cfg);

  const FiniteRMDP mdp = SimpleMdpEnv::as_rmdp();

  // The stationary minimax baseline: solve once against the full simplex on
  // every stochastic edge (radius 2 covers it), then follow that policy.
  const StochasticPolicy robust_pi = [&] {
    const PosteriorState fresh = PosteriorState::from_mdp(mdp);
    return robust_q_solve(mdp, fresh.build_uncertainty_set(2.0)).pi;
  }();

  const std::array<std::string, 3> agents = {"urbe", "ube", "robust"};
  // accumulated-reward series per agent and seed
  std::map<std::string, std::vector<std::vector<double>>> acc;

  for (const auto& name : agents) {
    for (int k = 0; k < num_seeds; ++k) {
      const long seed = base_seed + k;
      Rng rng(static_cast<std::uint64_t>(seed));
      SimpleMdpEnv env(current_param(schedule, 0, p_default));

      std::optional<UrbeAgent> agent;
      if (name == "urbe") {
        agent.emplace(mdp, tabular_config_from(tab, tab.at("psi").get<double>()));
      } else if (name == "ube") {
        agent.emplace(mdp, tabular_config_from(tab, 0.0));
      }

      CsvWriter csv(out / (name + "_seed" + std::to_string(seed) + ".csv"), hdr, seed,
                    "episode,param,reward,accumulated");
      std::optional<JsonlWriter> jsonl;
      if (agent) {
        jsonl.emplace(out / (name + "_seed" + std::to_string(seed) + ".jsonl"), hdr, seed);
      }

      std::vector<double> series;
      series.reserve(episodes);
      double accumulated = 0.0;
      for (int e = 0; e < episodes; ++e) {
        const double p = current_param(schedule, e, p_default);
        env.set_p_win(p);
        double ret = 0.0;
        if (agent) {
          const auto stats = agent->run_episode(env, rng);
          ret = stats.log.ret;
          jsonl->row(Json{{"episode", e},
                          {"return", ret},
                          {"param", p},
                          {"q_start", vec_to_json(stats.q_start)},
                          {"w_start", vec_to_json(stats.w_start)}});
        } else {
          const ActionSelector follow = [&](int h, int s, Rng&) {
            return argmax_lowest(robust_pi.pi[h][s]);
          };
          ret = rollout(env, follow, rng).ret;
        }
        accumulated += ret;
        series.push_back(accumulated);
        csv.row({fmt(static_cast<long>(e)), fmt(p), fmt(ret), fmt(accumulated)});
      }
      acc[name].push_back(std::move(series));
    }
  }

  CsvWriter agg(out / "accumulated_mean.csv", hdr, base_seed,
                "episode,urbe_mean,ube_mean,robust_mean");
  for (int e = 0; e < episodes; ++e) {
    std::vector<std::string> cells{fmt(static_cast<long>(e))};
    for (const auto& name : agents) {
      double sum = 0.0;
      for (const auto& series : acc[name]) sum += series[e];
      cells.push_back(fmt(sum / num_seeds));
    }
    agg.row(cells);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train-deep
// ---------------------------------------------------------------------------

namespace {

std::deque<double> tail_returns(const fs::path& curve, size_t window) {
  std::deque<double> tail;
  std::ifstream in(curve);
  if (!in) return tail;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("episode", 0) == 0) continue;
    const auto c1 = line.find(',');
    if (c1 == std::string::npos) continue;
    const auto c2 = line.find(',', c1 + 1);
    tail.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    if (tail.size() > window) tail.pop_front();
  }
  return tail;
}

}  // namespace

int cmd_train_deep(Json cfg, const CommonArgs& args) {
  const std::string env_id = cfg.at("env").at("id").get<std::string>();
  if (env_id != "marsrover" && env_id != "cartpole") {
    throw std::invalid_argument("train-deep: env.id must be marsrover or cartpole");
  }
  const Json& train = cfg.at("train");
  long seed = train.at("seed").get<long>();
  if (args.seed >= 0) seed = args.seed;
  cfg["train"]["seed"] = seed;

  const int episodes = train.at("episodes").get<int>();
  const auto schedule = parse_schedule(cfg.at("schedule"));
  const Json& a = cfg.at("agent");
  const int update_every = a.at("update_every").get<int>();
  const double eps_start = a.at("eps_start").get<double>();
  const double eps_final = a.at("eps_final").get<double>();
  const double decay_frac = a.at("eps_decay_frac").get<double>();
  const double decay_span = std::max(1.0, decay_frac * episodes);

  const fs::path out(cfg.at("out").get<std::string>());
  fs::create_directories(out);
  const Json hdr = header_config(cfg);

  auto env = make_deep_env(cfg.at("env"));
  const double nominal = env->param();
  const DeepAgentConfig acfg = agent_config_from(cfg, env_id);

  Rng rng(static_cast<std::uint64_t>(seed));
  int start_episode = 0;
  std::optional<DeepAgent> agent;
  const std::string resume = train.at("resume").get<std::string>();
  if (!resume.empty()) {
    const fs::path ckpt = resolve_against(out, resume);
    std::ifstream in(ckpt, std::ios::binary);
    if (!in) throw std::runtime_error("train-deep: cannot open resume checkpoint " + ckpt.string());
    agent.emplace(DeepAgent::load(in, acfg));
    std::ifstream mf(out / "manifest.json");
    if (mf) {
      Json manifest;
      mf >> manifest;
      start_episode = manifest.value("episodes_done", 0);
    }
  } else {
    agent.emplace(acfg, env->feature_dim(), env->num_actions(), rng);
  }
  const bool resuming = start_episode > 0;

  JsonlWriter log(out / "train_log.jsonl", hdr, seed, resuming);
  CsvWriter curve(out / "train_curve.csv", hdr, seed, "episode,return,smoothed,param", resuming);
  std::deque<double> window =
      resuming ? tail_returns(out / "train_curve.csv", 50) : std::deque<double>{};

  double cur_param = std::numeric_limits<double>::quiet_NaN();
  long global_steps = 0;
  for (int e = start_episode; e < episodes; ++e) {
    const double p = current_param(schedule, e, nominal);
    if (p != cur_param) {
      env->set_param(p);
      log.row(Json{{"episode", e}, {"event", "param-change"}, {"param", p}});
      cur_param = p;
    }
    const double eps =
        std::max(eps_final, eps_start + (eps_final - eps_start) * (e / decay_span));

    VectorXd feat = env->reset(rng);
    const VectorXd start_feat = feat;
    double ep_return = 0.0;
    double q_loss_sum = 0.0, u_loss_sum = 0.0;
    int train_steps = 0, steps = 0;
    bool fin = false;
    while (!fin) {
      const int action = agent->act(feat, eps, rng);
      VectorXd raw = env->raw_state();
      auto outcome = env->step(action, rng);
      steps += 1;
      const bool truncated = !outcome.done && steps >= env->horizon();
      fin = outcome.done || truncated;

      StepRecord rec;
      rec.raw_s = std::move(raw);
      rec.feat_s = feat;
      rec.feat_next = outcome.feat_next;
      rec.a = action;
      rec.r = outcome.reward;
      rec.done = fin;
      rec.truncated = truncated;
      rec.h = steps - 1;
      agent->observe(std::move(rec));

      ep_return += outcome.reward;
      feat = std::move(outcome.feat_next);
      global_steps += 1;
      if (global_steps % update_every == 0 && agent->ready()) {
        const auto m = agent->train_step(*env, rng);
        q_loss_sum += m.q_loss;
        u_loss_sum += m.u_loss;
        train_steps += 1;
      }
    }

    window.push_back(ep_return);
    if (window.size() > 50) window.pop_front();
    double smoothed = 0.0;
    for (double r : window) smoothed += r;
    smoothed /= window.size();

    log.row(Json{{"episode", e},
                 {"return", ep_return},
                 {"steps", steps},
                 {"eps", eps},
                 {"param", p},
                 {"q_loss", train_steps ? q_loss_sum / train_steps : 0.0},
                 {"u_loss", train_steps ? u_loss_sum / train_steps : 0.0},
                 {"w_start", agent->mean_uncertainty(start_feat)}});
    curve.row({fmt(static_cast<long>(e)), fmt(ep_return), fmt(smoothed), fmt(p)});
  }

  const fs::path ckpt = resolve_against(out, train.at("checkpoint").get<std::string>());
  try {
    std::ofstream os(ckpt, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing");
    agent->save(os);
    os.flush();
    if (!os) throw std::runtime_error("checkpoint write failed");
  } catch (...) {
    std::ofstream mf(out / "manifest.json");
    mf << Json{{"episodes_done", episodes}, {"partial", true}, {"config", hdr}}.dump(2) << "\n";
    throw;
  }
  std::ofstream mf(out / "manifest.json");
  mf << Json{{"episodes_done", episodes}, {"partial", false}, {"config", hdr}}.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval-sweep
// ---------------------------------------------------------------------------

namespace {

DeepAgent load_agent(const Json& cfg, const std::string& env_id, const fs::path& out,
                     const std::string& checkpoint) {
  DeepAgentConfig acfg = agent_config_from(cfg, env_id);
  acfg.models.params.clear();  // targets are not recomputed when evaluating
  const fs::path ckpt = resolve_against(out, checkpoint);
  std::ifstream in(ckpt, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + ckpt.string());
  return DeepAgent::load(in, std::move(acfg));
}

// Test-time action rule. "algorithm" lets each agent act the way it acts in
// training minus the epsilon floor: Thompson draws for the bonus agents,
// plain greedy for the others. "greedy" strips the bonus from everyone.
struct EvalPolicy {
  enum Kind { kAlgorithm, kGreedy, kBehavior } kind = kAlgorithm;
  double eps_final = 0.0;

  static EvalPolicy parse(const std::string& name, double eps_final) {
    if (name == "algorithm") return {kAlgorithm, 0.0};
    if (name == "greedy") return {kGreedy, 0.0};
    if (name == "behavior") return {kBehavior, eps_final};
    throw std::invalid_argument("policy must be algorithm, greedy or behavior");
  }

  int act(DeepAgent& agent, const VectorXd& feat, Rng& rng) const {
    if (kind == kGreedy) return agent.act_greedy(feat);
    return agent.act(feat, kind == kBehavior ? eps_final : 0.0, rng);
  }
};

}  // namespace

int cmd_eval_sweep(Json cfg, const CommonArgs& args) {
  const std::string env_id = cfg.at("env").at("id").get<std::string>();
  if (env_id != "marsrover" && env_id != "cartpole") {
    throw std::invalid_argument("eval-sweep: env.id must be marsrover or cartpole");
  }
  const Json& ev = cfg.at("eval");
  long seed = ev.at("seed").get<long>();
  if (args.seed >= 0) seed = args.seed;
  cfg["eval"]["seed"] = seed;

  const int episodes = ev.at("episodes").get<int>();
  const auto grid = ev.at("grid").get<std::vector<double>>();
  if (grid.empty()) throw std::invalid_argument("eval-sweep: grid must be non-empty");

  const fs::path out(cfg.at("out").get<std::string>());
  fs::create_directories(out);
  auto env = make_deep_env(cfg.at("env"));
  DeepAgent agent = load_agent(cfg, env_id, out, ev.at("checkpoint").get<std::string>());
  const EvalPolicy policy = EvalPolicy::parse(
      ev.at("policy").get<std::string>(), cfg.at("agent").at("eps_final").get<double>());

  CsvWriter csv(out / "eval_sweep.csv", header_config(cfg), seed,
                "param,episodes,mean_return,std_return,success_rate");
  for (size_t g = 0; g < grid.size(); ++g) {
    env->set_param(grid[g]);
    Rng rng(static_cast<std::uint64_t>(seed) + g);
    double sum = 0.0, sum_sq = 0.0;
    int successes = 0;
    for (int e = 0; e < episodes; ++e) {
      VectorXd feat = env->reset(rng);
      double ret = 0.0;
      int steps = 0;
      bool fin = false;
      while (!fin) {
        const int action = policy.act(agent, feat, rng);
        auto outcome = env->step(action, rng);
        ret += outcome.reward;
        steps += 1;
        fin = outcome.done || steps >= env->horizon();
        feat = std::move(outcome.feat_next);
      }
      sum += ret;
      sum_sq += ret * ret;
      if (env->succeeded()) successes += 1;
    }
    const double mean = sum / episodes;
    const double var = std::max(0.0, sum_sq / episodes - mean * mean);
    csv.row({fmt(grid[g]), fmt(static_cast<long>(episodes)), fmt(mean), fmt(std::sqrt(var)),
             fmt(static_cast<double>(successes) / episodes)});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// heatmap
// ---------------------------------------------------------------------------

int cmd_heatmap(Json cfg, const CommonArgs& args) {
  const std::string env_id = cfg.at("env").at("id").get<std::string>();
  if (env_id != "marsrover" && env_id != "cartpole") {
    throw std::invalid_argument("heatmap: env.id must be marsrover or cartpole");
  }
  const Json& hm = cfg.at("heatmap");
  long seed = hm.at("seed").get<long>();
  if (args.seed >= 0) seed = args.seed;
  cfg["heatmap"]["seed"] = seed;

  const int episodes = hm.at("episodes").get<int>();
  const double param = hm.at("param").get<double>();
  const EvalPolicy policy = EvalPolicy::parse(
      hm.at("policy").get<std::string>(), cfg.at("agent").at("eps_final").get<double>());

  const fs::path out(cfg.at("out").get<std::string>());
  fs::create_directories(out);
  auto env = make_deep_env(cfg.at("env"));
  env->set_param(param);
  DeepAgent agent = load_agent(cfg, env_id, out, hm.at("checkpoint").get<std::string>());

  Rng rng(static_cast<std::uint64_t>(seed));
  const bool spatial = env_id == "marsrover";
  const int size = spatial ? cfg.at("env").at("size").get<int>() : 0;
  std::vector<double> visits(spatial ? size * size : 0, 0.0);
  std::optional<CsvWriter> scatter;
  if (!spatial) {
    scatter.emplace(out / "scatter.csv", header_config(cfg), seed, "episode,step,x,theta,action");
  }

  for (int e = 0; e < episodes; ++e) {
    VectorXd feat = env->reset(rng);
    if (spatial) visits[static_cast<size_t>(std::lround(env->raw_state()[0]))] += 1.0;
    int steps = 0;
    bool fin = false;
    while (!fin) {
      const int action = policy.act(agent, feat, rng);
      if (!spatial) {
        const VectorXd raw = env->raw_state();
        scatter->row({fmt(static_cast<long>(e)), fmt(static_cast<long>(steps)), fmt(raw[0]),
                      fmt(raw[2]), fmt(static_cast<long>(action))});
      }
      auto outcome = env->step(action, rng);
      steps += 1;
      fin = outcome.done || steps >= env->horizon();
      feat = std::move(outcome.feat_next);
      if (spatial) visits[static_cast<size_t>(std::lround(env->raw_state()[0]))] += 1.0;
    }
  }

  if (spatial) {
    double total = 0.0;
    for (double v : visits) total += v;
    CsvWriter csv(out / "heatmap.csv", header_config(cfg), seed, "row proportions");
    for (int r = 0; r < size; ++r) {
      std::vector<std::string> cells;
      cells.reserve(size);
      for (int c = 0; c < size; ++c) cells.push_back(fmt(visits[r * size + c] / total));
      csv.row(cells);
    }
  }
  return 0;
}

}  // namespace urbe::exp
