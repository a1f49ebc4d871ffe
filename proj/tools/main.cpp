#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "experiment.hpp"

namespace {

struct SharedFlags {
  std::string config;
  std::string out;
  long seed = -1;
  std::vector<std::string> overrides;
};

void attach(CLI::App* sub, SharedFlags& flags) {
  sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", flags.seed, "RNG seed (overrides the config's seed)");
  sub->add_option("--out", flags.out, "output directory");
  sub->add_option("--override", flags.overrides, "config override KEY=VALUE (repeatable)");
}

int dispatch(const SharedFlags& flags,
             const std::function<int(urbe::exp::Json, const urbe::exp::CommonArgs&)>& cmd) {
  urbe::exp::Json cfg = urbe::exp::resolve_config(flags.config, flags.overrides, flags.out);
  urbe::exp::CommonArgs args;
  args.seed = flags.seed;
  return cmd(std::move(cfg), args);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"URBE experiment runner"};
  app.require_subcommand(1);

  SharedFlags flags;
  int rc = 0;
  auto run = [&](const char* name, const char* desc, auto cmd) {
    CLI::App* sub = app.add_subcommand(name, desc);
    attach(sub, flags);
    sub->callback([&flags, &rc, cmd] { rc = dispatch(flags, cmd); });
    return sub;
  };

  run("urbe-simple", "tabular agents on the two-step decision problem",
      urbe::exp::cmd_urbe_simple);
  run("train-deep", "train a deep agent on marsrover or cartpole", urbe::exp::cmd_train_deep);
  run("eval-sweep", "evaluate a checkpoint across a parameter grid", urbe::exp::cmd_eval_sweep);
  run("heatmap", "record state occupancy under a trained policy", urbe::exp::cmd_heatmap);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << urbe::exp::Json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return rc;
}
