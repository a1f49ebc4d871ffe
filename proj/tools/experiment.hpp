#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace urbe::exp {

using Json = nlohmann::json;

// Full default tree for an env family ("simple-mdp", "marsrover", "cartpole").
Json default_config(const std::string& env_id);

// Reads the user file (optional), applies KEY=VALUE overrides, then fills the
// gaps from the env family's defaults. `out_flag`, when non-empty, replaces
// the "out" entry.
Json resolve_config(const std::string& config_path, const std::vector<std::string>& overrides,
                    const std::string& out_flag);

// Sets a dotted path ("agent.beta=0.7", "schedule.1.param=0.8"); the value is
// parsed as JSON when possible and kept as a string otherwise.
void apply_override(Json& cfg, const std::string& assignment);

// Recursive merge; values from `over` win, objects merge key by key.
void deep_merge(Json& base, const Json& over);

// Round-trip exact, deterministic float formatting for CSV cells.
std::string fmt(double v);
std::string fmt(long v);

struct CommonArgs {
  long seed = -1;  // <0 keeps the config's seed
};

int cmd_urbe_simple(Json cfg, const CommonArgs& args);
int cmd_train_deep(Json cfg, const CommonArgs& args);
int cmd_eval_sweep(Json cfg, const CommonArgs& args);
int cmd_heatmap(Json cfg, const CommonArgs& args);

}  // namespace urbe::exp
