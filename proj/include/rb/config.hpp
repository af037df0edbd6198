#pragma once

// Config schema (strict: unknown keys rejected), built-in presets that
// reproduce the reference experiments, and the experiment runner behind the
// CLI subcommands.

#include <string>
#include <vector>

#include <json.hpp>

#include "rb/diffusion.hpp"

namespace rb {

using json = nlohmann::json;

struct Preset {
  std::string name;
  std::string description;
  json config;
};

const std::vector<Preset>& presets();
const Preset* find_preset(const std::string& name);

ProfilePtr profile_from_json(const json& j);
HiddenLaw hidden_from_json(const json& j, const SurfaceProfile* profile);
SdeModel model_from_json(const json& j);

// validates, runs the experiment named in config["experiment"], writes
// data.csv / meta.json / report.json under out_dir; returns the meta document
json run_experiment(const json& config, const std::string& out_dir, int threads);

// full CLI: subcommands simulate-chain, simulate-sde, compute-matrices,
// verify-generator, stationary-test, chain-vs-sde, presets
int cli_main(int argc, const char* const* argv);

// strict-schema helpers shared with tests
void check_keys(const json& j, const std::string& where, const std::vector<std::string>& allowed);
json apply_override(json config, const std::string& key_path, const std::string& value);

}  // namespace rb
