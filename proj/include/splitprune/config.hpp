#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "splitprune/accuracy_oracle.hpp"
#include "splitprune/brute_oracle.hpp"
#include "splitprune/hrl_agent.hpp"
#include "splitprune/model_graph.hpp"
#include "splitprune/perf_model.hpp"

namespace splitprune {

// Invalid run configuration (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  struct Model {
    std::string preset = "toy3";
    std::string file;  // overrides preset when set
  } model;

  struct Env {
    double r_tran_kbps = 1280.0;
    double r_comp = 20.0;
    double acc_req = 0.8;
    double cloud_seconds_per_flop = kDefaultCloudSecondsPerFlop;
    bool send_result = false;
  } env;

  struct Oracle {
    std::string kind = "surrogate";  // surrogate | table
    double base_acc = 0.9;
    double exponent = 2.0;
    double drop_scale = 0.5;
    std::string table;
    bool strict = true;
    double grid = TableOracle::kDefaultGrid;
  } oracle;

  TrainConfig train;

  struct Brute {
    std::string grid = "coarse";  // coarse | fine; ignored when levels is non-empty
    std::vector<double> levels;
    std::uint64_t cap = kDefaultEnumerationCap;
  } brute;

  struct Run {
    std::string output_dir = "out";
    int threads = 0;  // 0 = all available cores
  } run;
};

// Scalar or array value from the config file.
using ConfigValue = std::variant<bool, double, std::string, std::vector<double>>;

// TOML subset:
//   # comment
//   [section]
//   key = 1.5 | 42 | true | "text" | [0.0, 0.25]
// Sections: model, env, oracle, train, brute, run. Unknown sections or keys are rejected.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

// Applies "section.key=value" using the same value syntax as the file.
void apply_override(RunConfig& config, std::string_view assignment);
void apply_setting(RunConfig& config, const std::string& section, const std::string& key,
                   const ConfigValue& value);

// Throws ConfigError for inconsistent values.
void validate(const RunConfig& config);

LayerGraph resolve_graph(const RunConfig& config);
Environment resolve_environment(const RunConfig& config);
std::unique_ptr<AccuracyOracle> resolve_oracle(const RunConfig& config, const LayerGraph& graph);
Grid resolve_grid(const RunConfig& config, const LayerGraph& graph);

}  // namespace splitprune
