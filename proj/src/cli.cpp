#include "splitprune/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "splitprune/brute_oracle.hpp"
#include "splitprune/config.hpp"
#include "splitprune/errors.hpp"
#include "splitprune/hrl_agent.hpp"
#include "splitprune/mdp_env.hpp"

namespace splitprune::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string preset;
  std::string output_dir;
  int threads = -1;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Run configuration file");
  cmd->add_option("--set", opts.overrides, "Override a config value: section.key=value (repeatable)");
  cmd->add_option("--preset", opts.preset, "Model preset (overrides model.preset)");
  cmd->add_option("-o,--out", opts.output_dir, "Output directory (overrides run.output_dir)");
  cmd->add_option("-j,--threads", opts.threads, "Worker threads, 0 = all cores (overrides run.threads)");
  cmd->add_option("--seed", opts.seed, "Root seed (overrides train.seed)");
}

// defaults < config file < --set < dedicated flags
RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  for (const std::string& o : opts.overrides) apply_override(cfg, o);
  if (!opts.preset.empty()) {
    cfg.model.preset = opts.preset;
    cfg.model.file.clear();
  }
  if (!opts.output_dir.empty()) cfg.run.output_dir = opts.output_dir;
  if (opts.threads >= 0) cfg.run.threads = opts.threads;
  if (opts.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
  validate(cfg);
  if (cfg.run.threads > 0) omp_set_num_threads(cfg.run.threads);
  return cfg;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

void echo_config(const fs::path& dir, const CommonOptions& opts) {
  std::string text;
  if (!opts.config_path.empty()) {
    std::ifstream f(opts.config_path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  write_file(dir / "config.toml", text);
  std::string flags;
  for (const auto& o : opts.overrides) flags += "--set " + o + "\n";
  if (!opts.preset.empty()) flags += "--preset " + opts.preset + "\n";
  if (opts.seed >= 0) flags += "--seed " + std::to_string(opts.seed) + "\n";
  write_file(dir / "overrides.txt", flags);
}

nlohmann::json plan_json(const LayerGraph& graph, const Episode& ep) {
  return {{"model", graph.name()},
          {"partition", ep.plan.partition},
          {"layers", graph.size()},
          {"rates", ep.plan.prune.rates},
          {"acc", ep.final_acc},
          {"t_edge", ep.latency.t_edge},
          {"t_trans", ep.latency.t_trans},
          {"t_cloud", ep.latency.t_cloud},
          {"total", ep.latency.total},
          {"reward", ep.terminal_reward}};
}

void print_plan(std::ostream& out, const LayerGraph& graph, const Episode& ep) {
  out << "model:      " << graph.name() << "\n";
  out << "partition:  " << ep.plan.partition << " of " << graph.size() << " layers on the edge\n";
  out << "rates:     ";
  for (std::size_t i = 0; i < ep.plan.prune.rates.size(); ++i) {
    out << (i ? ", " : " ") << num(ep.plan.prune.rates[i]);
  }
  out << "\naccuracy:   " << num(ep.final_acc) << "\n";
  out << "t_edge:     " << num(ep.latency.t_edge) << " s\n";
  out << "t_trans:    " << num(ep.latency.t_trans) << " s\n";
  out << "t_cloud:    " << num(ep.latency.t_cloud) << " s\n";
  out << "total:      " << num(ep.latency.total) << " s\n";
  out << "reward:     " << num(ep.terminal_reward) << "\n";
}

HrlAgent load_agent(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFound("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return HrlAgent::from_json(j);
}

void check_agent_fits(const HrlAgent& agent, const PruningMdp& mdp) {
  if (agent.state_size() != mdp.layout().size() || agent.options() != mdp.options()) {
    throw ConfigError("checkpoint was trained for a different model than '" + mdp.graph().name() + "'");
  }
}

// ---------------------------------------------------------------------------

int cmd_train(const CommonOptions& opts, int episodes, bool episode_log, std::ostream& out) {
  RunConfig cfg = resolve_config(opts);
  if (episodes >= 0) cfg.train.episodes = episodes;
  const LayerGraph graph = resolve_graph(cfg);
  const Environment env = resolve_environment(cfg);
  const auto oracle = resolve_oracle(cfg, graph);
  const PruningMdp mdp(graph, env, *oracle, cfg.train.r_max);

  const fs::path dir = cfg.run.output_dir;
  fs::create_directories(dir);
  echo_config(dir, opts);

  std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
  metrics << kMetricsHeader << "\n";
  std::ofstream episodes_out;
  if (episode_log) episodes_out.open(dir / "episodes.jsonl", std::ios::binary);

  HrlAgent agent(mdp.layout(), mdp.options(), cfg.train);
  agent.train(mdp, [&](const EpisodeMetrics& m) { metrics << metrics_csv_row(m) << "\n"; });
  metrics.close();
  if (episode_log) {
    // The replay buffer holds the most recent episodes in slot order.
    for (std::size_t i = 0; i < agent.replay().size(); ++i) episodes_out << episode_to_json(agent.replay().at(i)) << "\n";
  }

  write_file(dir / "checkpoint.json", agent.to_json().dump());
  const Episode best = agent.plan(mdp);
  write_file(dir / "plan.json", plan_json(graph, best).dump(2) + "\n");
  print_plan(out, graph, best);
  out << "wrote " << (dir / "metrics.csv").string() << ", " << (dir / "checkpoint.json").string() << "\n";
  return kOk;
}

int cmd_plan(const CommonOptions& opts, const std::string& checkpoint, bool as_json, std::ostream& out) {
  const RunConfig cfg = resolve_config(opts);
  const LayerGraph graph = resolve_graph(cfg);
  const Environment env = resolve_environment(cfg);
  const auto oracle = resolve_oracle(cfg, graph);
  const PruningMdp mdp(graph, env, *oracle, cfg.train.r_max);
  const HrlAgent agent = load_agent(checkpoint);
  check_agent_fits(agent, mdp);
  const Episode ep = agent.plan(mdp);
  if (as_json) {
    out << plan_json(graph, ep).dump() << "\n";
  } else {
    print_plan(out, graph, ep);
  }
  return kOk;
}

int cmd_brute(const CommonOptions& opts, const std::string& grid_mode, const std::vector<double>& levels,
              long long cap, bool as_json, std::ostream& out) {
  RunConfig cfg = resolve_config(opts);
  if (!grid_mode.empty()) cfg.brute.grid = grid_mode;
  if (!levels.empty()) cfg.brute.levels = levels;
  if (cap > 0) cfg.brute.cap = static_cast<std::uint64_t>(cap);
  validate(cfg);
  const LayerGraph graph = resolve_graph(cfg);
  const Environment env = resolve_environment(cfg);
  const auto oracle = resolve_oracle(cfg, graph);
  const Grid grid = resolve_grid(cfg, graph);

  const BruteResult result = enumerate_best(graph, env, *oracle, grid, true, cfg.brute.cap, cfg.train.r_max);
  const fs::path dir = cfg.run.output_dir;
  fs::create_directories(dir);
  echo_config(dir, opts);
  {
    std::ofstream table(dir / "brute.csv", std::ios::binary);
    write_table_csv(table, graph, result.table);
  }
  Episode best;
  best.plan = result.best.plan;
  best.final_acc = result.best.acc;
  best.latency = result.best.latency;
  best.terminal_reward = result.best.reward;
  nlohmann::json summary = plan_json(graph, best);
  summary["evaluated"] = result.evaluated;
  write_file(dir / "brute_best.json", summary.dump(2) + "\n");
  if (as_json) {
    out << summary.dump() << "\n";
  } else {
    print_plan(out, graph, best);
    out << "evaluated:  " << result.evaluated << " plans\n";
  }
  return kOk;
}

int cmd_sweep(const CommonOptions& opts, const std::string& param, const std::string& backend,
              const std::string& checkpoint, std::ostream& out) {
  const auto eq = param.find('=');
  if (eq == std::string::npos) throw ConfigError("--param must look like name=v1,v2,...");
  std::string key = param.substr(0, eq);
  if (key.find('.') == std::string::npos) key = "env." + key;
  std::vector<std::string> values;
  std::istringstream in(param.substr(eq + 1));
  for (std::string v; std::getline(in, v, ',');) {
    if (!v.empty()) values.push_back(v);
  }
  if (values.empty()) throw ConfigError("--param lists no values");
  if (backend != "brute" && backend != "plan") throw ConfigError("--backend must be brute or plan");
  if (backend == "plan" && checkpoint.empty()) throw ConfigError("--backend plan needs --checkpoint");

  const RunConfig base = resolve_config(opts);
  std::optional<HrlAgent> agent;
  if (backend == "plan") agent.emplace(load_agent(checkpoint));

  const fs::path dir = base.run.output_dir;
  fs::create_directories(dir);
  echo_config(dir, opts);
  std::ofstream csv(dir / "sweep.csv", std::ios::binary);

  bool header = false;
  for (const std::string& value : values) {
    RunConfig cfg = base;
    apply_override(cfg, key + "=" + value);
    validate(cfg);
    const LayerGraph graph = resolve_graph(cfg);
    const Environment env = resolve_environment(cfg);
    const auto oracle = resolve_oracle(cfg, graph);

    Episode ep;
    if (backend == "brute") {
      const BruteResult r = enumerate_best(graph, env, *oracle, resolve_grid(cfg, graph), false, cfg.brute.cap,
                                           cfg.train.r_max);
      ep.plan = r.best.plan;
      ep.final_acc = r.best.acc;
      ep.latency = r.best.latency;
      ep.terminal_reward = r.best.reward;
    } else {
      const PruningMdp mdp(graph, env, *oracle, cfg.train.r_max);
      check_agent_fits(*agent, mdp);
      ep = agent->plan(mdp);
    }
    if (!header) {
      csv << "param,value,partition";
      for (std::size_t c = 0; c < graph.conv_count(); ++c) csv << ",rate_" << c;
      csv << ",acc,t_edge,t_trans,t_cloud,reward\n";
      header = true;
    }
    csv << key << "," << value << "," << ep.plan.partition;
    for (double r : ep.plan.prune.rates) csv << "," << num(r);
    csv << "," << num(ep.final_acc) << "," << num(ep.latency.t_edge) << "," << num(ep.latency.t_trans) << ","
        << num(ep.latency.t_cloud) << "," << num(ep.terminal_reward) << "\n";
    out << key << "=" << value << "  partition=" << ep.plan.partition << "  reward=" << num(ep.terminal_reward)
        << "\n";
  }
  out << "wrote " << (dir / "sweep.csv").string() << "\n";
  return kOk;
}

int cmd_presets(const std::string& dump, std::ostream& out) {
  if (!dump.empty()) {
    try {
      out << preset_text(dump);
    } catch (const NotFound& e) {
      throw ConfigError(e.what());
    }
    return kOk;
  }
  for (const std::string& name : preset_names()) {
    const LayerGraph g = preset(name);
    out << name << "  layers=" << g.size() << "  conv=" << g.conv_count()
        << "  options=" << partition_options(g).size() << "  input=" << g.input_shape().h << "x"
        << g.input_shape().w << "x" << g.input_shape().c << "  gflops=" << num(total_flops(g) / 1e9) << "\n";
  }
  return kOk;
}

int cmd_inspect(const std::string& checkpoint, std::ostream& out) {
  const HrlAgent agent = load_agent(checkpoint);
  out << "format:        splitprune-agent v1\n";
  out << "state size:    " << agent.state_size() << "\n";
  out << "options:      ";
  for (int o : agent.options()) out << " " << o;
  out << "\nepisodes done: " << agent.episodes_done() << "\n";
  out << "noise scale:   " << num(agent.noise_scale()) << "\n";
  out << "reward scale:  " << num(agent.reward_scale()) << "\n";
  out << "q_net:         ";
  for (std::size_t i = 0; i < agent.q_net().widths().size(); ++i) out << (i ? "-" : "") << agent.q_net().widths()[i];
  out << " (" << agent.q_net().parameter_count() << " parameters)\n";
  out << "actors:        " << agent.option_count() << " x ";
  for (std::size_t i = 0; i < agent.actor(0).widths().size(); ++i) out << (i ? "-" : "") << agent.actor(0).widths()[i];
  out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint edge-cloud partitioning and channel-pruning planner"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* train = app.add_subcommand("train", "Train the hierarchical agent");
  add_common(train, common);
  int episodes = -1;
  bool episode_log = false;
  train->add_option("--episodes", episodes, "Learning episodes after warm-up (overrides train.episodes)");
  train->add_flag("--episode-log", episode_log, "Also write the replay contents as episodes.jsonl");

  auto* plan = app.add_subcommand("plan", "Plan with a trained checkpoint");
  add_common(plan, common);
  std::string checkpoint;
  bool as_json = false;
  plan->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
  plan->add_flag("--json", as_json, "Machine-readable output");

  auto* brute = app.add_subcommand("brute", "Exhaustive grid search over plans");
  add_common(brute, common);
  std::string grid_mode;
  std::vector<double> levels;
  long long cap = 0;
  brute->add_option("--grid", grid_mode, "coarse or fine")->check(CLI::IsMember({"coarse", "fine"}));
  brute->add_option("--levels", levels, "Explicit rate levels")->delimiter(',');
  brute->add_option("--cap", cap, "Maximum number of plans to enumerate");
  brute->add_flag("--json", as_json, "Machine-readable output");

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter with the brute or plan backend");
  add_common(sweep, common);
  std::string param;
  std::string backend = "brute";
  sweep->add_option("--param", param, "name=v1,v2,... (name is an env key or section.key)")->required();
  sweep->add_option("--backend", backend, "brute or plan");
  sweep->add_option("--checkpoint", checkpoint, "Checkpoint for the plan backend");

  auto* presets = app.add_subcommand("presets", "List the compiled-in architectures");
  std::string dump;
  presets->add_option("--dump", dump, "Print one preset in the model text format");

  auto* inspect = app.add_subcommand("inspect", "Summarize a checkpoint");
  inspect->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(common, episodes, episode_log, out);
    if (*plan) return cmd_plan(common, checkpoint, as_json, out);
    if (*brute) return cmd_brute(common, grid_mode, levels, cap, as_json, out);
    if (*sweep) return cmd_sweep(common, param, backend, checkpoint, out);
    if (*presets) return cmd_presets(dump, out);
    if (*inspect) return cmd_inspect(checkpoint, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Refused& e) {
    err << "refused: " << e.what() << "\n";
    return kRefused;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}

}  // namespace splitprune::cli
