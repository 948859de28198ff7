#include "splitprune/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "splitprune/errors.hpp"

namespace splitprune {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("bad number '" + text + "'");
  return v;
}

ConfigValue parse_value(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError("missing value");
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') throw ConfigError("unterminated string " + text);
    return text.substr(1, text.size() - 2);
  }
  if (text.front() == '[') {
    if (text.back() != ']') throw ConfigError("unterminated array " + text);
    std::vector<double> values;
    std::istringstream in(text.substr(1, text.size() - 2));
    for (std::string item; std::getline(in, item, ',');) {
      const std::string t = trim(item);
      if (!t.empty()) values.push_back(parse_number(t));
    }
    return values;
  }
  return parse_number(text);
}

// Strips a '#' comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string where(const std::string& section, const std::string& key) { return section + "." + key; }

double as_number(const ConfigValue& v, const std::string& name) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw ConfigError(name + " expects a number");
}

std::int64_t as_integer(const ConfigValue& v, const std::string& name) {
  const double d = as_number(v, name);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError(name + " expects an integer");
  return static_cast<std::int64_t>(d);
}

int as_int(const ConfigValue& v, const std::string& name) {
  const std::int64_t i = as_integer(v, name);
  if (i < -2147483647 || i > 2147483647) throw ConfigError(name + " is out of range");
  return static_cast<int>(i);
}

bool as_bool(const ConfigValue& v, const std::string& name) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError(name + " expects true or false");
}

std::string as_string(const ConfigValue& v, const std::string& name) {
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(name + " expects a quoted string");
}

std::vector<double> as_array(const ConfigValue& v, const std::string& name) {
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  throw ConfigError(name + " expects an array of numbers");
}

}  // namespace

void apply_setting(RunConfig& c, const std::string& section, const std::string& key, const ConfigValue& v) {
  const std::string name = where(section, key);
  auto unknown = [&]() -> void { throw ConfigError("unknown config key '" + name + "'"); };

  if (section == "model") {
    if (key == "preset") c.model.preset = as_string(v, name);
    else if (key == "file") c.model.file = as_string(v, name);
    else unknown();
  } else if (section == "env") {
    if (key == "r_tran_kbps") c.env.r_tran_kbps = as_number(v, name);
    else if (key == "r_comp") c.env.r_comp = as_number(v, name);
    else if (key == "acc_req") c.env.acc_req = as_number(v, name);
    else if (key == "cloud_seconds_per_flop") c.env.cloud_seconds_per_flop = as_number(v, name);
    else if (key == "send_result") c.env.send_result = as_bool(v, name);
    else unknown();
  } else if (section == "oracle") {
    if (key == "kind") c.oracle.kind = as_string(v, name);
    else if (key == "base_acc") c.oracle.base_acc = as_number(v, name);
    else if (key == "exponent") c.oracle.exponent = as_number(v, name);
    else if (key == "drop_scale") c.oracle.drop_scale = as_number(v, name);
    else if (key == "table") c.oracle.table = as_string(v, name);
    else if (key == "strict") c.oracle.strict = as_bool(v, name);
    else if (key == "grid") c.oracle.grid = as_number(v, name);
    else unknown();
  } else if (section == "train") {
    TrainConfig& t = c.train;
    if (key == "batch_size") t.batch_size = as_int(v, name);
    else if (key == "lr_q") t.lr_q = as_number(v, name);
    else if (key == "lr_option") t.lr_option = as_number(v, name);
    else if (key == "tau") t.tau = as_number(v, name);
    else if (key == "warmup_per_option") t.warmup_per_option = as_int(v, name);
    else if (key == "episodes") t.episodes = as_int(v, name);
    else if (key == "seed") {
      const std::int64_t s = as_integer(v, name);
      if (s < 0) throw ConfigError(name + " must be non-negative");
      t.seed = static_cast<std::uint64_t>(s);
    }
    else if (key == "noise_init") t.noise_init = as_number(v, name);
    else if (key == "noise_decay") t.noise_decay = as_number(v, name);
    else if (key == "epsilon_min") t.epsilon_min = as_number(v, name);
    else if (key == "priority_alpha") t.priority_alpha = as_number(v, name);
    else if (key == "priority_eps") t.priority_eps = as_number(v, name);
    else if (key == "hidden") t.hidden = as_int(v, name);
    else if (key == "replay_per_conv") t.replay_per_conv = as_int(v, name);
    else if (key == "updates_per_episode") t.updates_per_episode = as_int(v, name);
    else if (key == "r_max") t.r_max = as_number(v, name);
    else unknown();
  } else if (section == "brute") {
    if (key == "grid") c.brute.grid = as_string(v, name);
    else if (key == "levels") c.brute.levels = as_array(v, name);
    else if (key == "cap") {
      const std::int64_t cap = as_integer(v, name);
      if (cap <= 0) throw ConfigError(name + " must be positive");
      c.brute.cap = static_cast<std::uint64_t>(cap);
    }
    else unknown();
  } else if (section == "run") {
    if (key == "output_dir") c.run.output_dir = as_string(v, name);
    else if (key == "threads") c.run.threads = as_int(v, name);
    else unknown();
  } else {
    throw ConfigError("unknown config section '" + section + "'");
  }
}

RunConfig parse_config(std::string_view text, RunConfig config) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  std::string section;
  try {
    while (std::getline(in, raw)) {
      ++lineno;
      const std::string line = trim(strip_comment(raw));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value");
      if (section.empty()) throw ConfigError("key outside of a section");
      apply_setting(config, section, trim(line.substr(0, eq)), parse_value(line.substr(eq + 1)));
    }
  } catch (const ConfigError& e) {
    throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
  }
  validate(config);
  return config;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const std::string lhs = trim(assignment.substr(0, eq == std::string_view::npos ? 0 : eq));
  const auto dot = lhs.find('.');
  if (eq == std::string_view::npos || dot == std::string::npos) {
    throw ConfigError("override must look like section.key=value, got '" + std::string(assignment) + "'");
  }
  std::string value = trim(assignment.substr(eq + 1));
  // Bare words on the command line are taken as strings.
  const bool bare = !value.empty() && value.front() != '"' && value.front() != '[' && value != "true" &&
                    value != "false" && value.find_first_not_of("0123456789+-.eE") != std::string::npos;
  if (bare) value = "\"" + value + "\"";
  apply_setting(config, lhs.substr(0, dot), lhs.substr(dot + 1), parse_value(value));
}

void validate(const RunConfig& c) {
  try {
    if (c.model.preset.empty() && c.model.file.empty()) throw ConfigError("model needs a preset or a file");
    if (!(c.env.r_tran_kbps > 0.0)) throw ConfigError("env.r_tran_kbps must be positive");
    if (!(c.env.r_comp > 0.0)) throw ConfigError("env.r_comp must be positive");
    if (!(c.env.acc_req >= 0.0 && c.env.acc_req <= 1.0)) throw ConfigError("env.acc_req must lie in [0, 1]");
    if (!(c.env.cloud_seconds_per_flop > 0.0)) throw ConfigError("env.cloud_seconds_per_flop must be positive");
    if (c.oracle.kind != "surrogate" && c.oracle.kind != "table") {
      throw ConfigError("oracle.kind must be \"surrogate\" or \"table\"");
    }
    if (c.oracle.kind == "table" && c.oracle.table.empty()) throw ConfigError("oracle.table is required");
    if (!(c.oracle.base_acc >= 0.0 && c.oracle.base_acc <= 1.0)) throw ConfigError("oracle.base_acc outside [0, 1]");
    if (!(c.oracle.exponent > 0.0)) throw ConfigError("oracle.exponent must be positive");
    if (!(c.oracle.drop_scale >= 0.0)) throw ConfigError("oracle.drop_scale must be non-negative");
    if (!(c.oracle.grid > 0.0)) throw ConfigError("oracle.grid must be positive");
    if (c.brute.grid != "coarse" && c.brute.grid != "fine") throw ConfigError("brute.grid must be coarse or fine");
    if (c.run.threads < 0) throw ConfigError("run.threads must be non-negative");
    if (c.run.output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
    c.train.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

LayerGraph resolve_graph(const RunConfig& c) {
  try {
    return c.model.file.empty() ? preset(c.model.preset) : load_graph(c.model.file);
  } catch (const NotFound& e) {
    throw ConfigError(e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

Environment resolve_environment(const RunConfig& c) {
  Environment env = Environment::from_kbps(c.env.r_tran_kbps, c.env.r_comp, c.env.acc_req);
  env.cloud_seconds_per_flop = c.env.cloud_seconds_per_flop;
  env.send_result = c.env.send_result;
  return env;
}

std::unique_ptr<AccuracyOracle> resolve_oracle(const RunConfig& c, const LayerGraph& graph) {
  if (c.oracle.kind == "table") {
    try {
      return std::make_unique<TableOracle>(TableOracle::load(c.oracle.table, c.oracle.strict, c.oracle.grid));
    } catch (const NotFound& e) {
      throw ConfigError(e.what());
    }
  }
  return std::make_unique<SurrogateOracle>(graph, c.oracle.base_acc, c.oracle.exponent, c.oracle.drop_scale);
}

Grid resolve_grid(const RunConfig& c, const LayerGraph& graph) {
  Grid grid = c.brute.grid == "fine" ? Grid::fine(graph, c.train.r_max) : Grid::coarse(graph);
  if (!c.brute.levels.empty()) grid.rate_levels = c.brute.levels;
  try {
    grid.validate(graph, c.train.r_max);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("brute: ") + e.what());
  }
  return grid;
}

}  // namespace splitprune
