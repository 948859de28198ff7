#include "splitprune/mdp_env.hpp"

#include <algorithm>
#include <exception>

#include <json.hpp>

#include "splitprune/errors.hpp"

namespace splitprune {

PruningMdp::PruningMdp(const LayerGraph& graph, const Environment& env, const AccuracyOracle& oracle,
                       double r_max)
    : graph_(&graph), env_(env), oracle_(&oracle), r_max_(r_max), options_(partition_options(graph)) {
  check_environment(env_);
  if (!(r_max_ > 0.0 && r_max_ < 1.0)) throw DomainError("r_max must lie in (0, 1)");
  if (graph.conv_count() == 0) throw DomainError("graph has no conv layers to prune");
  layout_.n_layers = graph.size();
  layout_.n_conv = graph.conv_count();

  double max_flops = 0.0;
  double max_channels = graph.input_shape().c;
  double max_bytes = static_cast<double>(input_bytes(graph));
  for (std::size_t i = 0; i < graph.size(); ++i) {
    max_flops = std::max(max_flops, static_cast<double>(layer_flops(graph, i)));
    max_channels = std::max(max_channels, static_cast<double>(graph.layer(i).out_channels));
    max_bytes = std::max(max_bytes, static_cast<double>(output_bytes(graph, i)));
  }
  max_layer_flops_ = std::max(max_flops, 1.0);
  total_flops_ = std::max(static_cast<double>(total_flops(graph)), 1.0);
  max_channels_ = max_channels;
  max_bytes_ = max_bytes;
}

bool PruningMdp::is_option(int partition) const {
  return std::find(options_.begin(), options_.end(), partition) != options_.end();
}

std::vector<double> PruningMdp::features(int option, int cursor, const std::vector<double>& rates) const {
  const LayerGraph pruned = apply_prune(*graph_, PruneVector{rates}, r_max_);
  std::vector<double> f(layout_.size(), 0.0);
  f[0] = env_.r_tran / kRateNormBytesPerSecond;
  f[1] = env_.r_comp / kCompNorm;
  f[2] = env_.acc_req;
  for (std::size_t i = 0; i < layout_.n_layers; ++i) {
    f[layout_.flops_offset() + i] = static_cast<double>(layer_flops(pruned, i)) / max_layer_flops_;
  }
  const auto& convs = pruned.conv_indices();
  for (std::size_t k = 0; k < layout_.n_conv; ++k) {
    f[layout_.channel_offset() + k] = pruned.layer(convs[k]).out_channels / max_channels_;
  }
  const std::size_t d = layout_.data_offset();
  f[d + 0] = static_cast<double>(range_flops(pruned, 0, static_cast<std::size_t>(option))) / total_flops_;
  f[d + 1] = pruned.channels_after(option - 1) / max_channels_;
  f[d + 2] = static_cast<double>(boundary_bytes(pruned, option)) / max_bytes_;
  if (cursor < static_cast<int>(layout_.n_conv)) f[layout_.layer_offset() + cursor] = 1.0;
  std::copy(rates.begin(), rates.end(), f.begin() + static_cast<std::ptrdiff_t>(layout_.action_offset()));
  return f;
}

EnvState PruningMdp::reset(int option) const {
  if (!is_option(option)) {
    throw DomainError("partition option " + std::to_string(option) + " is not admissible for " + graph_->name());
  }
  EnvState s;
  s.option = option;
  s.cursor = 0;
  s.rates.assign(layout_.n_conv, 0.0);
  s.features = features(option, 0, s.rates);
  return s;
}

std::size_t PruningMdp::action_slot(const EnvState& state) const {
  return layout_.action_offset() + static_cast<std::size_t>(state.cursor);
}

std::vector<double> PruningMdp::with_action(const EnvState& state, double rate) const {
  if (state.terminal()) throw DomainError("terminal state has no action slot");
  std::vector<double> f = state.features;
  f[action_slot(state)] = rate;
  return f;
}

Episode PruningMdp::evaluate(const Plan& plan) const {
  check_plan(*graph_, plan, r_max_);
  Episode ep;
  ep.option = plan.partition;
  ep.plan = plan;
  ep.final_acc = oracle_->evaluate(*graph_, plan.prune);
  ep.latency = latency_of_pruned(apply_prune(*graph_, plan.prune, r_max_), plan.partition, env_);
  ep.terminal_reward = reward_from(ep.latency, ep.final_acc, env_);
  return ep;
}

StepResult PruningMdp::step(const EnvState& state, double rate) const {
  if (state.terminal()) throw DomainError("step on a terminal state");
  if (!(rate >= 0.0 && rate <= r_max_)) {
    throw DomainError("pruning rate " + std::to_string(rate) + " outside [0, " + std::to_string(r_max_) + "]");
  }
  StepResult out;
  out.next.option = state.option;
  out.next.cursor = state.cursor + 1;
  out.next.rates = state.rates;
  out.next.rates[static_cast<std::size_t>(state.cursor)] = rate;
  out.next.features = features(out.next.option, out.next.cursor, out.next.rates);
  out.terminal = out.next.terminal();
  if (out.terminal) out.reward = evaluate(Plan{state.option, PruneVector{out.next.rates}}).terminal_reward;
  return out;
}

Episode PruningMdp::rollout(int option, const Policy& policy, Rng& rng) const {
  EnvState s = reset(option);
  std::vector<Step> steps;
  steps.reserve(layout_.n_conv);
  while (!s.terminal()) {
    const double rate = policy(s, rng);
    StepResult r = step(s, rate);
    steps.push_back(Step{std::move(s.features), rate});
    s = std::move(r.next);
  }
  Episode ep = evaluate(Plan{option, PruneVector{s.rates}});
  ep.steps = std::move(steps);
  return ep;
}

// ---------------------------------------------------------------------------

std::vector<Episode> rollout_batch_serial(const PruningMdp& mdp, std::span<const RolloutJob> jobs,
                                          const Policy& policy, std::uint64_t seed, std::string_view name) {
  std::vector<Episode> out;
  out.reserve(jobs.size());
  for (const RolloutJob& job : jobs) {
    Rng rng = substream(seed, name, job.stream);
    out.push_back(mdp.rollout(job.option, policy, rng));
  }
  return out;
}

std::vector<Episode> rollout_batch(const PruningMdp& mdp, std::span<const RolloutJob> jobs, const Policy& policy,
                                   std::uint64_t seed, std::string_view name) {
  std::vector<Episode> out(jobs.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      Rng rng = substream(seed, name, jobs[i].stream);
      out[i] = mdp.rollout(jobs[i].option, policy, rng);
    } catch (...) {
#pragma omp critical(splitprune_rollout_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------

std::string episode_to_json(const Episode& ep) {
  nlohmann::json j;
  j["version"] = StateLayout::kVersion;
  j["option"] = ep.option;
  j["partition"] = ep.plan.partition;
  j["rates"] = ep.plan.prune.rates;
  j["reward"] = ep.terminal_reward;
  j["acc"] = ep.final_acc;
  j["t_edge"] = ep.latency.t_edge;
  j["t_trans"] = ep.latency.t_trans;
  j["t_cloud"] = ep.latency.t_cloud;
  j["total"] = ep.latency.total;
  auto steps = nlohmann::json::array();
  for (const Step& s : ep.steps) steps.push_back({{"state", s.state}, {"rate", s.rate}});
  j["steps"] = std::move(steps);
  return j.dump();
}

Episode episode_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    if (j.at("version").get<int>() != StateLayout::kVersion) throw ParseError("unsupported episode version");
    Episode ep;
    ep.option = j.at("option").get<int>();
    ep.plan.partition = j.at("partition").get<int>();
    ep.plan.prune.rates = j.at("rates").get<std::vector<double>>();
    ep.terminal_reward = j.at("reward").get<double>();
    ep.final_acc = j.at("acc").get<double>();
    ep.latency = {j.at("t_edge").get<double>(), j.at("t_trans").get<double>(), j.at("t_cloud").get<double>(),
                  j.at("total").get<double>()};
    for (const auto& s : j.at("steps")) {
      ep.steps.push_back(Step{s.at("state").get<std::vector<double>>(), s.at("rate").get<double>()});
    }
    return ep;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("episode: ") + e.what());
  }
}

}  // namespace splitprune
