#include "splitprune/hrl_agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "splitprune/errors.hpp"

namespace splitprune {

void TrainConfig::validate() const {
  if (batch_size <= 0) throw DomainError("batch_size must be positive");
  if (!(lr_q >= 0.0) || !(lr_option >= 0.0)) throw DomainError("learning rates must be non-negative");
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("tau must lie in [0, 1]");
  if (warmup_per_option < 0) throw DomainError("warmup_per_option must be non-negative");
  if (episodes < 0) throw DomainError("episodes must be non-negative");
  if (!(noise_init >= 0.0) || !(noise_decay > 0.0 && noise_decay <= 1.0)) throw DomainError("bad noise schedule");
  if (!(epsilon_min >= 0.0 && epsilon_min <= 1.0)) throw DomainError("epsilon_min must lie in [0, 1]");
  if (hidden <= 0 || replay_per_conv <= 0 || updates_per_episode < 0) throw DomainError("bad agent sizes");
  if (!(r_max > 0.0 && r_max < 1.0)) throw DomainError("r_max must lie in (0, 1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"lr_q", lr_q},
          {"lr_option", lr_option},
          {"tau", tau},
          {"warmup_per_option", warmup_per_option},
          {"episodes", episodes},
          {"seed", seed},
          {"noise_init", noise_init},
          {"noise_decay", noise_decay},
          {"epsilon_min", epsilon_min},
          {"priority_alpha", priority_alpha},
          {"priority_eps", priority_eps},
          {"hidden", hidden},
          {"replay_per_conv", replay_per_conv},
          {"updates_per_episode", updates_per_episode},
          {"r_max", r_max}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.lr_q = j.at("lr_q").get<double>();
  c.lr_option = j.at("lr_option").get<double>();
  c.tau = j.at("tau").get<double>();
  c.warmup_per_option = j.at("warmup_per_option").get<int>();
  c.episodes = j.at("episodes").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.noise_init = j.at("noise_init").get<double>();
  c.noise_decay = j.at("noise_decay").get<double>();
  c.epsilon_min = j.at("epsilon_min").get<double>();
  c.priority_alpha = j.at("priority_alpha").get<double>();
  c.priority_eps = j.at("priority_eps").get<double>();
  c.hidden = j.at("hidden").get<int>();
  c.replay_per_conv = j.at("replay_per_conv").get<int>();
  c.updates_per_episode = j.at("updates_per_episode").get<int>();
  c.r_max = j.at("r_max").get<double>();
  return c;
}

std::string metrics_csv_row(const EpisodeMetrics& m) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  return std::to_string(m.episode) + "," + std::to_string(m.option) + "," + num(m.reward) + "," +
         num(m.latency.t_edge) + "," + num(m.latency.t_trans) + "," + num(m.latency.t_cloud) + "," + num(m.acc) +
         "," + opt(m.loss_q) + "," + opt(m.loss_option) + "," + num(m.noise_scale);
}

int argmax_option(std::span<const double> values) {
  if (values.empty()) throw DomainError("argmax over an empty set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------

HrlAgent::HrlAgent(const StateLayout& layout, std::vector<int> options, TrainConfig config)
    : config_(config),
      options_(std::move(options)),
      state_size_(layout.size()),
      action_offset_(layout.action_offset()),
      replay_(static_cast<std::size_t>(config.replay_per_conv) * std::max<std::size_t>(layout.n_conv, 1),
              config.priority_alpha, config.priority_eps),
      noise_scale_(config.noise_init),
      noise_rng_(substream(config.seed, "noise")),
      replay_rng_(substream(config.seed, "replay")) {
  config_.validate();
  if (options_.empty()) throw DomainError("agent needs at least one partition option");
  const int in = static_cast<int>(state_size_);
  const int h = config_.hidden;
  const std::uint64_t init_seed = splitmix64(config_.seed ^ fnv1a("init"));
  q_net_ = Mlp({in, h, h, static_cast<int>(options_.size())}, OutputActivation::Identity, 1.0, init_seed);
  q_target_ = q_net_;
  q_optim_ = Adam(q_net_, config_.lr_q);
  for (std::size_t k = 0; k < options_.size(); ++k) {
    actors_.emplace_back(std::vector<int>{in, h, h, 1}, OutputActivation::ScaledSigmoid, config_.r_max,
                         splitmix64(init_seed + k + 1));
    actor_targets_.push_back(actors_.back());
    actor_optims_.emplace_back(actors_.back(), config_.lr_option);
  }
}

int HrlAgent::slot_of(int partition) const {
  auto it = std::find(options_.begin(), options_.end(), partition);
  if (it == options_.end()) throw DomainError("partition " + std::to_string(partition) + " is not an agent option");
  return static_cast<int>(it - options_.begin());
}

void HrlAgent::set_episodes_done(int episodes) {
  episodes_done_ = episodes;
  noise_scale_ = config_.noise_init * std::pow(config_.noise_decay, static_cast<double>(episodes));
}

double HrlAgent::epsilon() const { return std::clamp(noise_scale_, config_.epsilon_min, 1.0); }

void HrlAgent::set_reward_scale(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("reward scale must be positive and finite");
  reward_scale_ = scale;
}

std::vector<double> HrlAgent::option_values(const PruningMdp& mdp) const {
  Matrix x(static_cast<Eigen::Index>(options_.size()), static_cast<Eigen::Index>(state_size_));
  for (std::size_t k = 0; k < options_.size(); ++k) {
    const EnvState s = mdp.reset(options_[k]);
    const double a = actors_[k].forward(s.features)[0];
    const std::vector<double> f = mdp.with_action(s, a);
    for (std::size_t c = 0; c < f.size(); ++c) x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = f[c];
  }
  const Matrix q = q_net_.forward(x);
  std::vector<double> values(options_.size());
  for (std::size_t k = 0; k < options_.size(); ++k) {
    values[k] = q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  }
  return values;
}

int HrlAgent::select_option(const PruningMdp& mdp, SelectMode mode, Rng& rng) const {
  if (mode == SelectMode::Explore) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, options_.size() - 1);
    const double u = coin(rng);
    const std::size_t k = pick(rng);
    if (u < epsilon()) return options_[k];
  }
  const std::vector<double> values = option_values(mdp);
  return options_[static_cast<std::size_t>(argmax_option(values))];
}

double HrlAgent::act(int partition, const EnvState& state, bool noisy, Rng& rng) const {
  double a = actors_[static_cast<std::size_t>(slot_of(partition))].forward(state.features)[0];
  if (noisy) {
    std::normal_distribution<double> noise(0.0, 1.0);
    a += noise(rng) * noise_scale_ * config_.r_max;
  }
  return std::clamp(a, 0.0, config_.r_max);
}

// ---------------------------------------------------------------------------

std::vector<Episode> HrlAgent::warmup(const PruningMdp& mdp) {
  std::vector<RolloutJob> jobs;
  const auto per = static_cast<std::size_t>(config_.warmup_per_option);
  for (std::size_t k = 0; k < options_.size(); ++k) {
    for (std::size_t j = 0; j < per; ++j) jobs.push_back({options_[k], k * per + j});
  }
  const double r_max = config_.r_max;
  const Policy random_rate = [r_max](const EnvState&, Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, r_max)(rng);
  };
  std::vector<Episode> episodes = rollout_batch(mdp, jobs, random_rate, config_.seed, "warmup");
  for (const Episode& ep : episodes) replay_.push(ep, replay_.max_priority());
  return episodes;
}

Matrix HrlAgent::q_inputs(std::span<const Episode* const> batch) const {
  Eigen::Index rows = 0;
  for (const Episode* ep : batch) rows += static_cast<Eigen::Index>(ep->steps.size());
  Matrix x(rows, static_cast<Eigen::Index>(state_size_));
  Eigen::Index r = 0;
  for (const Episode* ep : batch) {
    for (std::size_t t = 0; t < ep->steps.size(); ++t, ++r) {
      const Step& s = ep->steps[t];
      if (s.state.size() != state_size_) throw DomainError("episode state size does not match agent");
      for (std::size_t c = 0; c < state_size_; ++c) x(r, static_cast<Eigen::Index>(c)) = s.state[c];
      x(r, static_cast<Eigen::Index>(action_offset_ + t)) = s.rate;
    }
  }
  return x;
}

QUpdate HrlAgent::train_q(std::span<const Episode* const> batch) {
  if (batch.empty()) throw DomainError("train_q needs a non-empty batch");
  const Matrix x = q_inputs(batch);
  const Mlp::Tape tape = q_net_.forward_tape(x);
  Matrix upstream = Matrix::Zero(tape.output.rows(), tape.output.cols());
  const double n = static_cast<double>(x.rows());

  QUpdate out;
  out.residuals.reserve(batch.size());
  double loss = 0.0;
  Eigen::Index r = 0;
  for (const Episode* ep : batch) {
    const auto k = static_cast<Eigen::Index>(slot_of(ep->option));
    const double target = ep->terminal_reward / reward_scale_;
    double abs_sum = 0.0;
    for (std::size_t t = 0; t < ep->steps.size(); ++t, ++r) {
      const double residual = tape.output(r, k) - target;
      loss += 0.5 * residual * residual;
      upstream(r, k) = residual / n;
      abs_sum += std::abs(residual);
    }
    out.residuals.push_back(ep->steps.empty() ? 0.0 : abs_sum / static_cast<double>(ep->steps.size()));
  }
  out.loss = loss / n;
  q_optim_.step(q_net_, q_net_.backward(tape, upstream));
  return out;
}

double HrlAgent::train_option(int partition, std::span<const Episode* const> batch) {
  if (batch.empty()) throw DomainError("train_option needs a non-empty batch");
  const auto slot = static_cast<std::size_t>(slot_of(partition));
  const auto k = static_cast<Eigen::Index>(slot);

  Eigen::Index rows = 0;
  for (const Episode* ep : batch) {
    if (ep->option != partition) throw DomainError("train_option batch mixes options");
    rows += static_cast<Eigen::Index>(ep->steps.size());
  }
  Matrix states(rows, static_cast<Eigen::Index>(state_size_));
  std::vector<Eigen::Index> slots(static_cast<std::size_t>(rows));
  Eigen::Index r = 0;
  for (const Episode* ep : batch) {
    for (std::size_t t = 0; t < ep->steps.size(); ++t, ++r) {
      const Step& s = ep->steps[t];
      for (std::size_t c = 0; c < state_size_; ++c) states(r, static_cast<Eigen::Index>(c)) = s.state[c];
      slots[static_cast<std::size_t>(r)] = static_cast<Eigen::Index>(action_offset_ + t);
    }
  }

  Mlp& actor = actors_[slot];
  const Mlp::Tape actor_tape = actor.forward_tape(states);
  Matrix x = states;
  for (Eigen::Index i = 0; i < rows; ++i) x(i, slots[static_cast<std::size_t>(i)]) = actor_tape.output(i, 0);

  const Mlp::Tape q_tape = q_net_.forward_tape(x);
  const double n = static_cast<double>(rows);
  Matrix q_upstream = Matrix::Zero(q_tape.output.rows(), q_tape.output.cols());
  q_upstream.col(k).setConstant(-1.0 / n);
  const double objective = -q_tape.output.col(k).sum() / n;

  const Matrix dq_dx = q_net_.input_gradient(q_tape, q_upstream);
  Matrix actor_upstream(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) actor_upstream(i, 0) = dq_dx(i, slots[static_cast<std::size_t>(i)]);
  actor_optims_[slot].step(actor, actor.backward(actor_tape, actor_upstream));
  return objective;
}

void HrlAgent::soft_update_targets() {
  soft_update(q_target_, q_net_, config_.tau);
  for (std::size_t k = 0; k < actors_.size(); ++k) soft_update(actor_targets_[k], actors_[k], config_.tau);
}

void HrlAgent::train(const PruningMdp& mdp, const std::function<void(const EpisodeMetrics&)>& on_episode) {
  if (mdp.options() != options_) throw DomainError("agent options do not match the environment");
  if (mdp.layout().size() != state_size_) throw DomainError("agent state size does not match the environment");
  if (mdp.r_max() != config_.r_max) throw DomainError("agent r_max does not match the environment");

  int row = 0;
  auto emit = [&](const Episode& ep, std::optional<double> lq, std::optional<double> lo) {
    if (!on_episode) return;
    on_episode(EpisodeMetrics{row, ep.option, ep.terminal_reward, ep.latency, ep.final_acc, lq, lo, noise_scale_});
  };

  const std::vector<Episode> warm = warmup(mdp);
  double best = 0.0;
  for (const Episode& ep : warm) {
    best = std::max(best, ep.terminal_reward);
    emit(ep, std::nullopt, std::nullopt);
    ++row;
  }
  if (best > 0.0) set_reward_scale(best);

  const Policy noisy_actor = [this](const EnvState& s, Rng& rng) { return act(s.option, s, true, rng); };
  for (int e = 0; e < config_.episodes; ++e) {
    const int option = select_option(mdp, SelectMode::Explore, noise_rng_);
    Episode ep = mdp.rollout(option, noisy_actor, noise_rng_);
    replay_.push(ep);

    std::optional<double> loss_q;
    std::optional<double> loss_option;
    for (int u = 0; u < config_.updates_per_episode; ++u) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(config_.batch_size), replay_.size());
      const std::vector<std::size_t> slots = replay_.sample(count, replay_rng_);
      std::vector<const Episode*> batch;
      batch.reserve(slots.size());
      for (std::size_t s : slots) batch.push_back(&replay_.at(s));

      const QUpdate q = train_q(batch);
      for (std::size_t i = 0; i < slots.size(); ++i) replay_.update_residual(slots[i], q.residuals[i]);
      loss_q = q.loss;

      std::map<int, std::vector<const Episode*>> by_option;
      for (const Episode* ep_ptr : batch) by_option[ep_ptr->option].push_back(ep_ptr);
      double weighted = 0.0;
      std::size_t total = 0;
      for (const auto& [partition, group] : by_option) {
        weighted += train_option(partition, group) * static_cast<double>(group.size());
        total += group.size();
      }
      loss_option = weighted / static_cast<double>(total);
    }
    soft_update_targets();
    emit(ep, loss_q, loss_option);
    ++row;
    set_episodes_done(episodes_done_ + 1);
  }
}

Episode HrlAgent::plan(const PruningMdp& mdp) const {
  Rng unused(0);
  const int option = select_option(mdp, SelectMode::Exploit, unused);
  const Policy greedy = [this](const EnvState& s, Rng& rng) { return act(s.option, s, false, rng); };
  return mdp.rollout(option, greedy, unused);
}

// ---------------------------------------------------------------------------

nlohmann::json HrlAgent::to_json() const {
  nlohmann::json j;
  j["format"] = "splitprune-agent";
  j["version"] = 1;
  j["state_layout"] = {{"version", StateLayout::kVersion},
                       {"size", state_size_},
                       {"action_offset", action_offset_},
                       {"n_conv", state_size_ - action_offset_}};
  j["options"] = options_;
  j["config"] = config_.to_json();
  j["episodes_done"] = episodes_done_;
  j["noise_scale"] = noise_scale_;
  j["reward_scale"] = reward_scale_;
  j["q_net"] = mlp_to_json(q_net_);
  auto actors = nlohmann::json::array();
  for (const Mlp& a : actors_) actors.push_back(mlp_to_json(a));
  j["actors"] = std::move(actors);
  return j;
}

HrlAgent HrlAgent::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "splitprune-agent") throw ParseError("not an agent checkpoint");
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported checkpoint version");
    const auto& sl = j.at("state_layout");
    if (sl.at("version").get<int>() != StateLayout::kVersion) throw ParseError("unsupported state layout");
    const auto size = sl.at("size").get<std::size_t>();
    const auto n_conv = sl.at("n_conv").get<std::size_t>();
    const auto action_offset = sl.at("action_offset").get<std::size_t>();
    if (action_offset + n_conv != size || size < 6 + 3 * n_conv) throw ParseError("inconsistent state layout");
    StateLayout layout;
    layout.n_conv = n_conv;
    layout.n_layers = size - 6 - 3 * n_conv;

    HrlAgent agent(layout, j.at("options").get<std::vector<int>>(), TrainConfig::from_json(j.at("config")));
    agent.episodes_done_ = j.at("episodes_done").get<int>();
    agent.noise_scale_ = j.at("noise_scale").get<double>();
    agent.reward_scale_ = j.at("reward_scale").get<double>();
    auto expect_shape = [](const Mlp& loaded, const Mlp& fresh, const char* what) {
      if (loaded.widths() != fresh.widths() || loaded.output_activation() != fresh.output_activation()) {
        throw ParseError(std::string(what) + " shape does not match the agent");
      }
    };
    Mlp q = mlp_from_json(j.at("q_net"));
    expect_shape(q, agent.q_net_, "q_net");
    agent.q_net_ = std::move(q);
    agent.q_target_ = agent.q_net_;
    const auto& actors = j.at("actors");
    if (actors.size() != agent.actors_.size()) throw ParseError("actor count does not match options");
    for (std::size_t k = 0; k < actors.size(); ++k) {
      Mlp a = mlp_from_json(actors[k]);
      expect_shape(a, agent.actors_[k], "actor");
      agent.actors_[k] = std::move(a);
      agent.actor_targets_[k] = agent.actors_[k];
    }
    return agent;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace splitprune
