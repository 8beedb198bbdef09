#pragma once

// Experiment configuration and its plain-text file format:
//
//   # comment
//   [section]
//   key = value
//
// Every key belongs to a section; unknown sections or keys are rejected.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "trustsim/agents/exploration.hpp"
#include "trustsim/attacks.hpp"
#include "trustsim/environment.hpp"

namespace trustsim {

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kAgentNames[] = {"rl", "drl", "marl"};

inline bool is_agent_name(std::string_view s)
{
  for (auto n : kAgentNames)
  {
    if (n == s)
    {
      return true;
    }
  }
  return false;
}

struct ExperimentConfig
{
  std::string                  agent{"drl"};
  std::optional<std::uint64_t> episodes;  // unset: 50, or 100 for tdp
  bool                         keep_short_tdp{false};
  std::string                  out{"out"};
  std::string                  policy_file;  // empty: built-in policy
  EnvironmentConfig            env{};
  AgentHyperparams             agent_hp{};

  AttackFamily  attack() const noexcept { return env.attack.family; }
  std::uint64_t seed() const noexcept { return env.seed; }
};

namespace config_detail {

inline std::string trim(std::string_view s)
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
  {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r");
  return std::string{s.substr(b, e - b + 1)};
}

inline double to_double(std::string const &key, std::string const &v)
{
  std::size_t used = 0;
  double      x    = 0.0;
  try
  {
    x = std::stod(v, &used);
  }
  catch (std::exception const &)
  {
    used = 0;
  }
  if (used == 0 || used != v.size())
  {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

inline std::uint64_t to_uint(std::string const &key, std::string const &v)
{
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
  {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  try
  {
    return std::stoull(v);
  }
  catch (std::exception const &)
  {
    throw ConfigError(key + ": integer out of range");
  }
}

inline bool to_bool(std::string const &key, std::string const &v)
{
  if (v == "true" || v == "1" || v == "yes")
  {
    return true;
  }
  if (v == "false" || v == "0" || v == "no")
  {
    return false;
  }
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig &, std::string const &key, std::string const &value)>;

inline std::map<std::string, Setter> const &setters()
{
  using C = ExperimentConfig;
  auto real = [](auto get) {
    return Setter{[get](C &c, std::string const &k, std::string const &v) { get(c) = to_double(k, v); }};
  };
  auto uint = [](auto get) {
    return Setter{[get](C &c, std::string const &k, std::string const &v) {
      get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(to_uint(k, v));
    }};
  };
  auto flag = [](auto get) {
    return Setter{[get](C &c, std::string const &k, std::string const &v) { get(c) = to_bool(k, v); }};
  };

  static std::map<std::string, Setter> const table = [&] {
    std::map<std::string, Setter> t;
    t["run.agent"] = [](C &c, std::string const &k, std::string const &v) {
      if (!is_agent_name(v))
      {
        throw ConfigError(k + ": unknown agent '" + v + "'");
      }
      c.agent = v;
    };
    t["run.attack"] = [](C &c, std::string const &k, std::string const &v) {
      auto f = parse_attack_family(v);
      if (!f)
      {
        throw ConfigError(k + ": unknown attack '" + v + "'");
      }
      c.env.attack.family = *f;
    };
    t["run.episodes"] = [](C &c, std::string const &k, std::string const &v) { c.episodes = to_uint(k, v); };
    t["run.steps"]          = uint([](C &c) -> auto & { return c.env.steps; });
    t["run.seed"]           = uint([](C &c) -> auto & { return c.env.seed; });
    t["run.out"]            = [](C &c, std::string const &, std::string const &v) { c.out = v; };
    t["run.policy_file"]    = [](C &c, std::string const &, std::string const &v) { c.policy_file = v; };
    t["run.keep_short_tdp"] = flag([](C &c) -> auto & { return c.keep_short_tdp; });

    t["network.nodes"]           = uint([](C &c) -> auto & { return c.env.node_count; });
    t["network.malicious_ratio"] = real([](C &c) -> auto & { return c.env.malicious_ratio; });
    t["network.theta"]           = real([](C &c) -> auto & { return c.env.theta; });
    t["network.batch_size"]      = uint([](C &c) -> auto & { return c.env.consensus.batch_size; });
    t["network.init_alpha"]      = real([](C &c) -> auto & { return c.env.consensus.init_alpha; });
    t["network.init_beta"]       = real([](C &c) -> auto & { return c.env.consensus.init_beta; });
    t["network.init_noise_sd"]   = real([](C &c) -> auto & { return c.env.consensus.init_noise_sd; });
    t["network.initial_ratio"]   = real([](C &c) -> auto & { return c.env.consensus.initial_ratio; });

    t["trust.delta_valid"]     = real([](C &c) -> auto & { return c.env.trust.delta_valid; });
    t["trust.delta_invalid"]   = real([](C &c) -> auto & { return c.env.trust.delta_invalid; });
    t["trust.delta_malicious"] = real([](C &c) -> auto & { return c.env.trust.delta_malicious; });
    t["trust.decay_gamma"]     = real([](C &c) -> auto & { return c.env.trust.decay_gamma; });

    t["reward.w_f1"]              = real([](C &c) -> auto & { return c.env.reward.w_f1; });
    t["reward.w_step"]            = real([](C &c) -> auto & { return c.env.reward.w_step; });
    t["reward.w_fn"]              = real([](C &c) -> auto & { return c.env.reward.w_fn; });
    t["reward.collusion_trigger"] = real([](C &c) -> auto & { return c.env.reward.collusion_trigger; });
    t["reward.collusion_cap"]     = real([](C &c) -> auto & { return c.env.reward.collusion_cap; });
    t["reward.kappa_max"]         = real([](C &c) -> auto & { return c.env.reward.kappa_max; });

    t["attack.base_evidence"]          = real([](C &c) -> auto & { return c.env.attack.base_evidence; });
    t["attack.detection_probability"]  = real([](C &c) -> auto & { return c.env.attack.detection_probability; });
    t["attack.nma_p_attack"]           = real([](C &c) -> auto & { return c.env.attack.nma_p_attack; });
    t["attack.nma_noise"]              = real([](C &c) -> auto & { return c.env.attack.nma_noise; });
    t["attack.cra_intensity"]          = real([](C &c) -> auto & { return c.env.attack.cra_intensity; });
    t["attack.cra_period"]             = uint([](C &c) -> auto & { return c.env.attack.cra_period; });
    t["attack.cra_target_fraction"]    = real([](C &c) -> auto & { return c.env.attack.cra_target_fraction; });
    t["attack.aaa_strategy_count"]     = uint([](C &c) -> auto & { return c.env.attack.aaa_strategy_count; });
    t["attack.aaa_eps_start"]          = real([](C &c) -> auto & { return c.env.attack.aaa_eps_start; });
    t["attack.aaa_eps_decay"]          = real([](C &c) -> auto & { return c.env.attack.aaa_eps_decay; });
    t["attack.aaa_factor"]             = real([](C &c) -> auto & { return c.env.attack.aaa_factor; });
    t["attack.aaa_burst_period"]       = uint([](C &c) -> auto & { return c.env.attack.aaa_burst_period; });
    t["attack.bfi_equivocation_rate"]  = real([](C &c) -> auto & { return c.env.attack.bfi_equivocation_rate; });
    t["attack.bfi_recovery_rate"]      = real([](C &c) -> auto & { return c.env.attack.bfi_recovery_rate; });
    t["attack.bfi_sybil_k"]            = uint([](C &c) -> auto & { return c.env.attack.bfi_sybil_k; });
    t["attack.bfi_window"]             = uint([](C &c) -> auto & { return c.env.attack.bfi_window; });
    t["attack.bfi_aggressive_above"]   = real([](C &c) -> auto & { return c.env.attack.bfi_aggressive_above; });
    t["attack.bfi_recovery_below"]     = real([](C &c) -> auto & { return c.env.attack.bfi_recovery_below; });
    t["attack.tdp_activation_episode"] = uint([](C &c) -> auto & { return c.env.attack.tdp_activation_episode; });
    t["attack.tdp_intensity"]          = real([](C &c) -> auto & { return c.env.attack.tdp_intensity; });
    t["attack.tdp_target_ratio"]       = real([](C &c) -> auto & { return c.env.attack.tdp_target_ratio; });

    t["agent.tabular_lr"]         = real([](C &c) -> auto & { return c.agent_hp.tabular_lr; });
    t["agent.deep_lr"]            = real([](C &c) -> auto & { return c.agent_hp.deep_lr; });
    t["agent.discount"]           = real([](C &c) -> auto & { return c.agent_hp.discount; });
    t["agent.eps_start"]          = real([](C &c) -> auto & { return c.agent_hp.eps_start; });
    t["agent.eps_min"]            = real([](C &c) -> auto & { return c.agent_hp.eps_min; });
    t["agent.eps_reach_fraction"] = real([](C &c) -> auto & { return c.agent_hp.eps_reach_fraction; });
    t["agent.buffer_capacity"]    = uint([](C &c) -> auto & { return c.agent_hp.buffer_capacity; });
    t["agent.batch_size"]         = uint([](C &c) -> auto & { return c.agent_hp.batch_size; });
    t["agent.hidden1"]            = uint([](C &c) -> auto & { return c.agent_hp.hidden1; });
    t["agent.hidden2"]            = uint([](C &c) -> auto & { return c.agent_hp.hidden2; });
    t["agent.head_hidden"]        = uint([](C &c) -> auto & { return c.agent_hp.head_hidden; });
    t["agent.target_sync_every"]  = uint([](C &c) -> auto & { return c.agent_hp.target_sync_every; });
    t["agent.marl_sync_every"]    = uint([](C &c) -> auto & { return c.agent_hp.marl_sync_every; });
    t["agent.marl_agents"]        = uint([](C &c) -> auto & { return c.agent_hp.marl_agents; });
    t["agent.reward_scale"]       = real([](C &c) -> auto & { return c.agent_hp.reward_scale; });
    t["agent.td_clip"]            = real([](C &c) -> auto & { return c.agent_hp.td_clip; });
    t["agent.clip_td"]            = flag([](C &c) -> auto & { return c.agent_hp.clip_td; });
    return t;
  }();
  return table;
}

}  // namespace config_detail

/// Applies one `section.key = value` assignment.
inline void set_option(ExperimentConfig &cfg, std::string const &dotted_key, std::string const &value)
{
  auto const &table = config_detail::setters();
  auto const  it    = table.find(dotted_key);
  if (it == table.end())
  {
    throw ConfigError("unknown configuration key '" + dotted_key + "'");
  }
  it->second(cfg, dotted_key, value);
}

inline void apply_config_text(ExperimentConfig &cfg, std::string_view text, std::string const &origin = "<config>")
{
  std::istringstream in{std::string{text}};
  std::string        line, section;
  int                lineno = 0;
  while (std::getline(in, line))
  {
    ++lineno;
    auto const hash = line.find('#');
    if (hash != std::string::npos)
    {
      line.erase(hash);
    }
    std::string const t = config_detail::trim(line);
    if (t.empty())
    {
      continue;
    }
    auto where = [&] { return origin + ":" + std::to_string(lineno) + ": "; };
    if (t.front() == '[')
    {
      if (t.back() != ']')
      {
        throw ConfigError(where() + "unterminated section header");
      }
      section = config_detail::trim(std::string_view{t}.substr(1, t.size() - 2));
      continue;
    }
    auto const eq = t.find('=');
    if (eq == std::string::npos)
    {
      throw ConfigError(where() + "expected key = value");
    }
    if (section.empty())
    {
      throw ConfigError(where() + "key outside of any [section]");
    }
    std::string const key   = config_detail::trim(std::string_view{t}.substr(0, eq));
    std::string const value = config_detail::trim(std::string_view{t}.substr(eq + 1));
    try
    {
      set_option(cfg, section + "." + key, value);
    }
    catch (ConfigError const &e)
    {
      throw ConfigError(where() + e.what());
    }
  }
}

inline void load_config_file(ExperimentConfig &cfg, std::string const &path)
{
  std::ifstream in{path};
  if (!in)
  {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path);
}

/// Episode count after defaults and the TDP extension rule. `warn` receives a
/// message when a short TDP run is extended.
inline std::uint64_t resolve_episodes(ExperimentConfig const &cfg, std::function<void(std::string const &)> const &warn = {})
{
  std::uint64_t const tdp_default = 100;
  if (!cfg.episodes)
  {
    return cfg.attack() == AttackFamily::TDP ? tdp_default : 50;
  }
  std::uint64_t const e = *cfg.episodes;
  if (cfg.attack() == AttackFamily::TDP && e < tdp_default && !cfg.keep_short_tdp)
  {
    if (warn)
    {
      warn("warning: tdp with " + std::to_string(e) + " episodes cannot show post-activation behaviour; extending to " +
           std::to_string(tdp_default) + " (set run.keep_short_tdp = true to keep)");
    }
    return tdp_default;
  }
  return e;
}

inline void validate(ExperimentConfig const &cfg)
{
  if (!is_agent_name(cfg.agent))
  {
    throw ConfigError("unknown agent '" + cfg.agent + "'");
  }
  if (cfg.episodes && *cfg.episodes < 1)
  {
    throw ConfigError("episodes must be >= 1");
  }
  try
  {
    cfg.env.validate();
    cfg.agent_hp.validate();
  }
  catch (std::invalid_argument const &e)
  {
    throw ConfigError(e.what());
  }
}

inline std::string format_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// The fully resolved configuration in the same format the loader accepts.
inline std::string render_config(ExperimentConfig const &c, std::uint64_t episodes)
{
  std::ostringstream o;
  auto               d = [](double v) { return format_double(v); };
  auto const        &e = c.env;
  auto const        &a = e.attack;
  auto const        &h = c.agent_hp;
  o << "[run]\n"
    << "agent = " << c.agent << "\nattack = " << to_string(a.family) << "\nepisodes = " << episodes
    << "\nsteps = " << e.steps << "\nseed = " << e.seed << "\nout = " << c.out << "\n";
  if (!c.policy_file.empty())
  {
    o << "policy_file = " << c.policy_file << "\n";
  }
  o << "keep_short_tdp = " << (c.keep_short_tdp ? "true" : "false") << "\n\n[network]\n"
    << "nodes = " << e.node_count << "\nmalicious_ratio = " << d(e.malicious_ratio) << "\ntheta = " << d(e.theta)
    << "\nbatch_size = " << e.consensus.batch_size << "\ninit_alpha = " << d(e.consensus.init_alpha)
    << "\ninit_beta = " << d(e.consensus.init_beta) << "\ninit_noise_sd = " << d(e.consensus.init_noise_sd)
    << "\ninitial_ratio = " << d(e.consensus.initial_ratio) << "\n\n[trust]\n"
    << "delta_valid = " << d(e.trust.delta_valid) << "\ndelta_invalid = " << d(e.trust.delta_invalid)
    << "\ndelta_malicious = " << d(e.trust.delta_malicious) << "\ndecay_gamma = " << d(e.trust.decay_gamma)
    << "\n\n[reward]\n"
    << "w_f1 = " << d(e.reward.w_f1) << "\nw_step = " << d(e.reward.w_step) << "\nw_fn = " << d(e.reward.w_fn)
    << "\ncollusion_trigger = " << d(e.reward.collusion_trigger) << "\ncollusion_cap = " << d(e.reward.collusion_cap)
    << "\nkappa_max = " << d(e.reward.kappa_max) << "\n\n[attack]\n"
    << "base_evidence = " << d(a.base_evidence) << "\ndetection_probability = " << d(a.detection_probability)
    << "\nnma_p_attack = " << d(a.nma_p_attack) << "\nnma_noise = " << d(a.nma_noise)
    << "\ncra_intensity = " << d(a.cra_intensity) << "\ncra_period = " << a.cra_period
    << "\ncra_target_fraction = " << d(a.cra_target_fraction) << "\naaa_strategy_count = " << a.aaa_strategy_count
    << "\naaa_eps_start = " << d(a.aaa_eps_start) << "\naaa_eps_decay = " << d(a.aaa_eps_decay)
    << "\naaa_factor = " << d(a.aaa_factor) << "\naaa_burst_period = " << a.aaa_burst_period
    << "\nbfi_equivocation_rate = " << d(a.bfi_equivocation_rate) << "\nbfi_recovery_rate = " << d(a.bfi_recovery_rate)
    << "\nbfi_sybil_k = " << a.bfi_sybil_k << "\nbfi_window = " << a.bfi_window
    << "\nbfi_aggressive_above = " << d(a.bfi_aggressive_above) << "\nbfi_recovery_below = " << d(a.bfi_recovery_below)
    << "\ntdp_activation_episode = " << a.tdp_activation_episode << "\ntdp_intensity = " << d(a.tdp_intensity)
    << "\ntdp_target_ratio = " << d(a.tdp_target_ratio) << "\n\n[agent]\n"
    << "tabular_lr = " << d(h.tabular_lr) << "\ndeep_lr = " << d(h.deep_lr) << "\ndiscount = " << d(h.discount)
    << "\neps_start = " << d(h.eps_start) << "\neps_min = " << d(h.eps_min)
    << "\neps_reach_fraction = " << d(h.eps_reach_fraction) << "\nbuffer_capacity = " << h.buffer_capacity
    << "\nbatch_size = " << h.batch_size << "\nhidden1 = " << h.hidden1 << "\nhidden2 = " << h.hidden2
    << "\nhead_hidden = " << h.head_hidden << "\ntarget_sync_every = " << h.target_sync_every
    << "\nmarl_sync_every = " << h.marl_sync_every << "\nmarl_agents = " << h.marl_agents
    << "\nreward_scale = " << d(h.reward_scale) << "\ntd_clip = " << d(h.td_clip)
    << "\nclip_td = " << (h.clip_td ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace trustsim
