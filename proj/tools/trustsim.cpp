#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "trustsim/config.hpp"
#include "trustsim/experiment.hpp"

using namespace trustsim;

int main(int argc, char **argv)
{
  CLI::App app{"Trust-delegation consensus simulator with learned delegation control"};

  std::string                  config_path;
  std::optional<std::string>   agent, attack, out;
  std::optional<std::uint64_t> episodes, steps, seed;
  bool                         matrix = false;
  bool                         keep_short_tdp = false;
  std::vector<std::uint64_t>   seeds{42, 43, 44};
  std::vector<std::string>     agents{"rl", "drl", "marl"};
  std::vector<std::string>     attacks{"nma", "cra", "aaa", "bfi", "tdp"};
  std::vector<std::string>     overrides;
  unsigned                     threads = 1;

  app.add_option("--config", config_path, "configuration file ([section] key = value)")->check(CLI::ExistingFile);
  app.add_option("--agent", agent, "defense agent: rl, drl or marl");
  app.add_option("--attack", attack, "attack family: none, nma, cra, aaa, bfi or tdp");
  app.add_option("--episodes", episodes, "episodes per run (default 50, tdp 100)");
  app.add_option("--steps", steps, "steps per episode");
  app.add_option("--seed", seed, "random seed for a single run");
  app.add_option("--out", out, "output directory");
  app.add_flag("--matrix", matrix, "run every agent x attack combination over --seeds");
  app.add_option("--seeds", seeds, "seeds for matrix mode")->delimiter(',');
  app.add_option("--agents", agents, "agents for matrix mode")->delimiter(',');
  app.add_option("--attacks", attacks, "attacks for matrix mode")->delimiter(',');
  app.add_option("--threads", threads, "parallel runs in matrix mode")->check(CLI::Range(1u, 256u));
  app.add_option("--set", overrides, "override one key, e.g. --set agent.deep_lr=1e-3");
  app.add_flag("--keep-short-tdp", keep_short_tdp, "do not extend tdp runs shorter than 100 episodes");

  CLI11_PARSE(app, argc, argv);

  try
  {
    ExperimentConfig cfg;
    if (!config_path.empty())
    {
      load_config_file(cfg, config_path);
    }
    for (auto const &kv : overrides)
    {
      auto const eq = kv.find('=');
      if (eq == std::string::npos)
      {
        throw ConfigError("--set expects key=value, got '" + kv + "'");
      }
      set_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (agent)
    {
      set_option(cfg, "run.agent", *agent);
    }
    if (attack)
    {
      set_option(cfg, "run.attack", *attack);
    }
    if (episodes)
    {
      cfg.episodes = *episodes;
    }
    if (steps)
    {
      cfg.env.steps = *steps;
    }
    if (seed)
    {
      cfg.env.seed = *seed;
    }
    if (out)
    {
      cfg.out = *out;
    }
    if (keep_short_tdp)
    {
      cfg.keep_short_tdp = true;
    }
    validate(cfg);

    if (matrix)
    {
      MatrixOptions mo;
      mo.threads  = threads;
      mo.progress = [](std::string const &s) { std::cerr << s << "\n"; };
      auto const m = run_matrix(cfg, agents, attacks, seeds, mo);
      std::cout << matrix_csv(m);
      for (auto const &f : m.failures)
      {
        std::cerr << "failed: " << f << "\n";
      }
      return m.failures.empty() ? 0 : 1;
    }

    RunOptions ro;
    ro.warn       = [](std::string const &s) { std::cerr << s << "\n"; };
    ro.on_episode = [](EpisodeRecord const &r) {
      std::cerr << "episode " << r.episode << "  reward " << r.cumulative_reward << "  f1 " << r.f1 << "  ratio "
                << r.delegation_ratio << "\n";
    };
    auto const res = run_experiment(cfg, ro);
    std::cout << "agent " << cfg.agent << "  attack " << to_string(cfg.attack()) << "  episodes " << res.episodes
              << "  seed " << cfg.seed() << "\n"
              << "tail-" << res.summary.count << " f1 " << res.summary.f1.mean << " (sd " << res.summary.f1.sd
              << ")  reward " << res.summary.cumulative_reward.mean << "\n"
              << "artifacts in " << cfg.out << "\n";
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
