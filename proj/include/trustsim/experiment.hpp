#pragma once

// Single runs, the agent x attack matrix, and their on-disk artifacts.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "trustsim/abac.hpp"
#include "trustsim/agents/dqn.hpp"
#include "trustsim/agents/tabular.hpp"
#include "trustsim/config.hpp"
#include "trustsim/environment.hpp"
#include "trustsim/metrics.hpp"

namespace trustsim {

namespace fs = std::filesystem;

inline constexpr char const *kEpisodesHeader =
    "episode,cumulative_reward,f1,precision,recall,tp,fp,fn,tn,throughput,chain_length,mean_kappa,trust_separation,"
    "delegation_ratio";

inline std::uint64_t agent_seed(std::uint64_t seed) { return Rng{seed}.fork(7).next_u64(); }

inline std::unique_ptr<Agent> make_agent(std::string const &name, AgentHyperparams const &hp, std::uint64_t seed)
{
  if (name == "rl")
  {
    return std::make_unique<TabularAgent>(hp, seed, DiscretizationSpec::standard());
  }
  if (name == "drl")
  {
    return std::make_unique<DrlAgent>(hp, seed);
  }
  if (name == "marl")
  {
    return std::make_unique<MarlAgent>(hp, seed);
  }
  throw ConfigError("unknown agent '" + name + "'");
}

namespace experiment_detail {

inline std::string fmt(double v, int digits = 6)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void write_file(fs::path const &path, std::string const &content)
{
  std::ofstream out{path, std::ios::binary};
  if (!out)
  {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << content;
  if (!out)
  {
    throw std::runtime_error("write failed for '" + path.string() + "'");
  }
}

inline void ensure_directory(fs::path const &dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
  {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
}

}  // namespace experiment_detail

inline std::string episodes_csv(std::vector<EpisodeRecord> const &records)
{
  using experiment_detail::fmt;
  std::ostringstream o;
  o << kEpisodesHeader << "\n";
  for (auto const &r : records)
  {
    o << r.episode << ',' << fmt(r.cumulative_reward) << ',' << fmt(r.f1) << ',' << fmt(r.precision) << ','
      << fmt(r.recall) << ',' << r.confusion.tp << ',' << r.confusion.fp << ',' << r.confusion.fn << ','
      << r.confusion.tn << ',' << r.throughput << ',' << r.chain_length << ',' << fmt(r.mean_kappa) << ','
      << fmt(r.trust_separation) << ',' << fmt(r.delegation_ratio) << "\n";
  }
  return o.str();
}

inline std::string summary_csv(TailSummary const &s)
{
  using experiment_detail::fmt;
  std::ostringstream o;
  o << "metric,mean,sd,tail\n";
  auto row = [&](char const *name, MetricSummary const &m) {
    o << name << ',' << fmt(m.mean) << ',' << fmt(m.sd) << ',' << s.count << "\n";
  };
  row("cumulative_reward", s.cumulative_reward);
  row("f1", s.f1);
  row("precision", s.precision);
  row("recall", s.recall);
  row("throughput", s.throughput);
  row("chain_length", s.chain_length);
  row("mean_kappa", s.mean_kappa);
  row("trust_separation", s.trust_separation);
  row("delegation_ratio", s.delegation_ratio);
  return o.str();
}

// ---------------------------------------------------------------------------
// Charts

struct Series
{
  std::string         title;
  std::string         y_label;
  std::vector<double> y;
};

/// Self-contained SVG line chart; x is the 1-based episode number.
inline std::string svg_line_chart(Series const &s)
{
  using experiment_detail::fmt;
  double const W = 640, H = 360, L = 64, R = 16, T = 36, B = 44;
  double       lo = s.y.empty() ? 0.0 : *std::min_element(s.y.begin(), s.y.end());
  double       hi = s.y.empty() ? 1.0 : *std::max_element(s.y.begin(), s.y.end());
  if (hi - lo < 1e-12)
  {
    lo -= 0.5;
    hi += 0.5;
  }
  std::size_t const n  = s.y.size();
  auto              px = [&](std::size_t i) {
    return n <= 1 ? L + (W - L - R) / 2.0 : L + (W - L - R) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  auto py = [&](double v) { return T + (H - T - B) * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << s.title << "</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k)
  {
    double const v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(v) + 4, 1)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v, 2) << "</text>\n";
  }
  o << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" font-family=\"sans-serif\" font-size=\"11\">1</text>\n"
    << "<text x=\"" << W - R << "\" y=\"" << H - B + 16
    << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << n << "</text>\n"
    << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">episode</text>\n"
    << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 14 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << s.y_label << "</text>\n";
  if (n == 1)
  {
    o << "<circle cx=\"" << fmt(px(0), 2) << "\" cy=\"" << fmt(py(s.y[0]), 2) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  else if (n > 1)
  {
    o << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; ++i)
    {
      o << (i ? " " : "") << fmt(px(i), 2) << ',' << fmt(py(s.y[i]), 2);
    }
    o << "\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Writes reward.svg, f1.svg and chart_data.csv into `dir`.
inline void emit_charts(std::vector<EpisodeRecord> const &records, fs::path const &dir)
{
  if (records.empty())
  {
    throw std::invalid_argument("emit_charts: no records");
  }
  experiment_detail::ensure_directory(dir);
  Series reward{"Cumulative reward per episode", "reward", {}};
  Series f1s{"Detection F1 per episode", "F1", {}};
  std::ostringstream csv;
  csv << "episode,cumulative_reward,f1\n";
  for (auto const &r : records)
  {
    reward.y.push_back(r.cumulative_reward);
    f1s.y.push_back(r.f1);
    csv << r.episode << ',' << experiment_detail::fmt(r.cumulative_reward) << ',' << experiment_detail::fmt(r.f1)
        << "\n";
  }
  experiment_detail::write_file(dir / "reward.svg", svg_line_chart(reward));
  experiment_detail::write_file(dir / "f1.svg", svg_line_chart(f1s));
  experiment_detail::write_file(dir / "chart_data.csv", csv.str());
}

// ---------------------------------------------------------------------------
// Runs

struct RunOptions
{
  bool                                     write_files{true};
  bool                                     log_evidence{false};
  std::function<void(std::string const &)> warn;
  std::function<void(EpisodeRecord const &)> on_episode;
};

struct ExperimentResult
{
  std::vector<EpisodeRecord>    records;
  TailSummary                   summary;
  std::uint64_t                 episodes{0};
  std::vector<EvidenceLogEntry> evidence_log;
};

/// Builds the environment config actually used for a run (policy file resolved).
inline EnvironmentConfig resolve_environment(ExperimentConfig const &cfg)
{
  EnvironmentConfig env = cfg.env;
  if (!cfg.policy_file.empty())
  {
    env.policy = abac::load_policy_file(cfg.policy_file).to_string();
  }
  return env;
}

inline ExperimentResult run_experiment(ExperimentConfig const &cfg, RunOptions const &opt = {})
{
  validate(cfg);
  ExperimentResult res;
  res.episodes = resolve_episodes(cfg, opt.warn);

  EnvironmentConfig env_cfg = resolve_environment(cfg);
  env_cfg.log_evidence      = opt.log_evidence;
  AgentHyperparams hp       = cfg.agent_hp;
  hp.total_episodes         = res.episodes;

  Environment env{env_cfg};
  auto        agent = make_agent(cfg.agent, hp, agent_seed(cfg.seed()));

  res.records.reserve(res.episodes);
  for (std::uint64_t e = 1; e <= res.episodes; ++e)
  {
    auto rec = run_episode(env, *agent, e);
    if (!std::isfinite(rec.cumulative_reward) || !std::isfinite(rec.f1) || !std::isfinite(rec.trust_separation) ||
        !std::isfinite(rec.mean_kappa))
    {
      throw std::runtime_error("non-finite metric in episode " + std::to_string(e));
    }
    if (opt.on_episode)
    {
      opt.on_episode(rec);
    }
    res.records.push_back(rec);
  }
  res.summary      = aggregate_tail(res.records, std::min<std::size_t>(10, res.records.size()));
  res.evidence_log = env.evidence_log();

  if (opt.write_files)
  {
    using namespace experiment_detail;
    fs::path const dir{cfg.out};
    ensure_directory(dir);
    write_file(dir / "episodes.csv", episodes_csv(res.records));
    write_file(dir / "summary.csv", summary_csv(res.summary));
    auto const &cm = res.records.back().confusion;
    write_file(dir / "confusion.csv", "tp,fp,fn,tn\n" + std::to_string(cm.tp) + ',' + std::to_string(cm.fp) + ',' +
                                          std::to_string(cm.fn) + ',' + std::to_string(cm.tn) + "\n");
    {
      std::ofstream ck{dir / "checkpoint.bin", std::ios::binary};
      if (!ck)
      {
        throw std::runtime_error("cannot write checkpoint in '" + dir.string() + "'");
      }
      agent->save(ck);
    }
    std::ostringstream manifest;
    manifest << "# trustsim run manifest\n"
             << "# agent seed = " << agent_seed(cfg.seed()) << "\n"
             << "# policy = " << env_cfg.policy << "\n"
             << render_config(cfg, res.episodes);
    write_file(dir / "manifest.txt", manifest.str());
    emit_charts(res.records, dir);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Matrix

struct MatrixCell
{
  std::string                      attack;
  std::string                      agent;
  std::vector<std::optional<double>> per_seed;  // tail-10 mean F1, nullopt on failure
  std::optional<double>            median;
};

struct MatrixResult
{
  std::vector<std::string>  agents;
  std::vector<std::string>  attacks;
  std::vector<std::uint64_t> seeds;
  std::vector<MatrixCell>   cells;  // attack-major
  std::vector<std::string>  failures;

  MatrixCell const &cell(std::string const &attack, std::string const &agent) const
  {
    for (auto const &c : cells)
    {
      if (c.attack == attack && c.agent == agent)
      {
        return c;
      }
    }
    throw std::out_of_range("no matrix cell for " + attack + "/" + agent);
  }
};

inline double median(std::vector<double> v)
{
  if (v.empty())
  {
    throw std::invalid_argument("median of empty set");
  }
  std::sort(v.begin(), v.end());
  std::size_t const n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MatrixOptions
{
  unsigned                                 threads{1};
  bool                                     write_files{true};
  std::function<void(std::string const &)> progress;
  /// Called with every finished run; useful for callers needing full records.
  std::function<void(std::string const &attack, std::string const &agent, std::uint64_t seed,
                     ExperimentResult const &)>
      on_run;
};

inline std::string matrix_csv(MatrixResult const &m)
{
  std::ostringstream o;
  o << "attack";
  for (auto const &a : m.agents)
  {
    o << ',' << a;
  }
  o << "\n";
  for (auto const &at : m.attacks)
  {
    o << at;
    for (auto const &ag : m.agents)
    {
      auto const &c = m.cell(at, ag);
      o << ',' << (c.median ? experiment_detail::fmt(*c.median, 4) : std::string{"NA"});
    }
    o << "\n";
  }
  return o.str();
}

/// Runs every attack x agent x seed combination; each run writes under
/// `<out>/<attack>_<agent>_s<seed>` and the medians go to `<out>/matrix_f1.csv`.
inline MatrixResult run_matrix(ExperimentConfig const &base, std::vector<std::string> const &agents,
                               std::vector<std::string> const &attacks, std::vector<std::uint64_t> const &seeds,
                               MatrixOptions const &opt = {})
{
  if (agents.empty() || attacks.empty() || seeds.empty())
  {
    throw std::invalid_argument("run_matrix: agents, attacks and seeds must be nonempty");
  }
  for (auto const &a : agents)
  {
    if (!is_agent_name(a))
    {
      throw ConfigError("unknown agent '" + a + "'");
    }
  }
  for (auto const &a : attacks)
  {
    if (!parse_attack_family(a))
    {
      throw ConfigError("unknown attack '" + a + "'");
    }
  }

  MatrixResult m{agents, attacks, seeds, {}, {}};
  for (auto const &at : attacks)
  {
    for (auto const &ag : agents)
    {
      m.cells.push_back({at, ag, std::vector<std::optional<double>>(seeds.size()), std::nullopt});
    }
  }

  struct Job
  {
    std::size_t cell;
    std::size_t seed_idx;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < m.cells.size(); ++c)
  {
    for (std::size_t s = 0; s < seeds.size(); ++s)
    {
      jobs.push_back({c, s});
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex               mu;
  auto                     worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();)
    {
      auto const &job  = jobs[j];
      auto       &cell = m.cells[job.cell];
      auto const  seed = seeds[job.seed_idx];

      ExperimentConfig cfg   = base;
      cfg.agent              = cell.agent;
      cfg.env.attack.family  = *parse_attack_family(cell.attack);
      cfg.env.seed           = seed;
      cfg.out                = (fs::path{base.out} / (cell.attack + "_" + cell.agent + "_s" + std::to_string(seed))).string();
      try
      {
        RunOptions ro;
        ro.write_files = opt.write_files;
        auto res       = run_experiment(cfg, ro);
        std::lock_guard lock{mu};
        cell.per_seed[job.seed_idx] = res.summary.f1.mean;
        if (opt.on_run)
        {
          opt.on_run(cell.attack, cell.agent, seed, res);
        }
        if (opt.progress)
        {
          opt.progress(cell.attack + " " + cell.agent + " seed " + std::to_string(seed) + ": tail-10 F1 " +
                       experiment_detail::fmt(res.summary.f1.mean, 3));
        }
      }
      catch (std::exception const &e)
      {
        std::lock_guard lock{mu};
        m.failures.push_back(cell.attack + "/" + cell.agent + "/seed " + std::to_string(seed) + ": " + e.what());
        if (opt.progress)
        {
          opt.progress("FAILED " + m.failures.back());
        }
      }
    }
  };

  unsigned const n_threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(jobs.size())));
  if (n_threads == 1)
  {
    worker();
  }
  else
  {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t)
    {
      pool.emplace_back(worker);
    }
    for (auto &t : pool)
    {
      t.join();
    }
  }

  for (auto &c : m.cells)
  {
    std::vector<double> ok;
    for (auto const &v : c.per_seed)
    {
      if (v)
      {
        ok.push_back(*v);
      }
    }
    // A cell is missing when any seed failed.
    if (ok.size() == c.per_seed.size())
    {
      c.median = median(ok);
    }
  }

  if (opt.write_files)
  {
    using namespace experiment_detail;
    ensure_directory(base.out);
    write_file(fs::path{base.out} / "matrix_f1.csv", matrix_csv(m));
    std::ostringstream runs;
    runs << "attack,agent,seed,tail10_f1\n";
    for (auto const &c : m.cells)
    {
      for (std::size_t s = 0; s < seeds.size(); ++s)
      {
        runs << c.attack << ',' << c.agent << ',' << seeds[s] << ','
             << (c.per_seed[s] ? fmt(*c.per_seed[s], 4) : std::string{"NA"}) << "\n";
      }
    }
    write_file(fs::path{base.out} / "matrix_runs.csv", runs.str());
  }
  return m;
}

}  // namespace trustsim
