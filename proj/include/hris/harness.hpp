#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "hris/agent.hpp"
#include "hris/checkpoint.hpp"
#include "hris/config.hpp"
#include "hris/csv.hpp"
#include "hris/env.hpp"
#include "hris/error.hpp"
#include "hris/rng.hpp"
#include "hris/trainer.hpp"

namespace hris {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------------------------
// Seeds and metrics rows

/// Independent streams derived from one run seed.
struct RunSeeds {
  std::uint64_t env, trainer, init;
  explicit RunSeeds(std::uint64_t seed)
      : env(split_seed(seed, 1)), trainer(split_seed(seed, 2)), init(split_seed(seed, 3)) {}
};

inline const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> h = {
      "iteration",   "mean_reward",   "mean_minmax_energy_mj", "infeasible_fraction",
      "active_ratio", "passive_ratio", "idle_ratio",            "mean_rho_active",
      "mean_t2_s",   "entropy",       "clip_fraction",         "mean_ratio"};
  return h;
}

inline std::vector<std::string> metrics_fields(const MetricsRow& m) {
  return {std::to_string(m.iteration),         format_number(m.mean_reward),
          format_number(m.mean_minmax_energy_mj), format_number(m.infeasible_fraction),
          format_number(m.active_ratio),       format_number(m.passive_ratio),
          format_number(m.idle_ratio),         format_number(m.mean_rho_active),
          format_number(m.mean_t2_s),          format_number(m.entropy),
          format_number(m.clip_fraction),      format_number(m.mean_ratio)};
}

inline MetricsRow metrics_from_csv(const CsvTable& t, std::size_t r) {
  MetricsRow m;
  m.iteration = static_cast<int>(t.number(r, t.require("iteration")));
  m.mean_reward = t.number(r, t.require("mean_reward"));
  m.mean_minmax_energy_mj = t.number(r, t.require("mean_minmax_energy_mj"));
  m.infeasible_fraction = t.number(r, t.require("infeasible_fraction"));
  m.active_ratio = t.number(r, t.require("active_ratio"));
  m.passive_ratio = t.number(r, t.require("passive_ratio"));
  m.idle_ratio = t.number(r, t.require("idle_ratio"));
  m.mean_rho_active = t.number(r, t.require("mean_rho_active"));
  m.mean_t2_s = t.number(r, t.require("mean_t2_s"));
  m.entropy = t.number(r, t.require("entropy"));
  m.clip_fraction = t.number(r, t.require("clip_fraction"));
  m.mean_ratio = t.number(r, t.require("mean_ratio"));
  return m;
}

// ---------------------------------------------------------------------------------------------
// Training

struct TrainPaths {
  std::string metrics;     ///< CSV, one row per iteration
  std::string checkpoint;  ///< empty: no checkpoints
};

struct TrainOutcome {
  PpoAgent agent;
  std::vector<MetricsRow> rows;  ///< every iteration, including ones restored on resume
  int resumed_from = 0;

  bool infeasible_everywhere() const {
    if (rows.empty()) return false;
    return std::all_of(rows.begin(), rows.end(),
                       [](const MetricsRow& m) { return m.infeasible_fraction >= 1.0; });
  }
};

/// Trains one agent. With resume set and a checkpoint present, continues from it; metrics rows at
/// or beyond the checkpoint's iteration count are discarded and recomputed.
inline TrainOutcome run_train(const ExperimentConfig& cfg, std::uint64_t seed, const TrainPaths& paths,
                              bool resume = false, std::ostream* log = nullptr) {
  validate_experiment(cfg);
  const RunSeeds seeds(seed);
  Env env(make_env_config(cfg.env), seeds.env);
  Rng rng(seeds.trainer);
  Rng init(seeds.init);
  TrainOutcome out;
  out.agent = PpoAgent(env.state_dim(), env.layout(), cfg.train.ppo, init);
  const std::uint64_t hash = config_hash(cfg);
  const int iterations = cfg.train.ppo.iterations;

  if (resume) {
    if (paths.checkpoint.empty()) throw InputError("resume requested without a checkpoint path");
    Checkpoint c = load_checkpoint(paths.checkpoint);
    if (c.config_hash != hash) {
      throw ConfigError("checkpoint '" + paths.checkpoint + "' belongs to a different configuration");
    }
    out.agent = std::move(c.agent);
    out.agent.config = cfg.train.ppo;
    rng.deserialize(c.trainer_rng);
    env.rng().deserialize(c.env_rng);
    out.resumed_from = static_cast<int>(c.iterations);
    if (fs::exists(paths.metrics)) {
      const CsvTable old = read_csv(paths.metrics);
      for (std::size_t r = 0; r < old.rows.size(); ++r) {
        MetricsRow m = metrics_from_csv(old, r);
        if (m.iteration < out.resumed_from) out.rows.push_back(m);
      }
    }
    if (log) *log << "resuming from iteration " << out.resumed_from << "\n";
  }

  CsvWriter csv(paths.metrics, metrics_header());
  for (const MetricsRow& m : out.rows) csv.row(metrics_fields(m));

  auto save = [&](int done) {
    if (paths.checkpoint.empty()) return;
    Checkpoint c;
    c.iterations = static_cast<std::uint64_t>(done);
    c.config_hash = hash;
    c.agent = out.agent;
    c.trainer_rng = rng.serialize();
    c.env_rng = env.rng().serialize();
    save_checkpoint(paths.checkpoint, c);
  };

  const int interval = cfg.train.checkpoint_interval;
  for (int it = out.resumed_from; it < iterations; ++it) {
    const MetricsRow m = train_iteration(out.agent, env, rng, it);
    csv.row(metrics_fields(m));
    out.rows.push_back(m);
    if (log) {
      *log << "iter " << it << " reward " << format_number(m.mean_reward) << " energy_mj "
           << format_number(m.mean_minmax_energy_mj) << " infeasible "
           << format_number(m.infeasible_fraction) << "\n";
    }
    if (interval > 0 && (it + 1) % interval == 0 && it + 1 < iterations) save(it + 1);
  }
  if (out.resumed_from < iterations || !fs::exists(paths.checkpoint)) {
    save(std::max(iterations, out.resumed_from));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Greedy evaluation

struct EvalResult {
  std::vector<double> objective;  ///< J per draw; +inf when infeasible
  std::vector<ModeAssignment> modes;
  StepSummary summary;

  double median_objective_mj() const;
};

/// Zero-based type-7 quantile, ignoring NaN (+inf sorts last). NaN when nothing is left.
inline double quantile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (lo == hi || frac == 0.0 || v[lo] == v[hi]) return v[lo];
  if (std::isinf(v[hi])) return v[hi];
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

inline double EvalResult::median_objective_mj() const { return 1e3 * median(objective); }

/// Evaluates the greedy policy on fixed draws. A null agent means the scheme fixes every head.
inline EvalResult evaluate_greedy(const PpoAgent* agent, const EnvConfig& ec,
                                  const std::vector<ChannelSet>& draws) {
  const int n = ec.geometry.ris_elements;
  const HeadLayout layout(n, ec.scheme);
  if (!agent && layout.any_free()) throw InputError("evaluate_greedy: scheme needs a trained policy");
  EvalResult res;
  for (const ChannelSet& ch : draws) {
    StepRecord rec;
    rec.state = build_state(ch, ec.state_layout);
    rec.action = agent ? agent->greedy(rec.state) : Action(static_cast<std::size_t>(layout.actions()), 0);
    rec.modes = decode_action(rec.action, ec.scheme, n);
    rec.solution = solve_modes(ch, rec.modes, ec);
    rec.feasible = rec.solution.feasible();
    rec.reward = reward_of(rec.solution, ec);
    res.objective.push_back(rec.feasible ? rec.solution.objective
                                         : std::numeric_limits<double>::infinity());
    res.modes.push_back(rec.modes);
    res.summary.add(rec);
  }
  return res;
}

// ---------------------------------------------------------------------------------------------
// Sweep

inline const std::vector<std::string>& sweep_header() {
  static const std::vector<std::string> h = {
      "axis",           "value",      "scheme",     "seed",          "iterations",
      "draws",          "mean_minmax_energy_mj", "median_minmax_energy_mj",
      "infeasible_fraction", "active_ratio", "passive_ratio", "idle_ratio",
      "mean_rho_active", "mean_t2_s"};
  return h;
}

inline std::string run_tag(SweepAxis axis, double value, Scheme scheme, std::uint64_t seed) {
  return std::string(to_string(axis)) + "_" + format_number(value) + "_" + to_string(scheme) +
         "_seed" + std::to_string(seed);
}

struct SweepOutcome {
  int rows = 0;
  int infeasible_rows = 0;  ///< rows where every evaluation draw was infeasible
  bool infeasible_everywhere() const { return rows > 0 && infeasible_rows == rows; }
};

/// For every axis value, scheme and training seed: obtain a policy (train or load), evaluate it
/// greedily on the held-out draws and append one row to <out>/sweep.csv.
inline SweepOutcome run_sweep(const ExperimentConfig& cfg, const std::string& out_dir,
                              std::ostream* log = nullptr) {
  validate_experiment(cfg);
  const std::vector<double> values = sweep_values(cfg.sweep);
  const SweepAxis axis = cfg.sweep.axis;
  CsvWriter csv((fs::path(out_dir) / "sweep.csv").string(), sweep_header());
  SweepOutcome outcome;
  for (double value : values) {
    ExperimentConfig base = cfg;
    apply_axis(base.env, axis, value);
    for (Scheme scheme : cfg.sweep.schemes) {
      ExperimentConfig c = base;
      c.env.scheme = scheme;
      validate_experiment(c);
      const EnvConfig ec = make_env_config(c.env);
      const auto draws = heldout_channels(ec, c.eval.draws, c.seeds.eval);
      const bool trainable = HeadLayout(ec.geometry.ris_elements, scheme).any_free();
      for (std::uint64_t seed : c.seeds.train) {
        const std::string tag = run_tag(axis, value, scheme, seed);
        int iterations = 0;
        EvalResult ev;
        if (!trainable) {
          ev = evaluate_greedy(nullptr, ec, draws);
        } else if (c.sweep.train_fresh) {
          if (log) *log << "training " << tag << "\n";
          TrainPaths paths{(fs::path(out_dir) / "metrics" / (tag + ".csv")).string(),
                           (fs::path(out_dir) / "checkpoints" / (tag + ".ckpt")).string()};
          const TrainOutcome tr = run_train(c, seed, paths, false, nullptr);
          iterations = static_cast<int>(tr.rows.size());
          ev = evaluate_greedy(&tr.agent, ec, draws);
        } else {
          const std::string path = (fs::path(c.sweep.checkpoint_dir) / (tag + ".ckpt")).string();
          const Checkpoint ck = load_checkpoint(path);
          if (ck.config_hash != config_hash(c)) {
            throw ConfigError("checkpoint '" + path + "' belongs to a different configuration");
          }
          iterations = static_cast<int>(ck.iterations);
          ev = evaluate_greedy(&ck.agent, ec, draws);
        }
        MetricsRow m;
        ev.summary.fill(m);
        csv.row({to_string(axis), format_number(value), to_string(scheme), std::to_string(seed),
                 std::to_string(iterations), std::to_string(draws.size()),
                 format_number(m.mean_minmax_energy_mj), format_number(ev.median_objective_mj()),
                 format_number(m.infeasible_fraction), format_number(m.active_ratio),
                 format_number(m.passive_ratio), format_number(m.idle_ratio),
                 format_number(m.mean_rho_active), format_number(m.mean_t2_s)});
        ++outcome.rows;
        if (m.infeasible_fraction >= 1.0) ++outcome.infeasible_rows;
        if (log) {
          *log << tag << " median_energy_mj " << format_number(ev.median_objective_mj())
               << " infeasible " << format_number(m.infeasible_fraction) << "\n";
        }
      }
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------------------------
// Exhaustive oracle over held-out draws

inline std::vector<std::string> oracle_header(const std::vector<Scheme>& schemes) {
  std::vector<std::string> h = {"draw"};
  for (Scheme s : schemes) {
    const std::string n = to_string(s);
    for (const char* suffix : {"_energy_mj", "_active_ratio", "_passive_ratio", "_idle_ratio",
                               "_mean_rho_active", "_candidates"}) {
      h.push_back(n + suffix);
    }
  }
  h.push_back("all_idle_energy_mj");
  return h;
}

struct OracleOutcome {
  int draws = 0;
  int infeasible_draws = 0;  ///< draws where no scheme (nor all-idle) is feasible
  bool infeasible_everywhere() const { return draws > 0 && infeasible_draws == draws; }
};

/// Writes <out>/oracle.csv: per held-out draw, the best objective and mode mix of each scheme,
/// plus the all-idle baseline. Energies are +inf when infeasible.
inline OracleOutcome run_oracle(const ExperimentConfig& cfg, const std::string& out_dir,
                                std::ostream* log = nullptr) {
  validate_experiment(cfg);
  const EnvConfig base = make_env_config(cfg.env);
  if (base.geometry.ris_elements > kOracleMaxElements) {
    throw ConfigError("oracle supports at most " + std::to_string(kOracleMaxElements) +
                      " RIS elements, got " + std::to_string(base.geometry.ris_elements));
  }
  const auto draws = heldout_channels(base, cfg.eval.draws, cfg.seeds.eval);
  CsvWriter csv((fs::path(out_dir) / "oracle.csv").string(), oracle_header(cfg.eval.oracle_schemes));
  const double inf = std::numeric_limits<double>::infinity();
  OracleOutcome outcome;
  for (std::size_t d = 0; d < draws.size(); ++d) {
    std::vector<std::string> row = {std::to_string(d)};
    bool any = false;
    for (Scheme s : cfg.eval.oracle_schemes) {
      EnvConfig ec = base;
      ec.scheme = s;
      const OracleChoice best = enumerate_oracle(draws[d], ec, cfg.eval.uniform_rho_oracle);
      ModeTally tally;
      tally.add(best.modes);
      any = any || best.feasible();
      row.push_back(format_number(best.feasible() ? 1e3 * best.objective() : inf));
      row.push_back(format_number(tally.active_ratio()));
      row.push_back(format_number(tally.passive_ratio()));
      row.push_back(format_number(tally.idle_ratio()));
      row.push_back(format_number(tally.mean_rho()));
      row.push_back(std::to_string(best.candidates));
    }
    const int n = base.geometry.ris_elements;
    const InnerSolution idle =
        solve_modes(draws[d], ModeAssignment::uniform(n, 0, 0, rho_from_bucket(0)), base);
    any = any || idle.feasible();
    row.push_back(format_number(idle.feasible() ? 1e3 * idle.objective : inf));
    csv.row(row);
    ++outcome.draws;
    if (!any) ++outcome.infeasible_draws;
    if (log && (d + 1) % 10 == 0) *log << "oracle: " << d + 1 << "/" << draws.size() << " draws\n";
  }
  return outcome;
}

// ---------------------------------------------------------------------------------------------
// Report

struct ReportOutcome {
  std::vector<std::string> written;
  int metrics_files = 0, sweep_files = 0, oracle_files = 0;
};

namespace detail {

inline std::vector<std::string> collect_csv_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw InputError("report: no such file or directory '" + in + "'");
    }
  }
  return files;
}

/// Run label of a metrics file: its stem without a trailing _seed<k>.
inline std::string run_label(const std::string& path) {
  std::string stem = fs::path(path).stem().string();
  const auto pos = stem.rfind("_seed");
  if (pos != std::string::npos && pos + 5 < stem.size() &&
      stem.find_first_not_of("0123456789", pos + 5) == std::string::npos) {
    stem.erase(pos);
  }
  return stem;
}

inline std::vector<std::string> stats3(const std::vector<double>& v) {
  return {format_number(median(v)), format_number(quantile(v, 0.25)), format_number(quantile(v, 0.75))};
}

}  // namespace detail

/// Aggregates metrics, sweep and oracle CSVs into median/IQR tables. Directories are scanned
/// recursively; files with an unrecognized header are skipped there but rejected when named.
inline ReportOutcome run_report(const std::vector<std::string>& inputs, const std::string& out_dir,
                                std::ostream* log = nullptr) {
  if (inputs.empty()) throw InputError("report: no input files given");
  const auto files = detail::collect_csv_inputs(inputs);
  std::vector<std::string> named;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) named.push_back(in);
  }

  // run -> iteration -> per-file rows
  std::map<std::string, std::map<int, std::vector<MetricsRow>>> conv;
  using Key = std::tuple<std::string, double, std::string>;
  std::map<Key, std::vector<std::vector<double>>> sweep;  // columns below
  std::map<std::string, std::vector<double>> oracle;      // scheme -> energies per draw
  ReportOutcome out;

  for (const std::string& f : files) {
    const CsvTable t = read_csv(f);
    if (!t.header.empty() && t.header == metrics_header()) {
      ++out.metrics_files;
      auto& runs = conv[detail::run_label(f)];
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const MetricsRow m = metrics_from_csv(t, r);
        runs[m.iteration].push_back(m);
      }
    } else if (t.header == sweep_header()) {
      ++out.sweep_files;
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Key k{t.rows[r][0], t.number(r, 1), t.rows[r][2]};
        std::vector<double> row;
        for (std::size_t c = 6; c < t.header.size(); ++c) row.push_back(t.number(r, static_cast<int>(c)));
        sweep[k].push_back(row);
      }
    } else if (!t.header.empty() && t.header[0] == "draw") {
      ++out.oracle_files;
      for (std::size_t c = 1; c < t.header.size(); ++c) {
        const std::string& h = t.header[c];
        const std::string suffix = "_energy_mj";
        if (h.size() > suffix.size() && h.compare(h.size() - suffix.size(), suffix.size(), suffix) == 0) {
          const std::string name = h.substr(0, h.size() - suffix.size());
          for (std::size_t r = 0; r < t.rows.size(); ++r) oracle[name].push_back(t.number(r, static_cast<int>(c)));
        }
      }
    } else if (std::find(named.begin(), named.end(), f) != named.end()) {
      throw InputError("report: '" + f + "' is not a metrics, sweep or oracle table");
    }
  }
  if (conv.empty() && sweep.empty() && oracle.empty()) {
    throw InputError("report: no metrics, sweep or oracle rows found");
  }

  auto path = [&](const char* name) {
    const std::string p = (fs::path(out_dir) / name).string();
    out.written.push_back(p);
    return p;
  };

  if (!conv.empty()) {
    CsvWriter w(path("convergence.csv"),
                {"run", "iteration", "runs", "median_reward", "q25_reward", "q75_reward",
                 "median_energy_mj", "q25_energy_mj", "q75_energy_mj", "median_infeasible_fraction",
                 "median_entropy"});
    for (const auto& [run, iters] : conv) {
      for (const auto& [it, rows] : iters) {
        std::vector<double> rew, en, inf, ent;
        for (const MetricsRow& m : rows) {
          rew.push_back(m.mean_reward);
          en.push_back(m.mean_minmax_energy_mj);
          inf.push_back(m.infeasible_fraction);
          ent.push_back(m.entropy);
        }
        std::vector<std::string> f = {run, std::to_string(it), std::to_string(rows.size())};
        for (const auto& s : detail::stats3(rew)) f.push_back(s);
        for (const auto& s : detail::stats3(en)) f.push_back(s);
        f.push_back(format_number(median(inf)));
        f.push_back(format_number(median(ent)));
        w.row(f);
      }
    }
  }

  if (!sweep.empty()) {
    // sweep row columns from index 6: mean_e, median_e, infeasible, active, passive, idle, rho, t2
    auto column = [](const std::vector<std::vector<double>>& rows, std::size_t c) {
      std::vector<double> v;
      for (const auto& r : rows) v.push_back(r[c]);
      return v;
    };
    CsvWriter energy(path("energy_vs_axis.csv"),
                     {"axis", "value", "scheme", "runs", "median_energy_mj", "q25_energy_mj",
                      "q75_energy_mj", "median_infeasible_fraction"});
    CsvWriter ratio(path("ratio_vs_axis.csv"),
                    {"axis", "value", "scheme", "runs", "median_active_ratio", "median_passive_ratio",
                     "median_idle_ratio"});
    CsvWriter rho(path("rho_t2_vs_axis.csv"),
                  {"axis", "value", "scheme", "runs", "median_rho_active", "q25_rho_active",
                   "q75_rho_active", "median_t2_s", "q25_t2_s", "q75_t2_s"});
    for (const auto& [k, rows] : sweep) {
      const std::vector<std::string> head = {std::get<0>(k), format_number(std::get<1>(k)),
                                             std::get<2>(k), std::to_string(rows.size())};
      std::vector<std::string> e = head, r = head, p = head;
      for (const auto& s : detail::stats3(column(rows, 1))) e.push_back(s);
      e.push_back(format_number(median(column(rows, 2))));
      for (std::size_t c : {3u, 4u, 5u}) r.push_back(format_number(median(column(rows, c))));
      for (const auto& s : detail::stats3(column(rows, 6))) p.push_back(s);
      for (const auto& s : detail::stats3(column(rows, 7))) p.push_back(s);
      energy.row(e);
      ratio.row(r);
      rho.row(p);
      if (log) {
        *log << std::get<0>(k) << "=" << format_number(std::get<1>(k)) << " " << std::get<2>(k)
             << ": median energy " << e[4] << " mJ over " << rows.size() << " runs\n";
      }
    }
  }

  if (!oracle.empty()) {
    CsvWriter w(path("oracle_summary.csv"),
                {"scheme", "draws", "median_energy_mj", "q25_energy_mj", "q75_energy_mj",
                 "infeasible_fraction"});
    for (const auto& [name, v] : oracle) {
      const auto infeasible = std::count_if(v.begin(), v.end(), [](double x) { return std::isinf(x); });
      std::vector<std::string> f = {name, std::to_string(v.size())};
      for (const auto& s : detail::stats3(v)) f.push_back(s);
      f.push_back(format_number(v.empty() ? 0.0 : double(infeasible) / double(v.size())));
      w.row(f);
      if (log) *log << "oracle " << name << ": median energy " << f[2] << " mJ\n";
    }
  }
  return out;
}

}  // namespace hris
