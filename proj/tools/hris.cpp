// Command-line front end. Exit codes: 0 ok, 1 config/input error, 2 infeasible everywhere,
// 3 solver or numerical failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hris/hris.hpp"

namespace {

namespace fs = std::filesystem;
using hris::Json;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kInfeasible = 2;
constexpr int kSolverFailure = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

hris::ExperimentConfig load(const Globals& g) {
  hris::ExperimentConfig c = g.config.empty() ? hris::config_from_json(Json::object())
                                              : hris::load_config(g.config);
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

void write_resolved_config(const hris::ExperimentConfig& c) {
  fs::create_directories(c.output_dir);
  std::ofstream(fs::path(c.output_dir) / "config.json") << hris::serialize_config(c);
}

hris::InnerProblem problem_from_json(const Json& j) {
  static const std::vector<std::string> keys = {"users",      "frame",        "q_min",
                                                "p_max",      "a",            "b",
                                                "amp_weight", "static_power", "fixed_energy",
                                                "budget"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw hris::ConfigError("problem file: unknown key '" + it.key() + "'");
    }
  }
  for (const auto& k : keys) {
    if (!j.contains(k)) throw hris::ConfigError("problem file: missing key '" + k + "'");
  }
  hris::InnerProblem p;
  p.users = j.at("users").get<int>();
  p.frame = j.at("frame").get<double>();
  p.q_min = j.at("q_min").get<double>();
  p.p_max = j.at("p_max").get<double>();
  p.a = j.at("a").get<std::vector<double>>();
  p.b = j.at("b").get<std::vector<double>>();
  p.amp_weight = j.at("amp_weight").get<std::vector<double>>();
  p.static_power = j.at("static_power").get<double>();
  p.fixed_energy = j.at("fixed_energy").get<double>();
  p.budget = j.at("budget").get<double>();
  return p;
}

Json solution_json(const hris::InnerSolution& s) {
  Json j = {{"status", hris::to_string(s.status)}};
  if (s.feasible()) {
    j["objective_j"] = s.objective;
    j["energy_j"] = {s.energy[0], s.energy[1]};
    j["duration_s"] = {s.duration[0], s.duration[1]};
  } else {
    j["certificate"] = s.certificate;
  }
  return j;
}

int cmd_train(const Globals& g, bool resume, std::optional<int> iterations) {
  hris::ExperimentConfig c = load(g);
  if (iterations) c.train.ppo.iterations = *iterations;
  if (g.seed) c.seeds.train = {*g.seed};
  hris::validate_experiment(c);
  write_resolved_config(c);
  const hris::EnvConfig ec = hris::make_env_config(c.env);
  const auto draws = hris::heldout_channels(ec, c.eval.draws, c.seeds.eval);
  bool all_infeasible = true;
  for (std::uint64_t seed : c.seeds.train) {
    const std::string s = std::to_string(seed);
    const hris::TrainPaths paths{(fs::path(c.output_dir) / ("metrics_seed" + s + ".csv")).string(),
                                 (fs::path(c.output_dir) / ("checkpoint_seed" + s + ".ckpt")).string()};
    std::cout << "seed " << s << "\n";
    const hris::TrainOutcome tr = hris::run_train(c, seed, paths, resume, &std::cout);
    const hris::EvalResult ev = hris::evaluate_greedy(&tr.agent, ec, draws);
    hris::MetricsRow m;
    ev.summary.fill(m);
    std::cout << "seed " << s << " greedy eval: median energy "
              << hris::format_number(ev.median_objective_mj()) << " mJ, infeasible "
              << hris::format_number(m.infeasible_fraction) << "\n";
    all_infeasible = all_infeasible && tr.infeasible_everywhere() && m.infeasible_fraction >= 1.0;
  }
  return all_infeasible ? kInfeasible : kOk;
}

int cmd_sweep(const Globals& g, const std::string& axis, const std::vector<double>& values,
              const std::string& checkpoint_dir, std::optional<int> iterations) {
  hris::ExperimentConfig c = load(g);
  if (!axis.empty()) {
    c.sweep.axis = hris::parse_axis(axis);
    if (values.empty()) c.sweep.values.clear();
  }
  if (!values.empty()) c.sweep.values = values;
  if (!checkpoint_dir.empty()) {
    c.sweep.train_fresh = false;
    c.sweep.checkpoint_dir = checkpoint_dir;
  }
  if (iterations) c.train.ppo.iterations = *iterations;
  if (g.seed) c.seeds.train = {*g.seed};
  hris::validate_experiment(c);
  write_resolved_config(c);
  const hris::SweepOutcome out = hris::run_sweep(c, c.output_dir, &std::cout);
  return out.infeasible_everywhere() ? kInfeasible : kOk;
}

int cmd_oracle(const Globals& g) {
  hris::ExperimentConfig c = load(g);
  if (g.seed) c.seeds.eval = *g.seed;
  hris::validate_experiment(c);
  write_resolved_config(c);
  const hris::OracleOutcome out = hris::run_oracle(c, c.output_dir, &std::cout);
  std::cout << "wrote " << (fs::path(c.output_dir) / "oracle.csv").string() << "\n";
  return out.infeasible_everywhere() ? kInfeasible : kOk;
}

int cmd_report(const Globals& g, const std::vector<std::string>& inputs) {
  const std::string out = g.out.empty() ? (g.config.empty() ? "out" : load(g).output_dir) : g.out;
  const hris::ReportOutcome r = hris::run_report(inputs, out, &std::cout);
  for (const auto& p : r.written) std::cout << "wrote " << p << "\n";
  return kOk;
}

int cmd_inner_solve(const std::string& file, bool with_oracle, int resolution) {
  std::ifstream in(file);
  if (!in) throw hris::ConfigError("cannot open problem file '" + file + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw hris::ConfigError(std::string("problem file: ") + e.what());
  }
  const hris::InnerProblem p = problem_from_json(j);
  const auto t0 = std::chrono::steady_clock::now();
  const hris::InnerSolution s = hris::solve(p);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  Json out = solution_json(s);
  out["solve_ms"] = ms;
  if (with_oracle) {
    hris::OracleOptions opt;
    opt.resolution = resolution;
    const hris::OracleResult o = hris::oracle_grid(p, opt);
    out["oracle"] = solution_json(o.solution);
    out["oracle"]["grid_bound_j"] = o.grid_bound;
  }
  std::cout << out.dump(2) << "\n";
  return s.feasible() ? kOk : kInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid active/passive RIS energy minimization: training, sweeps, oracle and reports"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON experiment config (defaults when omitted)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the seed (train/sweep: training seed, oracle: draw seed)");
  app.add_option("--out", g.out, "Output directory (overrides output_dir)");

  auto* train = app.add_subcommand("train", "Train one policy per training seed");
  bool resume = false;
  int iterations = 0;
  train->add_flag("--resume", resume, "Continue from an existing checkpoint in the output directory");
  auto* train_iters = train->add_option("--iterations", iterations, "Override ppo.iterations");

  auto* sweep = app.add_subcommand("sweep", "Train or load policies along one axis and evaluate them");
  std::string axis, checkpoint_dir;
  std::vector<double> values;
  int sweep_iterations = 0;
  sweep->add_option("--axis", axis, "es_power | n_elements | ris_distance | q_min");
  sweep->add_option("--values", values, "Axis values (comma separated)")->delimiter(',');
  sweep->add_option("--checkpoint-dir", checkpoint_dir, "Load checkpoints from here instead of training");
  auto* sweep_iters = sweep->add_option("--iterations", sweep_iterations, "Override ppo.iterations");

  auto* oracle = app.add_subcommand("oracle", "Exhaustive mode search on held-out draws (N <= 6)");

  auto* report = app.add_subcommand("report", "Median/IQR tables from metrics, sweep and oracle CSVs");
  std::vector<std::string> inputs;
  report->add_option("inputs", inputs, "CSV files or directories")->required();

  auto* inner = app.add_subcommand("inner-solve", "Solve one inner allocation problem from a JSON file");
  std::string problem_file;
  bool with_oracle = false;
  int resolution = 8;
  inner->add_option("problem", problem_file, "JSON problem file")->required();
  inner->add_flag("--oracle", with_oracle, "Also run the grid oracle");
  inner->add_option("--resolution", resolution, "Oracle grid resolution")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*train) {
      return cmd_train(g, resume, *train_iters ? std::optional<int>(iterations) : std::nullopt);
    }
    if (*sweep) {
      return cmd_sweep(g, axis, values, checkpoint_dir,
                       *sweep_iters ? std::optional<int>(sweep_iterations) : std::nullopt);
    }
    if (*oracle) return cmd_oracle(g);
    if (*report) return cmd_report(g, inputs);
    if (*inner) return cmd_inner_solve(problem_file, with_oracle, resolution);
  } catch (const hris::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const hris::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const hris::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const hris::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const hris::DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
