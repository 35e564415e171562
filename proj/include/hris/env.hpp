#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hris/agent.hpp"
#include "hris/channel.hpp"
#include "hris/error.hpp"
#include "hris/inner_solver.hpp"
#include "hris/rng.hpp"
#include "hris/scheme.hpp"
#include "hris/sysmodel.hpp"

namespace hris {

/// per_element: |h_ur| (J*N, user-major), |h_rb| (N), |h_ub| (J), ||h_es|| (1).
/// norms: ||h_ur row j|| (J), ||h_rb|| (1), |h_ub| (J), ||h_es|| (1).
enum class StateLayout { per_element, norms };

inline const char* to_string(StateLayout s) {
  return s == StateLayout::per_element ? "per_element" : "norms";
}

inline StateLayout parse_state_layout(const std::string& s) {
  if (s == "per_element") return StateLayout::per_element;
  if (s == "norms") return StateLayout::norms;
  throw InputError("unknown state layout '" + s + "'");
}

struct EnvConfig {
  Geometry geometry;
  LinkSet links;
  SystemParams sys;
  double e_ref = 1e-3;   ///< J per unit of reward
  double kappa = 100.0;  ///< reward of an infeasible step is -kappa
  Scheme scheme = Scheme::hybrid;
  StateLayout state_layout = StateLayout::per_element;
  bool no_ris_without_ehs = false;  ///< drop the EHS circuit energy when every element is idle
  bool random_user_angles = false;  ///< redraw user angles on the circle with every channel draw
  Vec3 user_center{0.0, 0.0, 0.0};
  double user_radius = 0.5;
};

inline void validate_env_config(const EnvConfig& c) {
  validate_geometry(c.geometry);
  const SystemParams& s = c.sys;
  const double powers[] = {s.noise_bs, s.noise_ris, s.p_circuit, s.p_amp_dc, s.p_rf_dc, s.p_es, s.p_max};
  for (double p : powers) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("env: powers must be finite and >= 0");
  }
  if (!(s.noise_bs > 0.0)) throw InputError("env: BS noise power must be positive");
  if (!(s.frame > 0.0)) throw InputError("env: frame length must be positive");
  if (!(s.q_min >= 0.0)) throw InputError("env: q_min must be >= 0");
  if (!(s.xi >= 0.0) || !(s.eta_eh >= 0.0)) throw InputError("env: xi and eta_eh must be >= 0");
  if (!(s.rho_max >= rho_from_bucket(kRhoBuckets - 1))) {
    throw InputError("env: rho_max below the largest amplification bucket");
  }
  if (!(c.e_ref > 0.0)) throw InputError("env: e_ref must be positive");
  // Feasible rewards are >= -p_max T / e_ref; the penalty must not beat any of them.
  if (!(c.kappa >= s.p_max * s.frame / c.e_ref)) {
    throw InputError("env: kappa must be >= p_max * frame / e_ref so infeasible steps rank last");
  }
}

inline int state_dim(int users, int elements, StateLayout layout) {
  return layout == StateLayout::per_element ? users * elements + elements + users + 1
                                            : 2 * users + 2;
}

inline VectorXd build_state(const ChannelSet& ch, StateLayout layout = StateLayout::per_element) {
  const int users = ch.users();
  const int n = ch.ris_elements();
  VectorXd s(state_dim(users, n, layout));
  int k = 0;
  if (layout == StateLayout::per_element) {
    for (int j = 0; j < users; ++j) {
      for (int e = 0; e < n; ++e) s(k++) = std::abs(ch.h_ur(j, e));
    }
    for (int e = 0; e < n; ++e) s(k++) = std::abs(ch.h_rb(e));
  } else {
    for (int j = 0; j < users; ++j) s(k++) = ch.h_ur.row(j).norm();
    s(k++) = ch.h_rb.norm();
  }
  for (int j = 0; j < users; ++j) s(k++) = std::abs(ch.h_ub(j));
  s(k++) = ch.h_es.norm();
  return s;
}

inline ModeAssignment decode_action(const Action& a, Scheme scheme, int elements) {
  const HeadLayout layout(elements, scheme);
  check_action(a, layout);
  ModeAssignment m;
  m.reflect.resize(elements);
  m.active.resize(elements);
  m.rho.resize(elements);
  for (int n = 0; n < elements; ++n) {
    auto head = [&](int h) { return layout.is_free(h) ? a[3 * n + h] : layout.forced[h]; };
    m.reflect[n] = head(0);
    m.active[n] = head(1);
    m.rho[n] = rho_from_bucket(head(2));
  }
  return m;
}

/// Inner program for the given modes, honoring the no-hardware option.
inline InnerProblem env_inner_problem(const ChannelSet& ch, const ModeAssignment& modes,
                                      const EnvConfig& cfg) {
  InnerProblem p = assemble_inner_problem(ch, modes, cfg.sys);
  if (cfg.no_ris_without_ehs) {
    bool all_idle = true;
    for (int n = 0; n < modes.size(); ++n) all_idle = all_idle && modes.is_idle(n);
    if (all_idle) p.fixed_energy = 0.0;
  }
  return p;
}

inline InnerSolution solve_modes(const ChannelSet& ch, const ModeAssignment& modes,
                                 const EnvConfig& cfg) {
  return solve(env_inner_problem(ch, modes, cfg));
}

inline double reward_of(const InnerSolution& s, const EnvConfig& cfg) {
  return s.feasible() ? -s.objective / cfg.e_ref : -cfg.kappa;
}

struct StepRecord {
  VectorXd state;
  Action action;
  ModeAssignment modes;
  double reward = 0.0;
  bool feasible = false;
  InnerSolution solution;
};

/// Contextual-bandit environment: every step solves the inner program for the current draw and
/// then moves to a fresh independent draw.
class Env {
 public:
  Env(EnvConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
    validate_env_config(cfg_);
    reset();
  }

  void reset() {
    if (cfg_.random_user_angles) {
      cfg_.geometry.user_pos =
          place_users_random(cfg_.geometry.users(), cfg_.user_center, cfg_.user_radius, rng_);
    }
    channels_ = sample_channel_set(cfg_.geometry, cfg_.links, rng_);
    state_ = build_state(channels_, cfg_.state_layout);
  }

  StepRecord step(const Action& a) {
    StepRecord r;
    r.state = state_;
    r.action = a;
    r.modes = decode_action(a, cfg_.scheme, elements());
    r.solution = solve_modes(channels_, r.modes, cfg_);
    r.feasible = r.solution.feasible();
    r.reward = reward_of(r.solution, cfg_);
    reset();
    return r;
  }

  const VectorXd& state() const { return state_; }
  const ChannelSet& channels() const { return channels_; }
  const EnvConfig& config() const { return cfg_; }
  int state_dim() const { return static_cast<int>(state_.size()); }
  int elements() const { return cfg_.geometry.ris_elements; }
  HeadLayout layout() const { return {elements(), cfg_.scheme}; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  EnvConfig cfg_;
  Rng rng_;
  ChannelSet channels_;
  VectorXd state_;
};

/// Independent channel draws used for greedy evaluation and the oracle.
inline std::vector<ChannelSet> heldout_channels(const EnvConfig& cfg, int count, std::uint64_t seed) {
  EnvConfig c = cfg;
  Rng rng(seed);
  std::vector<ChannelSet> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    if (c.random_user_angles) {
      c.geometry.user_pos = place_users_random(c.geometry.users(), c.user_center, c.user_radius, rng);
    }
    out.push_back(sample_channel_set(c.geometry, c.links, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Exhaustive mode enumeration

inline constexpr int kOracleMaxElements = 6;

struct OracleChoice {
  ModeAssignment modes;
  InnerSolution solution;
  long long candidates = 0;  ///< mode combinations visited
  long long solves = 0;      ///< distinct assignments actually solved

  bool feasible() const { return solution.feasible(); }
  double objective() const { return solution.objective; }
};

/// Every mode combination allowed by the configured scheme, with either one shared amplification
/// bucket (uniform_rho) or one per element. Lowest objective wins; ties keep the first candidate.
inline OracleChoice enumerate_oracle(const ChannelSet& ch, const EnvConfig& cfg, bool uniform_rho) {
  const int n = ch.ris_elements();
  if (n > kOracleMaxElements) {
    throw InputError("enumerate_oracle: at most " + std::to_string(kOracleMaxElements) +
                     " elements supported, got " + std::to_string(n));
  }
  const HeadLayout layout(n, cfg.scheme);
  auto head_values = [&](int h) {
    std::vector<int> v;
    if (layout.is_free(h)) {
      for (int k = 0; k < kHeadSizes[h]; ++k) v.push_back(k);
    } else {
      v.push_back(layout.forced[h]);
    }
    return v;
  };
  const std::vector<int> beta_v = head_values(0), alpha_v = head_values(1), rho_v = head_values(2);
  // Per-element choices of (reflect, active[, bucket]).
  std::vector<std::array<int, 3>> element_choices;
  for (int b : beta_v) {
    for (int a : alpha_v) {
      if (uniform_rho) {
        element_choices.push_back({b, a, -1});
      } else {
        for (int r : rho_v) element_choices.push_back({b, a, r});
      }
    }
  }
  const std::vector<int> shared = uniform_rho ? rho_v : std::vector<int>{-1};

  OracleChoice best;
  bool have = false;
  std::map<std::vector<int>, InnerSolution> memo;
  const int per = static_cast<int>(element_choices.size());
  std::vector<int> idx(n, 0);
  ModeAssignment m;
  m.reflect.resize(n);
  m.active.resize(n);
  m.rho.resize(n);
  std::vector<int> key(n);
  for (int r_shared : shared) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      for (int e = 0; e < n; ++e) {
        const auto& c = element_choices[idx[e]];
        const int bucket = uniform_rho ? r_shared : c[2];
        m.reflect[e] = c[0];
        m.active[e] = c[1];
        m.rho[e] = rho_from_bucket(bucket);
        key[e] = c[0] == 0 ? 0 : (c[1] == 0 ? 1 : 2 + bucket);
      }
      ++best.candidates;
      auto it = memo.find(key);
      if (it == memo.end()) {
        it = memo.emplace(key, solve_modes(ch, m, cfg)).first;
        ++best.solves;
      }
      const InnerSolution& s = it->second;
      const bool better = !have || (s.feasible() && (!best.solution.feasible() ||
                                                     s.objective < best.solution.objective));
      if (better) {
        best.modes = m;
        best.solution = s;
        have = true;
      }
      int e = 0;
      while (e < n && ++idx[e] == per) idx[e++] = 0;
      if (e == n) break;
    }
  }
  return best;
}

}  // namespace hris
