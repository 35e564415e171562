#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "hris/agent.hpp"
#include "hris/env.hpp"
#include "hris/rng.hpp"
#include "hris/scheme.hpp"

namespace hris {

/// Element mode counts over many assignments.
struct ModeTally {
  long long active = 0, passive = 0, idle = 0;
  double rho_sum = 0.0;

  void add(const ModeAssignment& m) {
    for (int n = 0; n < m.size(); ++n) {
      if (m.is_active(n)) {
        ++active;
        rho_sum += m.rho[n];
      } else if (m.is_passive(n)) {
        ++passive;
      } else {
        ++idle;
      }
    }
  }

  long long total() const { return active + passive + idle; }
  double active_ratio() const { return total() ? double(active) / total() : 0.0; }
  double passive_ratio() const { return total() ? double(passive) / total() : 0.0; }
  double idle_ratio() const { return total() ? double(idle) / total() : 0.0; }
  double mean_rho() const {
    return active ? rho_sum / active : std::numeric_limits<double>::quiet_NaN();
  }
};

struct MetricsRow {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_minmax_energy_mj = 0.0;  ///< over feasible steps; NaN when none
  double infeasible_fraction = 0.0;
  double active_ratio = 0.0;
  double passive_ratio = 0.0;
  double idle_ratio = 0.0;
  double mean_rho_active = 0.0;  ///< NaN when no element was active
  double mean_t2_s = 0.0;        ///< total RIS-phase time, over feasible steps; NaN when none
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
};

/// Accumulates step outcomes into the reported quantities.
struct StepSummary {
  long long steps = 0, feasible = 0;
  double reward_sum = 0.0, energy_sum = 0.0, t2_sum = 0.0;
  ModeTally modes;

  void add(const StepRecord& r) {
    ++steps;
    reward_sum += r.reward;
    modes.add(r.modes);
    if (r.feasible) {
      ++feasible;
      energy_sum += r.solution.objective;
      t2_sum += r.solution.total_phase1_time();
    }
  }

  void fill(MetricsRow& m) const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.mean_reward = steps ? reward_sum / steps : nan;
    m.mean_minmax_energy_mj = feasible ? 1e3 * energy_sum / feasible : nan;
    m.infeasible_fraction = steps ? double(steps - feasible) / steps : nan;
    m.active_ratio = modes.active_ratio();
    m.passive_ratio = modes.passive_ratio();
    m.idle_ratio = modes.idle_ratio();
    m.mean_rho_active = modes.mean_rho();
    m.mean_t2_s = feasible ? t2_sum / feasible : nan;
  }
};

/// Collects one buffer and runs the PPO update. EnvT provides state(), step(Action), reset().
template <class EnvT>
MetricsRow train_iteration(PpoAgent& agent, EnvT& env, Rng& rng, int iteration) {
  env.reset();
  const int steps = agent.config.buffer;
  const int dim = agent.state_dim();
  Rollout ro;
  ro.states.resize(dim, steps);
  ro.actions.resize(agent.layout.actions(), steps);
  ro.logp.resize(steps);
  ro.rewards.resize(steps);
  ro.values.resize(steps + 1);
  StepSummary summary;
  for (int t = 0; t < steps; ++t) {
    const VectorXd s = agent.normalizer.normalize(env.state(), true);
    const auto [action, logp] = sample_and_logprob(agent.distribution(s), rng);
    ro.states.col(t) = s;
    for (int k = 0; k < agent.layout.actions(); ++k) ro.actions(k, t) = action[k];
    ro.logp(t) = logp;
    ro.values(t) = agent.value(s);
    const StepRecord rec = env.step(action);
    ro.rewards(t) = rec.reward;
    summary.add(rec);
  }
  ro.values(steps) = agent.value(agent.normalizer.apply(env.state()));
  const UpdateStats st = agent.update(ro, rng);

  MetricsRow m;
  m.iteration = iteration;
  summary.fill(m);
  m.entropy = st.entropy;
  m.clip_fraction = st.clip_fraction;
  m.mean_ratio = st.mean_ratio;
  return m;
}

// ---------------------------------------------------------------------------------------------
// Stub contextual bandit with a known best composite action

/// Two elements, four state features uniform on [-1, 1]. The best action reflects element n iff
/// s_n > 0, activates both iff s_2 > 0, and picks bucket 7 for element 0 and 2 for element 1 when
/// s_3 > 0 (swapped otherwise). Reward is minus the head mismatch, buckets by distance / 9.
class StubBandit {
 public:
  static constexpr int kElements = 2;
  static constexpr int kStateDim = 4;

  explicit StubBandit(std::uint64_t seed) : rng_(seed) { reset(); }

  void reset() {
    state_.resize(kStateDim);
    for (int i = 0; i < kStateDim; ++i) state_(i) = rng_.uniform(-1.0, 1.0);
  }

  static Action optimal_action(const VectorXd& s) {
    const int hi = s(3) > 0.0 ? 7 : 2;
    const int lo = s(3) > 0.0 ? 2 : 7;
    return {s(0) > 0.0 ? 1 : 0, s(2) > 0.0 ? 1 : 0, hi, s(1) > 0.0 ? 1 : 0, s(2) > 0.0 ? 1 : 0, lo};
  }

  static double reward(const VectorXd& s, const Action& a) {
    const Action best = optimal_action(s);
    double r = 0.0;
    for (int n = 0; n < kElements; ++n) {
      r -= a[3 * n] != best[3 * n];
      r -= a[3 * n + 1] != best[3 * n + 1];
      r -= std::abs(a[3 * n + 2] - best[3 * n + 2]) / 9.0;
    }
    return r;
  }

  StepRecord step(const Action& a) {
    StepRecord rec;
    rec.state = state_;
    rec.action = a;
    rec.modes = decode_action(a, Scheme::hybrid, kElements);
    rec.reward = reward(state_, a);
    rec.feasible = true;
    rec.solution.status = InnerStatus::optimal;
    rec.solution.objective = 0.0;
    reset();
    return rec;
  }

  const VectorXd& state() const { return state_; }
  int state_dim() const { return kStateDim; }
  HeadLayout layout() const { return {kElements, Scheme::hybrid}; }

 private:
  Rng rng_;
  VectorXd state_;
};

}  // namespace hris
