#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hris/error.hpp"
#include "hris/inner_problem.hpp"

namespace hris {

struct SolverOptions {
  double tol = 1e-6;             ///< relative duality-gap target on the objective
  double newton_tol = 1e-8;      ///< half squared Newton decrement at which centering stops
  double barrier_growth = 10.0;
  double t_floor = 1e-9;         ///< s, lower bound on every duration inside the barrier
  double feasibility_margin = 1e-9;  ///< minimum max-slack for a feasible verdict
  int max_newton_steps = 2000;   ///< across all centering steps of one phase
};

/// Outcome of the phase-1 (max-min slack) program.
struct FeasibilityReport {
  bool feasible = false;
  double max_slack = 0.0;   ///< best achievable minimum normalized slack
  std::string certificate;  ///< constraint families tight at the max-slack point
};

namespace detail {

/// Barrier model of the inner program in normalized variables
///   x = [t_0 (J), t_1 (J), E_0 (J), E_1 (J), z]
/// durations in units of the frame and energies in units of `energy_unit`. The last variable z
/// is the epigraph bound tau in phase 2 and the relaxation s in phase 1.
class P2Barrier {
 public:
  enum class Phase { feasibility, optimality };

  struct Eval {
    bool in_domain = false;
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
  };

  P2Barrier(const InnerProblem& p, const SolverOptions& opt) : p_(p), opt_(opt), users_(p.users) {
    energy_unit_ = estimate_energy_unit(p);
    cap_ = p.p_max * p.frame / energy_unit_;
    q_ = p.q_min / p.frame;
    e_scale_ = std::max({p.budget, p.fixed_energy, 1e-300});
    floor_ = opt.t_floor / p.frame;
    slope_[0].resize(users_);
    slope_[1].resize(users_);
    for (int j = 0; j < users_; ++j) {
      slope_[0][j] = p.a[j] * energy_unit_ / p.frame;
      slope_[1][j] = p.b[j] * energy_unit_ / p.frame;
    }
  }

  int size() const { return 4 * users_ + 1; }
  int t_idx(int phase, int j) const { return phase * users_ + j; }
  int e_idx(int phase, int j) const { return 2 * users_ + phase * users_ + j; }
  int z_idx() const { return 4 * users_; }
  double energy_unit() const { return energy_unit_; }

  /// Number of inequality constraints in the given phase (duality-gap bookkeeping).
  int constraint_count(Phase phase) const {
    const int base = 1 + 2 * users_ + 2 * users_ + 2 * users_ + users_ + 1;
    return phase == Phase::optimality ? base + users_ : base;
  }

  /// Typical-scale energy: every user served alone in T/J with the better of its two links.
  static double estimate_energy_unit(const InnerProblem& p) {
    const double cap = std::max(p.p_max * p.frame, 1e-300);
    double unit = 0.0;
    const double share = p.frame / p.users;
    for (int j = 0; j < p.users; ++j) {
      const double c = std::max(p.a[j], p.b[j]);
      if (c <= 0.0) return cap;
      const double need = share * std::expm1(std::numbers::ln2 * p.q_min / share) / c;
      unit = std::max(unit, need);
    }
    if (!std::isfinite(unit) || unit <= 0.0) return cap;
    return std::min(unit, cap);
  }

  /// Feasibility-phase starting point: a quarter of the frame split evenly, energies at half cap.
  Eigen::VectorXd phase1_start() const {
    Eigen::VectorXd x(size());
    const double t0 = 0.5 / (2.0 * users_);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < users_; ++j) {
        x(t_idx(i, j)) = t0;
        x(e_idx(i, j)) = 0.5 * cap_ * t0;
      }
    }
    double worst = -std::numeric_limits<double>::infinity();
    for_each_relaxed(x, [&](double f, Family) { worst = std::max(worst, f); });
    x(z_idx()) = worst + 1.0;
    return x;
  }

  enum class Family { time, cap, qos, energy };

  static const char* family_name(Family f) {
    switch (f) {
      case Family::time: return "time";
      case Family::cap: return "power-cap";
      case Family::qos: return "qos";
      case Family::energy: return "energy-budget";
    }
    return "?";
  }

  /// Values of the constraints relaxed in phase 1 (normalized, feasible when <= 0).
  template <typename Fn>
  void for_each_relaxed(const Eigen::VectorXd& x, Fn&& fn) const {
    double time_sum = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < users_; ++j) time_sum += x(t_idx(i, j));
    fn(time_sum - 1.0, Family::time);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < users_; ++j) fn(x(e_idx(i, j)) / cap_ - x(t_idx(i, j)), Family::cap);
    for (int j = 0; j < users_; ++j) fn(qos_value(x, j), Family::qos);
    fn(energy_value(x), Family::energy);
  }

  double qos_value(const Eigen::VectorXd& x, int j) const {
    double rate = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double t = x(t_idx(i, j));
      rate += t * std::log1p(slope_[i][j] * x(e_idx(i, j)) / t) / std::numbers::ln2;
    }
    return (q_ - rate) / q_;
  }

  double energy_value(const Eigen::VectorXd& x) const {
    double e = p_.fixed_energy - p_.budget;
    for (int j = 0; j < users_; ++j) {
      e += p_.amp_weight[j] * energy_unit_ * x(e_idx(1, j));
      e += p_.static_power * p_.frame * x(t_idx(1, j));
    }
    return e / e_scale_;
  }

  /// Barrier objective weight * z - sum log(-f_i) with gradient and Hessian.
  Eval evaluate(const Eigen::VectorXd& x, double weight, Phase phase, bool derivatives) const {
    const int n = size();
    Eval ev;
    if (derivatives) {
      ev.grad = Eigen::VectorXd::Zero(n);
      ev.hess = Eigen::MatrixXd::Zero(n, n);
    }
    const bool relax = phase == Phase::feasibility;
    const double z = x(z_idx());
    double value = weight * z;
    if (derivatives) ev.grad(z_idx()) += weight;

    Eigen::VectorXd g(n);
    // Linear constraint f = coeffs . x + c; returns false outside the domain.
    auto add_linear = [&](double f) -> bool {
      if (!(f < 0.0)) return false;
      value -= std::log(-f);
      if (derivatives) {
        ev.grad -= g / f;
        ev.hess.noalias() += (g * g.transpose()) / (f * f);
      }
      return true;
    };

    // time: sum t - 1 (- s)
    {
      g.setZero();
      double f = -1.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < users_; ++j) {
          f += x(t_idx(i, j));
          g(t_idx(i, j)) = 1.0;
        }
      if (relax) { f -= z; g(z_idx()) = -1.0; }
      if (!add_linear(f)) return ev;
    }
    // duration floor and energy positivity, never relaxed
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < users_; ++j) {
        g.setZero();
        g(t_idx(i, j)) = -1.0;
        if (!add_linear(floor_ - x(t_idx(i, j)))) return ev;
        g.setZero();
        g(e_idx(i, j)) = -1.0;
        if (!add_linear(-x(e_idx(i, j)))) return ev;
      }
    // caps: E / cap - t (- s)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < users_; ++j) {
        g.setZero();
        g(e_idx(i, j)) = 1.0 / cap_;
        g(t_idx(i, j)) = -1.0;
        double f = x(e_idx(i, j)) / cap_ - x(t_idx(i, j));
        if (relax) { f -= z; g(z_idx()) = -1.0; }
        if (!add_linear(f)) return ev;
      }
    // QoS, convex: (q - sum_i t log2(1 + c E / t)) / q (- s)
    for (int j = 0; j < users_; ++j) {
      g.setZero();
      Eigen::Matrix4d local_h = Eigen::Matrix4d::Zero();  // over (t0, E0, t1, E1)
      double rate = 0.0;
      for (int i = 0; i < 2; ++i) {
        const double t = x(t_idx(i, j));
        const double e = x(e_idx(i, j));
        const double c = slope_[i][j];
        const double u = c * e / t;
        const double l1p = std::log1p(u);
        rate += t * l1p / std::numbers::ln2;
        if (!derivatives) continue;
        const double opu = 1.0 + u;
        g(e_idx(i, j)) = -(c / (opu * std::numbers::ln2)) / q_;
        g(t_idx(i, j)) = -((l1p - u / opu) / std::numbers::ln2) / q_;
        // Hessian of -rate/q: (1 / (ln2 q t (1+u)^2)) [[u^2, -c u], [-c u, c^2]] over (t, E)
        const double k = 1.0 / (std::numbers::ln2 * q_ * t * opu * opu);
        local_h(2 * i, 2 * i) = k * u * u;
        local_h(2 * i, 2 * i + 1) = -k * c * u;
        local_h(2 * i + 1, 2 * i) = -k * c * u;
        local_h(2 * i + 1, 2 * i + 1) = k * c * c;
      }
      double f = (q_ - rate) / q_;
      if (relax) { f -= z; if (derivatives) g(z_idx()) = -1.0; }
      if (!(f < 0.0) || !std::isfinite(f)) return ev;
      value -= std::log(-f);
      if (derivatives) {
        ev.grad -= g / f;
        ev.hess.noalias() += (g * g.transpose()) / (f * f);
        const int idx[4] = {t_idx(0, j), e_idx(0, j), t_idx(1, j), e_idx(1, j)};
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) ev.hess(idx[r], idx[c]) += local_h(r, c) / (-f);
      }
    }
    // energy budget
    {
      g.setZero();
      for (int j = 0; j < users_; ++j) {
        g(e_idx(1, j)) = p_.amp_weight[j] * energy_unit_ / e_scale_;
        g(t_idx(1, j)) = p_.static_power * p_.frame / e_scale_;
      }
      double f = energy_value(x);
      if (relax) { f -= z; g(z_idx()) = -1.0; }
      if (!add_linear(f)) return ev;
    }
    // epigraph: E_0 + E_1 - tau
    if (!relax) {
      for (int j = 0; j < users_; ++j) {
        g.setZero();
        g(e_idx(0, j)) = 1.0;
        g(e_idx(1, j)) = 1.0;
        g(z_idx()) = -1.0;
        if (!add_linear(x(e_idx(0, j)) + x(e_idx(1, j)) - z)) return ev;
      }
    }
    if (!std::isfinite(value)) return ev;
    ev.in_domain = true;
    ev.value = value;
    return ev;
  }

  /// Damped Newton centering at fixed weight. Returns false when the step budget runs out.
  bool center(Eigen::VectorXd& x, double weight, Phase phase, int& steps_left) const {
    while (steps_left-- > 0) {
      Eval ev = evaluate(x, weight, phase, true);
      if (!ev.in_domain) throw SolverFailure("inner solver: iterate left the barrier domain");
      Eigen::VectorXd dx = newton_direction(ev);
      const double decrement_sq = -ev.grad.dot(dx);
      if (!std::isfinite(decrement_sq)) throw SolverFailure("inner solver: non-finite Newton step");
      if (decrement_sq / 2.0 <= opt_.newton_tol) return true;
      double step = 1.0;
      while (true) {
        const Eigen::VectorXd trial = x + step * dx;
        const Eval tv = evaluate(trial, weight, phase, false);
        if (tv.in_domain && tv.value <= ev.value - 0.25 * step * decrement_sq) {
          // At large weights the remaining decrease can sit below the rounding of the value.
          if (!(tv.value < ev.value)) return true;
          x = trial;
          break;
        }
        step *= 0.5;
        if (step < 1e-16) return true;  // no further descent representable
      }
    }
    return false;
  }

 private:
  static Eigen::VectorXd newton_direction(const Eval& ev) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.hess);
    Eigen::VectorXd dx = ldlt.solve(-ev.grad);
    double reg = 1e-12 * std::max(1.0, ev.hess.diagonal().cwiseAbs().maxCoeff());
    while ((ldlt.info() != Eigen::Success || !dx.allFinite() || ev.grad.dot(dx) >= 0.0) &&
           reg < 1e12) {
      Eigen::MatrixXd h = ev.hess;
      h.diagonal().array() += reg;
      ldlt.compute(h);
      dx = ldlt.solve(-ev.grad);
      reg *= 100.0;
    }
    return dx;
  }

  const InnerProblem& p_;
  SolverOptions opt_;
  int users_;
  double energy_unit_ = 1.0;
  double cap_ = 1.0;
  double q_ = 1.0;
  double e_scale_ = 1.0;
  double floor_ = 0.0;
  std::vector<double> slope_[2];
};

struct Phase1Result {
  FeasibilityReport report;
  Eigen::VectorXd point;
};

/// Maximizes the minimum normalized slack. With `stop_when_feasible` it returns as soon as a
/// centered iterate has slack above `early_margin`.
inline Phase1Result run_phase1(const P2Barrier& model, const SolverOptions& opt,
                               bool stop_when_feasible, double early_margin = 1e-3) {
  using Phase = P2Barrier::Phase;
  Eigen::VectorXd x = model.phase1_start();
  const int m = model.constraint_count(Phase::feasibility);
  double weight = 1.0;
  int steps_left = opt.max_newton_steps;
  while (true) {
    if (!model.center(x, weight, Phase::feasibility, steps_left)) {
      throw SolverFailure("inner solver: feasibility phase exceeded the Newton step cap");
    }
    const double s = x(model.z_idx());
    if (stop_when_feasible && -s > early_margin) break;
    if (m / weight <= 1e-10) break;
    weight *= opt.barrier_growth;
  }
  Phase1Result out;
  out.point = x;
  // The relaxation variable sits strictly above every constraint; the tightest constraint gives
  // the achieved minimum slack.
  double worst = -std::numeric_limits<double>::infinity();
  model.for_each_relaxed(x, [&](double f, P2Barrier::Family) { worst = std::max(worst, f); });
  out.report.max_slack = -worst;
  out.report.feasible = out.report.max_slack > opt.feasibility_margin;
  if (!out.report.feasible) {
    std::string cert;
    const double band = std::max(1e-6, 1e-3 * std::abs(worst));
    bool seen[4] = {false, false, false, false};
    model.for_each_relaxed(x, [&](double f, P2Barrier::Family fam) {
      const int k = static_cast<int>(fam);
      if (f >= worst - band && !seen[k]) {
        seen[k] = true;
        if (!cert.empty()) cert += ",";
        cert += P2Barrier::family_name(fam);
      }
    });
    out.report.certificate = "max slack " + std::to_string(out.report.max_slack) +
                             " < 0; tight: " + cert;
  }
  return out;
}

inline InnerSolution zero_requirement_solution(const InnerProblem& p) {
  InnerSolution s;
  for (int i = 0; i < 2; ++i) {
    s.energy[i].assign(p.users, 0.0);
    s.duration[i].assign(p.users, 0.0);
  }
  if (p.fixed_energy <= p.budget) {
    s.status = InnerStatus::optimal;
    s.objective = 0.0;
  } else {
    s.status = InnerStatus::infeasible;
    s.certificate = "fixed EHS energy exceeds the harvested budget; tight: energy-budget";
  }
  return s;
}

}  // namespace detail

/// Phase-1 check: is there a point meeting every constraint with positive normalized slack?
inline FeasibilityReport feasibility_probe(const InnerProblem& problem,
                                           const SolverOptions& opt = {}) {
  validate_inner_problem(problem);
  if (problem.q_min == 0.0) {
    FeasibilityReport r;
    const double e_scale = std::max({problem.budget, problem.fixed_energy, 1e-300});
    r.max_slack = std::min(1.0, (problem.budget - problem.fixed_energy) / e_scale);
    r.feasible = r.max_slack > opt.feasibility_margin;
    if (!r.feasible) r.certificate = "tight: energy-budget";
    return r;
  }
  detail::P2Barrier model(problem, opt);
  return detail::run_phase1(model, opt, false).report;
}

/// Minimizes the worst-user total energy. Infeasible instances come back with
/// status infeasible; a failure on a feasible instance throws SolverFailure.
inline InnerSolution solve(const InnerProblem& problem, const SolverOptions& opt = {}) {
  using detail::P2Barrier;
  using Phase = P2Barrier::Phase;
  validate_inner_problem(problem);
  if (problem.q_min == 0.0) {
    return detail::zero_requirement_solution(problem);
  }

  P2Barrier model(problem, opt);
  detail::Phase1Result ph1 = detail::run_phase1(model, opt, true);
  InnerSolution sol;
  const int users = problem.users;
  for (int i = 0; i < 2; ++i) {
    sol.energy[i].assign(users, 0.0);
    sol.duration[i].assign(users, 0.0);
  }
  if (!ph1.report.feasible) {
    sol.status = InnerStatus::infeasible;
    sol.certificate = ph1.report.certificate;
    return sol;
  }

  Eigen::VectorXd x = ph1.point;
  double tau = 0.0;
  for (int j = 0; j < users; ++j) {
    tau = std::max(tau, x(model.e_idx(0, j)) + x(model.e_idx(1, j)));
  }
  x(model.z_idx()) = tau * 1.1 + 1e-6;

  const int m = model.constraint_count(Phase::optimality);
  double weight = 1.0 / std::max(x(model.z_idx()), 1e-12);
  int steps_left = opt.max_newton_steps;
  while (true) {
    if (!model.center(x, weight, Phase::optimality, steps_left)) {
      throw SolverFailure("inner solver: optimality phase exceeded the Newton step cap");
    }
    if (m / weight <= opt.tol * x(model.z_idx())) break;
    weight *= opt.barrier_growth;
  }

  const double unit = model.energy_unit();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < users; ++j) {
      double t = x(model.t_idx(i, j)) * problem.frame;
      double e = x(model.e_idx(i, j)) * unit;
      if (t < 10.0 * opt.t_floor) {
        t = 0.0;
        e = 0.0;
      }
      sol.duration[i][j] = t;
      sol.energy[i][j] = e;
    }
  }
  sol.objective = 0.0;
  for (int j = 0; j < users; ++j) {
    sol.objective = std::max(sol.objective, sol.energy[0][j] + sol.energy[1][j]);
  }
  sol.status = InnerStatus::optimal;
  const double violation = max_scaled_violation(problem, sol);
  if (violation > 10.0 * opt.tol) {
    throw SolverFailure("inner solver: returned point violates constraints by " +
                        std::to_string(violation));
  }
  return sol;
}

}  // namespace hris
