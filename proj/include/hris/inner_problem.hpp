#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hris/error.hpp"

namespace hris {

/// Canonical per-frame resource allocation program: with the RIS modes fixed, choose per-user
/// phase energies E[i][j] and durations t[i][j] to minimize max_j (E[0][j] + E[1][j]).
///
///   sum_ij t_ij <= frame
///   0 <= E_ij <= p_max t_ij
///   t_0j log2(1 + a_j E_0j / t_0j) + t_1j log2(1 + b_j E_1j / t_1j) >= q_min
///   sum_j amp_weight_j E_1j + static_power sum_j t_1j + fixed_energy <= budget
///
/// Index 0 is the direct-link-only phase, index 1 the RIS-assisted phase.
struct InnerProblem {
  int users = 1;
  double frame = 1.0;          ///< s
  double q_min = 0.0;          ///< bits/Hz
  double p_max = 0.1;          ///< W
  std::vector<double> a;       ///< 1/W, phase-0 SNR per joule-per-second
  std::vector<double> b;       ///< 1/W, phase-1 SNR slope
  std::vector<double> amp_weight;
  double static_power = 0.0;   ///< W, charged per second of phase 1
  double fixed_energy = 0.0;   ///< J
  double budget = 0.0;         ///< J
};

enum class InnerStatus { optimal, infeasible };

inline const char* to_string(InnerStatus s) {
  return s == InnerStatus::optimal ? "optimal" : "infeasible";
}

struct InnerSolution {
  InnerStatus status = InnerStatus::infeasible;
  std::vector<double> energy[2];    ///< J, per phase and user
  std::vector<double> duration[2];  ///< s, per phase and user
  double objective = 0.0;           ///< max_j sum_i energy; meaningful when optimal
  std::string certificate;          ///< constraint families that block feasibility

  bool feasible() const { return status == InnerStatus::optimal; }

  double total_phase1_time() const {
    double s = 0.0;
    for (double v : duration[1]) s += v;
    return s;
  }
};

/// t log2(1 + c E / t), the perspective of log2(1 + c E); zero at t = 0.
inline double rate_term(double energy, double duration, double slope) {
  if (energy < 0.0 || duration < 0.0) throw DomainError("rate_term: negative energy or duration");
  if (duration == 0.0) {
    if (energy > 0.0) throw DomainError("rate_term: positive energy in zero duration");
    return 0.0;
  }
  return duration * std::log1p(slope * energy / duration) / std::numbers::ln2;
}

inline void validate_inner_problem(const InnerProblem& p) {
  const auto n = static_cast<std::size_t>(p.users);
  if (p.users < 1) throw InputError("inner problem: users must be >= 1");
  if (p.a.size() != n || p.b.size() != n || p.amp_weight.size() != n) {
    throw InputError("inner problem: coefficient vectors must have one entry per user");
  }
  auto finite_nonneg = [](double v, const char* what) {
    if (!std::isfinite(v)) throw InputError(std::string("inner problem: non-finite ") + what);
    if (v < 0.0) throw InputError(std::string("inner problem: negative ") + what);
  };
  finite_nonneg(p.frame, "frame");
  if (!(p.frame > 0.0)) throw InputError("inner problem: frame must be positive");
  finite_nonneg(p.q_min, "q_min");
  finite_nonneg(p.p_max, "p_max");
  finite_nonneg(p.static_power, "static_power");
  finite_nonneg(p.fixed_energy, "fixed_energy");
  finite_nonneg(p.budget, "budget");
  for (std::size_t j = 0; j < n; ++j) {
    finite_nonneg(p.a[j], "a");
    finite_nonneg(p.b[j], "b");
    finite_nonneg(p.amp_weight[j], "amp_weight");
  }
}

/// Largest violation of the program's constraints at a candidate point, each family normalized
/// (time by frame, rate by q_min, energy by budget scale, caps by p_max * frame).
inline double max_scaled_violation(const InnerProblem& p, const InnerSolution& s) {
  const int users = p.users;
  double worst = 0.0;
  double time_sum = 0.0;
  double e_use = p.fixed_energy;
  const double cap_scale = std::max(p.p_max * p.frame, 1e-300);
  const double q_scale = p.q_min > 0.0 ? p.q_min : 1.0;
  const double e_scale = std::max({p.budget, p.fixed_energy, 1e-300});
  for (int j = 0; j < users; ++j) {
    double rate = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double t = s.duration[i][j];
      const double e = s.energy[i][j];
      worst = std::max(worst, -t / p.frame);
      worst = std::max(worst, -e / cap_scale);
      worst = std::max(worst, (e - p.p_max * t) / cap_scale);
      time_sum += t;
      if (t > 0.0) rate += t * std::log1p((i == 0 ? p.a[j] : p.b[j]) * e / t) / std::numbers::ln2;
    }
    worst = std::max(worst, (p.q_min - rate) / q_scale);
    e_use += p.amp_weight[j] * s.energy[1][j] + p.static_power * s.duration[1][j];
  }
  worst = std::max(worst, (time_sum - p.frame) / p.frame);
  worst = std::max(worst, (e_use - p.budget) / e_scale);
  return worst;
}

}  // namespace hris
