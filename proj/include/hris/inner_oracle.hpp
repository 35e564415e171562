#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "hris/error.hpp"
#include "hris/inner_problem.hpp"

namespace hris {

struct OracleOptions {
  int resolution = 8;          ///< uniform grid steps of every 1-D scan before refinement
  int refine_iterations = 60;  ///< golden-section steps around the best grid cell; 0 = pure grid
  int bisection_steps = 60;    ///< steps on the worst-user energy
};

struct OracleResult {
  InnerSolution solution;   ///< status infeasible means infeasible at this resolution
  double grid_bound = 0.0;  ///< width of the final worst-user energy bracket (J)
  long long points = 0;     ///< per-user (t_0, t_1) evaluations
};

namespace detail {

/// Per-user rate with E_0 = min(tau - E_1, p_max t_0), as a function of the phase-1 energy.
/// Concave in E_1.
struct UserRate {
  double t0, t1, a, b, tau, p_max;

  double at(double e1) const {
    double r = 0.0;
    const double e0 = std::min(tau - e1, p_max * t0);
    if (t0 > 0.0 && e0 > 0.0) r += t0 * std::log1p(a * e0 / t0) / std::numbers::ln2;
    if (t1 > 0.0 && e1 > 0.0) r += t1 * std::log1p(b * e1 / t1) / std::numbers::ln2;
    return r;
  }

  /// Right derivative of at().
  double slope(double e1) const {
    double d = 0.0;
    if (t1 > 0.0) d += t1 * b / (t1 + b * e1);
    if (t0 > 0.0 && tau - e1 < p_max * t0) d -= t0 * a / (t0 + a * std::max(0.0, tau - e1));
    return d / std::numbers::ln2;
  }

  double upper() const { return std::max(0.0, std::min(tau, p_max * t1)); }

  /// Maximizer of the rate over [0, upper()]. Beyond tau - p_max t0 the two phases share tau and
  /// the optimum equalizes the marginal rates t1/(t1/b + E_1) = t0/(t0/a + E_0).
  double argmax() const {
    const double hi = upper();
    const double lo = std::max(0.0, tau - p_max * t0);
    if (lo >= hi) return hi;
    if (a <= 0.0 || t0 <= 0.0) return hi;
    if (b <= 0.0 || t1 <= 0.0) return lo;
    const double level = (t1 * tau + t0 * t1 / a - t0 * t1 / b) / (t0 + t1);
    return std::clamp(level, lo, hi);
  }

  /// Smallest E_1 reaching q, or +inf. Newton from the left is monotone on a concave function;
  /// the result is nudged up until the rate is actually met.
  double min_energy(double q) const {
    const double peak = argmax();
    if (at(peak) < q) return std::numeric_limits<double>::infinity();
    if (at(0.0) >= q) return 0.0;
    double x = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double d = slope(x);
      if (!(d > 0.0)) break;
      const double next = std::min(peak, x + (q - at(x)) / d);
      if (!(next > x)) break;
      x = next;
      if (at(x) >= q) break;
    }
    double step = std::max(1e-300, 4.0 * std::numeric_limits<double>::epsilon() * x);
    while (at(x) < q && x < peak) {
      x = std::min(peak, x + step);
      step *= 2.0;
    }
    return x;
  }
};

struct Argmin {
  double x = 0.0;
  double value = std::numeric_limits<double>::infinity();
};

/// Minimizes a convex extended-valued f on [lo, hi]: uniform grid, then golden section on the
/// two cells around the best grid point. A known finite point breaks ties between infinite probes.
inline Argmin minimize_1d(const std::function<double(double)>& f, double lo, double hi, int steps,
                          int refine) {
  Argmin best;
  steps = std::max(1, steps);
  int best_i = -1;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + (hi - lo) * i / steps;
    const double v = f(x);
    if (v < best.value) {
      best = {x, v};
      best_i = i;
    }
  }
  if (best_i < 0 || refine <= 0) return best;

  const double cell = (hi - lo) / steps;
  double l = std::max(lo, best.x - cell);
  double r = std::min(hi, best.x + cell);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  auto track = [&](double x, double v) {
    if (v < best.value) best = {x, v};
    return v;
  };
  double c = r - g * (r - l), d = l + g * (r - l);
  double fc = track(c, f(c)), fd = track(d, f(d));
  for (int k = 0; k < refine; ++k) {
    bool go_left;
    if (std::isinf(fc) && std::isinf(fd)) {
      if (best.x < c) {
        go_left = true;
      } else if (best.x > d) {
        go_left = false;
      } else {
        l = c;
        r = d;
        c = r - g * (r - l);
        d = l + g * (r - l);
        fc = track(c, f(c));
        fd = track(d, f(d));
        continue;
      }
    } else {
      go_left = fc <= fd;
    }
    if (go_left) {
      r = d;
      d = c;
      fd = fc;
      c = r - g * (r - l);
      fc = track(c, f(c));
    } else {
      l = c;
      c = d;
      fc = fd;
      d = l + g * (r - l);
      fd = track(d, f(d));
    }
  }
  return best;
}

struct UserAllocation {
  double t0 = 0.0, t1 = 0.0, e1 = 0.0;
};

/// Nested searches for a fixed worst-user energy tau: the smallest budget use of users
/// first..J-1 sharing `time` seconds.
class BudgetSearch {
 public:
  BudgetSearch(const InnerProblem& p, const OracleOptions& opt, long long& points)
      : p_(p), opt_(opt), points_(points) {}

  double tau = 0.0;

  /// Budget used by user j with phase-1 duration t1 out of total time tt.
  double user_cost(int j, double tt, double t1, double* e1_out = nullptr) const {
    ++points_;
    const double t0 = std::max(0.0, tt - t1);
    UserRate ur{t0, t1, p_.a[j], p_.b[j], tau, p_.p_max};
    const double e1 = ur.min_energy(p_.q_min);
    if (e1_out) *e1_out = e1;
    if (std::isinf(e1)) return e1;
    return p_.amp_weight[j] * e1 + p_.static_power * t1;
  }

  double max_rate(int j, double tt, double t1) const {
    const UserRate ur{std::max(0.0, tt - t1), t1, p_.a[j], p_.b[j], tau, p_.p_max};
    return ur.at(ur.argmax());
  }

  /// Interval of phase-1 durations within total time tt where user j can reach q_min at this tau;
  /// empty (lo > hi) when none. The best achievable rate is concave in t1.
  std::pair<double, double> user_window(int j, double tt) const {
    const Argmin top = minimize_1d([&](double t1) { return -max_rate(j, tt, t1); }, 0.0, tt,
                                   opt_.resolution, opt_.refine_iterations);
    if (-top.value < p_.q_min) return {1.0, 0.0};
    auto ok = [&](double t1) { return max_rate(j, tt, t1) >= p_.q_min; };
    double l = top.x, h = top.x;
    if (ok(0.0)) {
      l = 0.0;
    } else {
      double out = 0.0;
      for (int k = 0; k < opt_.bisection_steps; ++k) {
        const double mid = 0.5 * (out + l);
        (ok(mid) ? l : out) = mid;
      }
    }
    if (ok(tt)) {
      h = tt;
    } else {
      double out = tt;
      for (int k = 0; k < opt_.bisection_steps; ++k) {
        const double mid = 0.5 * (h + out);
        (ok(mid) ? h : out) = mid;
      }
    }
    return {l, h};
  }

  Argmin user_best(int j, double tt) const {
    const auto [l, h] = user_window(j, tt);
    if (l > h) return {};
    return minimize_1d([&](double t1) { return user_cost(j, tt, t1); }, l, h, opt_.resolution,
                       opt_.refine_iterations);
  }

  /// Shortest total time in which user j can reach q_min at this tau, or +inf.
  double min_time(int j) const {
    auto ok = [&](double tt) {
      const auto w = user_window(j, tt);
      return w.first <= w.second;
    };
    if (!ok(p_.frame)) return std::numeric_limits<double>::infinity();
    double lo = 0.0, hi = p_.frame;
    for (int k = 0; k < opt_.bisection_steps; ++k) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? hi : lo) = mid;
    }
    return hi;
  }

  /// Minimal budget of users first.. sharing `time`; fills `alloc` when non-null.
  double group(int first, double time, std::vector<UserAllocation>* alloc = nullptr) const {
    if (first == p_.users - 1) {
      const Argmin u = user_best(first, time);
      if (alloc && std::isfinite(u.value)) fill(first, time, u.x, *alloc);
      return u.value;
    }
    double rest = 0.0;
    for (int j = first + 1; j < p_.users; ++j) rest += min_time(j);
    const double lo = min_time(first);
    const double hi = time - rest;
    if (!(lo <= hi)) return std::numeric_limits<double>::infinity();
    const Argmin split = minimize_1d(
        [&](double tt) { return user_best(first, tt).value + group(first + 1, time - tt); }, lo,
        hi, opt_.resolution, opt_.refine_iterations);
    if (alloc && std::isfinite(split.value)) {
      fill(first, split.x, user_best(first, split.x).x, *alloc);
      group(first + 1, time - split.x, alloc);
    }
    return split.value;
  }

 private:
  void fill(int j, double tt, double t1, std::vector<UserAllocation>& alloc) const {
    double e1 = 0.0;
    user_cost(j, tt, t1, &e1);
    alloc[j] = {std::max(0.0, tt - t1), t1, e1};
  }

  const InnerProblem& p_;
  const OracleOptions& opt_;
  long long& points_;
};

}  // namespace detail

/// Independent search over the durations: bisection on the worst-user energy tau; for each tau a
/// nested grid search (refined by golden section) splits the frame between users and each user's
/// share between the two phases, with the smallest phase-1 energy meeting q_min. A tau is
/// accepted when the cheapest split fits the harvested budget. The returned point satisfies every
/// constraint, so its objective bounds the optimum from above.
inline OracleResult oracle_grid(const InnerProblem& p, const OracleOptions& opt = {}) {
  validate_inner_problem(p);
  if (p.users > 3) throw InputError("oracle_grid: at most 3 users supported");
  const int users = p.users;

  OracleResult out;
  InnerSolution& best = out.solution;
  best.status = InnerStatus::infeasible;
  for (int i = 0; i < 2; ++i) {
    best.energy[i].assign(users, 0.0);
    best.duration[i].assign(users, 0.0);
  }

  const double residual = p.budget - p.fixed_energy;
  detail::BudgetSearch search(p, opt, out.points);
  auto fits = [&](double tau) {
    search.tau = tau;
    return search.group(0, p.frame) <= residual;
  };

  double hi = p.p_max * p.frame;
  if (residual < 0.0 || !fits(hi)) {
    best.certificate = "no feasible grid point at this resolution";
    return out;
  }
  double lo = 0.0;
  if (!fits(0.0)) {
    for (int k = 0; k < opt.bisection_steps; ++k) {
      const double mid = 0.5 * (lo + hi);
      (fits(mid) ? hi : lo) = mid;
    }
  } else {
    hi = 0.0;
  }
  out.grid_bound = hi - lo;

  std::vector<detail::UserAllocation> alloc(users);
  search.tau = hi;
  search.group(0, p.frame, &alloc);
  best.status = InnerStatus::optimal;
  best.objective = 0.0;
  for (int j = 0; j < users; ++j) {
    const auto& u = alloc[j];
    best.duration[0][j] = u.t0;
    best.duration[1][j] = u.t1;
    best.energy[1][j] = u.t1 > 0.0 ? u.e1 : 0.0;
    best.energy[0][j] = u.t0 > 0.0 ? std::clamp(hi - best.energy[1][j], 0.0, p.p_max * u.t0) : 0.0;
    best.objective = std::max(best.objective, best.energy[0][j] + best.energy[1][j]);
  }
  return out;
}

}  // namespace hris
