#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "hris/channel.hpp"
#include "hris/error.hpp"
#include "hris/inner_problem.hpp"

namespace hris {

/// Per-element RIS configuration. reflect = 0 is idle; reflect = 1 with active = 0 is passive
/// (unit gain); reflect = active = 1 amplifies by rho. rho is ignored unless the element is active.
struct ModeAssignment {
  std::vector<int> reflect;
  std::vector<int> active;
  std::vector<double> rho;

  static ModeAssignment uniform(int n, int reflect, int active, double rho) {
    ModeAssignment m;
    m.reflect.assign(static_cast<std::size_t>(n), reflect);
    m.active.assign(static_cast<std::size_t>(n), active);
    m.rho.assign(static_cast<std::size_t>(n), rho);
    return m;
  }

  int size() const { return static_cast<int>(reflect.size()); }
  bool is_active(int n) const { return reflect[n] == 1 && active[n] == 1; }
  bool is_passive(int n) const { return reflect[n] == 1 && active[n] == 0; }
  bool is_idle(int n) const { return reflect[n] == 0; }

  /// Reflection magnitude beta rho^alpha.
  double gain(int n) const {
    if (reflect[n] == 0) return 0.0;
    return active[n] == 1 ? rho[n] : 1.0;
  }
};

/// Hardware and scenario constants of the energy and signal model, SI units.
struct SystemParams {
  double noise_bs = 1e-11;      ///< sigma_B^2, W
  double noise_ris = 1e-10;     ///< sigma_F^2, W
  double p_circuit = 1e-4;      ///< P_C per reflecting element, W
  double p_amp_dc = 3.1622776601683794e-4;  ///< P_DC per active element, W
  double p_rf_dc = 2.1e-6;      ///< P_b per EHS element, W
  double xi = 1.1;              ///< inverse amplifier efficiency
  double eta_eh = 0.8;          ///< harvesting efficiency
  double p_es = 6.309573444801933;  ///< ES transmit power, W
  double frame = 1.0;           ///< T, s
  double q_min = 5.0;           ///< bits/Hz per frame
  double p_max = 0.1;           ///< per-user cap, W
  double rho_max = 100.0;
};

struct EffectiveLinks {
  std::vector<double> g1;  ///< |h_ub|^2
  std::vector<double> g2;  ///< co-phased phase-1 power gain
  std::vector<double> nu;  ///< amplified RIS noise at the BS, W
  std::vector<double> a;
  std::vector<double> b;
};

struct EnergyCoefficients {
  std::vector<double> amp_weight;
  double static_power = 0.0;
  double fixed_energy = 0.0;
  double budget = 0.0;
};

inline double safe_arg(Complex z) { return z == Complex(0.0, 0.0) ? 0.0 : std::arg(z); }

/// Phase aligning element n's cascade with the direct path of the same user, in [0, 2pi).
inline double optimal_phase(Complex h_ub, Complex h_rb_n, Complex h_ur_jn) {
  double theta = safe_arg(h_ub) - safe_arg(std::conj(h_rb_n)) - safe_arg(h_ur_jn);
  theta = std::fmod(theta, 2.0 * std::numbers::pi);
  if (theta < 0.0) theta += 2.0 * std::numbers::pi;
  if (theta >= 2.0 * std::numbers::pi) theta = 0.0;
  return theta;
}

/// h_ub + h_rb^H diag(gain_n e^{j theta_n}) h_ur for the given phases.
inline Complex combined_channel(const ChannelSet& ch, const ModeAssignment& modes, int user,
                                const std::vector<double>& phases) {
  Complex acc = ch.h_ub(user);
  for (int n = 0; n < ch.ris_elements(); ++n) {
    const double g = modes.gain(n);
    if (g == 0.0) continue;
    acc += std::conj(ch.h_rb(n)) * std::polar(g, phases[n]) * ch.h_ur(user, n);
  }
  return acc;
}

inline void check_dimensions(const ChannelSet& ch, const ModeAssignment& modes) {
  const auto n = static_cast<std::size_t>(ch.ris_elements());
  if (modes.reflect.size() != n || modes.active.size() != n || modes.rho.size() != n) {
    throw InputError("mode assignment size does not match RIS element count");
  }
  if (ch.h_ur.rows() != ch.users() || ch.h_ur.cols() != ch.ris_elements()) {
    throw InputError("channel set: h_ur shape does not match users x elements");
  }
}

inline EffectiveLinks effective_links(const ChannelSet& ch, const ModeAssignment& modes,
                                      double noise_bs, double noise_ris) {
  check_dimensions(ch, modes);
  const int users = ch.users();
  const int n = ch.ris_elements();

  double amp_noise = 0.0;
  for (int k = 0; k < n; ++k) {
    if (modes.is_active(k)) amp_noise += modes.rho[k] * modes.rho[k] * std::norm(ch.h_rb(k));
  }
  amp_noise *= noise_ris;

  EffectiveLinks out;
  out.g1.resize(users);
  out.g2.resize(users);
  out.nu.assign(users, amp_noise);
  out.a.resize(users);
  out.b.resize(users);
  for (int j = 0; j < users; ++j) {
    double mag = std::abs(ch.h_ub(j));
    for (int k = 0; k < n; ++k) {
      mag += modes.gain(k) * std::abs(ch.h_rb(k)) * std::abs(ch.h_ur(j, k));
    }
    out.g1[j] = std::norm(ch.h_ub(j));
    out.g2[j] = mag * mag;
    out.a[j] = out.g1[j] / noise_bs;
    out.b[j] = out.g2[j] / (noise_bs + amp_noise);
  }
  return out;
}

inline EnergyCoefficients energy_coefficients(const ChannelSet& ch, const ModeAssignment& modes,
                                              const SystemParams& sys) {
  check_dimensions(ch, modes);
  const int users = ch.users();
  const int n = ch.ris_elements();

  EnergyCoefficients out;
  out.amp_weight.assign(users, 0.0);
  double rho_sq_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    if (modes.reflect[k] == 1) out.static_power += sys.p_circuit;
    if (!modes.is_active(k)) continue;
    const double r2 = modes.rho[k] * modes.rho[k];
    out.static_power += sys.p_amp_dc;
    rho_sq_sum += r2;
    for (int j = 0; j < users; ++j) out.amp_weight[j] += r2 * std::norm(ch.h_ur(j, k));
  }
  for (double& w : out.amp_weight) w *= sys.xi;
  out.static_power += sys.xi * sys.noise_ris * rho_sq_sum;
  out.fixed_energy = ch.ehs_elements() * sys.p_rf_dc * sys.frame;
  out.budget = sys.eta_eh * sys.p_es * ch.h_es.squaredNorm() * sys.frame;
  return out;
}

inline InnerProblem assemble_inner_problem(const ChannelSet& ch, const ModeAssignment& modes,
                                           const SystemParams& sys) {
  const EffectiveLinks links = effective_links(ch, modes, sys.noise_bs, sys.noise_ris);
  EnergyCoefficients coeff = energy_coefficients(ch, modes, sys);
  InnerProblem p;
  p.users = ch.users();
  p.frame = sys.frame;
  p.q_min = sys.q_min;
  p.p_max = sys.p_max;
  p.a = links.a;
  p.b = links.b;
  p.amp_weight = std::move(coeff.amp_weight);
  p.static_power = coeff.static_power;
  p.fixed_energy = coeff.fixed_energy;
  p.budget = coeff.budget;
  return p;
}

}  // namespace hris
