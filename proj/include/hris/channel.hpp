#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hris/error.hpp"
#include "hris/rng.hpp"

namespace hris {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Vec3 = Eigen::Vector3d;

/// Node positions in meters. RIS and EHS are uniform linear arrays oriented along their axes.
struct Geometry {
  Vec3 bs_pos{20.0, 0.0, 0.0};
  Vec3 ris_pos{5.0, 3.0, 0.0};
  Vec3 ehs_pos{5.0, 3.0, 5.0};
  Vec3 es_pos{5.0, -2.0, 5.0};
  std::vector<Vec3> user_pos;
  Vec3 ris_axis{0.0, 1.0, 0.0};
  Vec3 ehs_axis{0.0, 1.0, 0.0};
  int ris_elements = 20;
  int ehs_elements = 20;

  int users() const { return static_cast<int>(user_pos.size()); }
};

/// Large-scale and fading parameters of one link class.
struct LinkParams {
  double ref_loss_db = -20.0;  ///< path loss at 1 m
  double exponent = 2.2;
  double rician_k = 2.0;       ///< linear; 0 gives Rayleigh
  double spacing_ratio = 0.5;  ///< element spacing over wavelength
};

/// Per-link parameters for the four link classes.
struct LinkSet {
  LinkParams ub{-30.0, 3.2, 0.0, 0.5};
  LinkParams ur{-20.0, 2.2, 2.0, 0.5};
  LinkParams rb{-20.0, 2.2, 2.0, 0.5};
  LinkParams es{-20.0, 2.2, 2.0, 0.5};
};

/// One block-fading realization of every link.
struct ChannelSet {
  CVector h_ub;  ///< J direct user->BS coefficients
  CMatrix h_ur;  ///< J x N, row j is user j -> RIS
  CVector h_rb;  ///< N, RIS -> BS
  CVector h_es;  ///< M, ES -> EHS

  int users() const { return static_cast<int>(h_ub.size()); }
  int ris_elements() const { return static_cast<int>(h_rb.size()); }
  int ehs_elements() const { return static_cast<int>(h_es.size()); }

  friend bool operator==(const ChannelSet& a, const ChannelSet& b) {
    return a.h_ub == b.h_ub && a.h_ur == b.h_ur && a.h_rb == b.h_rb && a.h_es == b.h_es;
  }
};

/// Users on a circle of `radius` around `center` in the z = `center.z()` plane, equally spaced
/// starting at angle 0.
inline std::vector<Vec3> place_users_equal(int count, const Vec3& center, double radius) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    const double angle = 2.0 * std::numbers::pi * j / count;
    out.push_back(center + Vec3(radius * std::cos(angle), radius * std::sin(angle), 0.0));
  }
  return out;
}

/// Same circle, independent uniform angles.
inline std::vector<Vec3> place_users_random(int count, const Vec3& center, double radius,
                                            Rng& rng) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    out.push_back(center + Vec3(radius * std::cos(angle), radius * std::sin(angle), 0.0));
  }
  return out;
}

/// Linear power gain 10^(ref_loss_db/10) * d^-exponent.
inline double path_loss(double ref_loss_db, double distance, double exponent) {
  if (!(distance > 0.0)) throw DomainError("path_loss: distance must be positive");
  return std::pow(10.0, ref_loss_db / 10.0) * std::pow(distance, -exponent);
}

/// ULA response: entry k is exp(-j 2pi spacing_ratio k phi).
inline CVector steering_vector(int count, double spacing_ratio, double angle_param) {
  if (count < 1) throw DomainError("steering_vector: count must be >= 1");
  CVector v(count);
  v(0) = Complex(1.0, 0.0);
  for (int k = 1; k < count; ++k) {
    const double phase = -2.0 * std::numbers::pi * spacing_ratio * k * angle_param;
    v(k) = std::polar(1.0, phase);
  }
  return v;
}

/// Cosine of the angle between the array axis and the direction from the array to `endpoint`.
inline double angle_param_from_geometry(const Vec3& array_pos, const Vec3& array_axis,
                                        const Vec3& endpoint) {
  const double axis_norm = array_axis.norm();
  if (!(axis_norm > 0.0)) throw DomainError("angle_param_from_geometry: zero-length axis");
  const Vec3 dir = endpoint - array_pos;
  const double dist = dir.norm();
  if (!(dist > 0.0)) throw DomainError("angle_param_from_geometry: endpoint equals array position");
  return std::clamp(array_axis.dot(dir) / (axis_norm * dist), -1.0, 1.0);
}

inline Complex sample_rayleigh(double gain, Rng& rng) {
  if (gain < 0.0) throw DomainError("sample_rayleigh: negative gain");
  return std::sqrt(gain) * rng.complex_normal();
}

/// K at or above this is treated as a pure line-of-sight link.
inline constexpr double kLosOnlyRicianK = 1e9;

/// sqrt(gain) * (sqrt(K/(K+1)) los + sqrt(1/(K+1)) nlos), nlos ~ CN(0, I).
inline CVector sample_rician(double gain, double rician_k, const CVector& los_vec, Rng& rng) {
  if (gain < 0.0) throw DomainError("sample_rician: negative gain");
  if (rician_k < 0.0) throw DomainError("sample_rician: negative Rician factor");
  const double amp = std::sqrt(gain);
  if (rician_k >= kLosOnlyRicianK) return amp * los_vec;
  const double los_w = std::sqrt(rician_k / (rician_k + 1.0));
  const double nlos_w = std::sqrt(1.0 / (rician_k + 1.0));
  CVector out(los_vec.size());
  for (Eigen::Index k = 0; k < los_vec.size(); ++k) {
    out(k) = amp * (los_w * los_vec(k) + nlos_w * rng.complex_normal());
  }
  return out;
}

inline void validate_geometry(const Geometry& g) {
  if (g.ris_elements < 1) throw DomainError("geometry: RIS needs at least one element");
  if (g.ehs_elements < 1) throw DomainError("geometry: EHS needs at least one element");
  if (g.user_pos.empty()) throw DomainError("geometry: at least one user required");
  auto check = [](const Vec3& a, const Vec3& b, const char* what) {
    if (!((a - b).norm() > 0.0)) throw DomainError(std::string("geometry: zero distance on ") + what);
  };
  for (const auto& u : g.user_pos) {
    check(u, g.bs_pos, "user-BS link");
    check(u, g.ris_pos, "user-RIS link");
  }
  check(g.ris_pos, g.bs_pos, "RIS-BS link");
  check(g.es_pos, g.ehs_pos, "ES-EHS link");
  if (!(g.ris_axis.norm() > 0.0) || !(g.ehs_axis.norm() > 0.0)) {
    throw DomainError("geometry: zero-length array axis");
  }
}

/// Draws one realization. Draw order is fixed (UB, UR row by row, RB, ES) so a seed maps to a
/// unique ChannelSet.
inline ChannelSet sample_channel_set(const Geometry& g, const LinkSet& links, Rng& rng) {
  validate_geometry(g);
  const int users = g.users();
  const int n = g.ris_elements;
  const int m = g.ehs_elements;

  ChannelSet cs;
  cs.h_ub.resize(users);
  for (int j = 0; j < users; ++j) {
    const double d = (g.user_pos[j] - g.bs_pos).norm();
    cs.h_ub(j) = sample_rayleigh(path_loss(links.ub.ref_loss_db, d, links.ub.exponent), rng);
  }

  cs.h_ur.resize(users, n);
  for (int j = 0; j < users; ++j) {
    const double d = (g.user_pos[j] - g.ris_pos).norm();
    const double phi = angle_param_from_geometry(g.ris_pos, g.ris_axis, g.user_pos[j]);
    const CVector los = steering_vector(n, links.ur.spacing_ratio, phi);
    cs.h_ur.row(j) = sample_rician(path_loss(links.ur.ref_loss_db, d, links.ur.exponent),
                                   links.ur.rician_k, los, rng)
                         .transpose();
  }

  {
    const double d = (g.ris_pos - g.bs_pos).norm();
    const double phi = angle_param_from_geometry(g.ris_pos, g.ris_axis, g.bs_pos);
    const CVector los = steering_vector(n, links.rb.spacing_ratio, phi);
    cs.h_rb = sample_rician(path_loss(links.rb.ref_loss_db, d, links.rb.exponent),
                            links.rb.rician_k, los, rng);
  }
  {
    const double d = (g.es_pos - g.ehs_pos).norm();
    const double phi = angle_param_from_geometry(g.ehs_pos, g.ehs_axis, g.es_pos);
    const CVector los = steering_vector(m, links.es.spacing_ratio, phi);
    cs.h_es = sample_rician(path_loss(links.es.ref_loss_db, d, links.es.exponent),
                            links.es.rician_k, los, rng);
  }
  return cs;
}

}  // namespace hris
