#pragma once

#include <array>
#include <string>
#include <string_view>

#include "hris/error.hpp"

namespace hris {

/// RIS operating scheme. Restricted schemes pin some per-element heads.
enum class Scheme { hybrid, active_passive, active, passive, no_ris };

inline constexpr std::array<Scheme, 5> kAllSchemes{Scheme::hybrid, Scheme::active_passive,
                                                   Scheme::active, Scheme::passive, Scheme::no_ris};

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::hybrid: return "hybrid";
    case Scheme::active_passive: return "active_passive";
    case Scheme::active: return "active";
    case Scheme::passive: return "passive";
    case Scheme::no_ris: return "no_ris";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  for (Scheme s : kAllSchemes) {
    if (name == to_string(s)) return s;
  }
  throw InputError("unknown scheme '" + std::string(name) + "'");
}

/// Per-element action heads: reflect flag, active flag, amplification bucket.
inline constexpr std::array<int, 3> kHeadSizes{2, 2, 10};
inline constexpr std::array<int, 3> kHeadOffsets{0, 2, 4};
inline constexpr int kLogitsPerElement = 14;
inline constexpr int kRhoBuckets = 10;

/// Amplification factor of bucket k: 10 (k + 1).
inline double rho_from_bucket(int k) { return 10.0 * (k + 1); }

/// Value each head is pinned to under a scheme, or -1 when the policy chooses it.
inline std::array<int, 3> forced_heads(Scheme s) {
  switch (s) {
    case Scheme::hybrid: return {-1, -1, -1};
    case Scheme::active_passive: return {1, -1, -1};
    case Scheme::active: return {1, 1, -1};
    case Scheme::passive: return {1, 0, 0};
    case Scheme::no_ris: return {0, 0, 0};
  }
  return {-1, -1, -1};
}

/// Logit layout of N elements under a scheme.
struct HeadLayout {
  int elements = 1;
  std::array<int, 3> forced{-1, -1, -1};

  HeadLayout() = default;
  HeadLayout(int n, Scheme s) : elements(n), forced(forced_heads(s)) {}

  int logits() const { return kLogitsPerElement * elements; }
  int actions() const { return 3 * elements; }
  int offset(int n, int h) const { return kLogitsPerElement * n + kHeadOffsets[h]; }
  bool is_free(int h) const { return forced[h] < 0; }
  bool any_free() const { return is_free(0) || is_free(1) || is_free(2); }
};

}  // namespace hris
