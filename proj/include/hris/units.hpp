#pragma once

#include <cmath>

namespace hris {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

}  // namespace hris
