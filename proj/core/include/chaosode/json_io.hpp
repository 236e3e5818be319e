#pragma once

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace chaosode {

/// JSON has no infinity; non-finite numbers are written as null.
inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_inf(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace chaosode
