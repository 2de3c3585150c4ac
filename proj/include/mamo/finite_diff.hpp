#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mamo/error.hpp"
#include "mamo/matrix.hpp"

namespace mamo {

// Central-difference gradient oracle. `loss_fn` is re-evaluated with each
// coordinate perturbed in place; the coordinates are restored afterwards.
// Independent of the analytic backward path by construction: it only ever
// calls the forward map.
template <typename F>
Vec finite_diff_grad(F&& loss_fn, std::span<double* const> coords, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("finite_diff_grad: epsilon must be positive");
  Vec grad(coords.size(), 0.0);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double* p = coords[i];
    const double saved = *p;
    *p = saved + epsilon;
    const double f_plus = loss_fn();
    *p = saved - epsilon;
    const double f_minus = loss_fn();
    *p = saved;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw OracleError("finite_diff_grad: non-finite loss at probe of coordinate " +
                        std::to_string(i));
    }
    grad[i] = (f_plus - f_minus) / (2.0 * epsilon);
  }
  return grad;
}

/// Central difference for a single coordinate.
template <typename F>
double finite_diff_coord(F&& loss_fn, double* coord, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("finite_diff_coord: epsilon must be positive");
  const double saved = *coord;
  *coord = saved + epsilon;
  const double f_plus = loss_fn();
  *coord = saved - epsilon;
  const double f_minus = loss_fn();
  *coord = saved;
  if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
    throw OracleError("finite_diff_coord: non-finite loss at probe point");
  }
  return (f_plus - f_minus) / (2.0 * epsilon);
}

// Gradient-check error measure: absolute difference scaled by the larger
// magnitude, floored at unit scale so that noise on near-zero coordinates
// does not register as disagreement.
inline double grad_rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

inline double max_grad_rel_error(const Vec& analytic, const Vec& numeric) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("max_grad_rel_error: gradient lengths " + std::to_string(analytic.size()) +
                     " vs " + std::to_string(numeric.size()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, grad_rel_error(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace mamo
