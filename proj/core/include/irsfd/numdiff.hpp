#pragma once

#include <functional>

#include "irsfd/types.hpp"

namespace irsfd {

using ScalarField = std::function<double(const RVec&)>;
using GradientField = std::function<RVec(const RVec&)>;

/// (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate. Throws
/// NumericalError if f is non-finite at a probe point.
RVec central_diff(const ScalarField& f, const RVec& x, double h);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  int worst_index = -1;
  double h = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  /// Diagnostic only: max_i |a_i - n_i| / max(|a_i| + |n_i|, 1e-6 * scale),
  /// which exposes small coordinates drowned in finite-difference noise.
  double max_coordinate_error = 0.0;
};

/// Errors are measured against the size of the whole gradient:
///   e_i = |a_i - n_i| / (max_j |a_j| + max_j |n_j| + eps),
/// max_rel_error = max_i e_i and mean_rel_error = mean_i e_i. worst_index is
/// the coordinate with the largest e_i.
GradCheckReport compare_gradients(const RVec& analytic, const RVec& numeric, double tol);

GradCheckReport grad_check(const RVec& analytic, const ScalarField& f, const RVec& x, double h, double tol);
GradCheckReport grad_check(const GradientField& analytic, const ScalarField& f, const RVec& x, double h, double tol);

}  // namespace irsfd
