#include "irsfd/numdiff.hpp"

#include <algorithm>
#include <cmath>

namespace irsfd {

RVec central_diff(const ScalarField& f, const RVec& x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("central_diff: step must be positive");
  RVec g(x.size());
  RVec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("central_diff: function is not finite near coordinate " + std::to_string(i));
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

GradCheckReport compare_gradients(const RVec& analytic, const RVec& numeric, double tol) {
  if (analytic.size() != numeric.size()) throw InvalidArgument("compare_gradients: length mismatch");
  GradCheckReport r;
  r.tolerance = tol;
  if (analytic.size() == 0) {
    r.passed = true;
    return r;
  }
  const double denom = analytic.cwiseAbs().maxCoeff() + numeric.cwiseAbs().maxCoeff() + 1e-300;
  const double floor = 1e-6 * denom;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double d = std::abs(analytic(i) - numeric(i));
    const double e = d / denom;
    sum += e;
    if (e > r.max_rel_error || r.worst_index < 0) {
      r.max_rel_error = e;
      r.worst_index = static_cast<int>(i);
    }
    r.max_coordinate_error =
        std::max(r.max_coordinate_error, d / std::max(std::abs(analytic(i)) + std::abs(numeric(i)), floor));
  }
  r.mean_rel_error = sum / static_cast<double>(analytic.size());
  r.passed = r.max_rel_error <= tol;
  return r;
}

GradCheckReport grad_check(const RVec& analytic, const ScalarField& f, const RVec& x, double h, double tol) {
  GradCheckReport r = compare_gradients(analytic, central_diff(f, x, h), tol);
  r.h = h;
  return r;
}

GradCheckReport grad_check(const GradientField& analytic, const ScalarField& f, const RVec& x, double h,
                           double tol) {
  return grad_check(analytic(x), f, x, h, tol);
}

}  // namespace irsfd
