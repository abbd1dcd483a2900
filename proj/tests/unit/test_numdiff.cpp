#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "irsfd/numdiff.hpp"

using namespace irsfd;

TEST(CentralDiff, QuadraticIsExact) {
  // f = x0^2 + 3 x0 x1, exact for central differences up to rounding.
  auto f = [](const RVec& x) { return x(0) * x(0) + 3.0 * x(0) * x(1); };
  const RVec x = (RVec(2) << 1.5, -2.0).finished();
  const RVec g = central_diff(f, x, 1e-3);
  EXPECT_NEAR(g(0), 2.0 * 1.5 + 3.0 * -2.0, 1e-9);
  EXPECT_NEAR(g(1), 3.0 * 1.5, 1e-9);
}

TEST(CentralDiff, ConstantGivesZero) {
  const RVec g = central_diff([](const RVec&) { return 4.0; }, RVec::Ones(3), 1e-4);
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(CentralDiff, SecondOrderAccuracy) {
  auto f = [](const RVec& x) { return std::sin(x(0)); };
  const RVec x = RVec::Constant(1, 0.8);
  const double e1 = std::abs(central_diff(f, x, 1e-2)(0) - std::cos(0.8));
  const double e2 = std::abs(central_diff(f, x, 5e-3)(0) - std::cos(0.8));
  EXPECT_NEAR(e1 / e2, 4.0, 0.05);
}

TEST(CentralDiff, NonFiniteThrows) {
  auto f = [](const RVec& x) { return x(0) > 0 ? std::numeric_limits<double>::infinity() : 0.0; };
  EXPECT_THROW(central_diff(f, RVec::Zero(1), 1e-3), NumericalError);
}

TEST(CompareGradients, NormwiseMetric) {
  const RVec a = (RVec(3) << 1.0, 0.0, -2.0).finished();
  RVec n = a;
  n(1) = 1e-3;
  const GradCheckReport r = compare_gradients(a, n, 1e-2);
  EXPECT_NEAR(r.max_rel_error, 1e-3 / 4.0, 1e-15);
  EXPECT_EQ(r.worst_index, 1);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.max_coordinate_error, 1.0, 1e-12);
  EXPECT_FALSE(compare_gradients(a, n, 1e-4).passed);
}

TEST(CompareGradients, EmptyAndZero) {
  EXPECT_TRUE(compare_gradients(RVec(), RVec(), 1e-6).passed);
  const GradCheckReport z = compare_gradients(RVec::Zero(2), RVec::Zero(2), 1e-6);
  EXPECT_TRUE(z.passed);
  EXPECT_EQ(z.max_rel_error, 0.0);
  EXPECT_THROW(compare_gradients(RVec::Zero(2), RVec::Zero(3), 1e-6), InvalidArgument);
}

TEST(GradCheck, AnalyticFieldOverload) {
  auto f = [](const RVec& x) { return x.squaredNorm(); };
  auto g = [](const RVec& x) -> RVec { return 2.0 * x; };
  const RVec x = RVec::LinSpaced(4, -1.0, 2.0);
  const GradCheckReport r = grad_check(g, f, x, 1e-5, 1e-8);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.h, 1e-5);
  EXPECT_EQ(r.tolerance, 1e-8);
  EXPECT_FALSE(grad_check(RVec(3.0 * x), f, x, 1e-5, 1e-3).passed);
}
