#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "irsfd/system.hpp"
#include "irsfd/ssca.hpp"
#include "irsfd/wmmse.hpp"
#include "test_util.hpp"

using namespace irsfd;
using irsfd::testing::scalar;
using irsfd::testing::scalar_eff;
using irsfd::testing::scalar_scenario;

namespace {

struct Instance {
  ScenarioConfig cfg;
  EffectiveCsi eff;
  BeamformerSet init;
};

Instance random_instance(std::uint64_t seed) {
  Instance in;
  in.cfg = desk_scenario();
  Rng rng(seed);
  in.eff = effective_channels(sample_full_csi(in.cfg, rng), random_phases(in.cfg.irs_elements, rng));
  in.init = random_feasible_init(in.cfg, rng);
  return in;
}

CMat random_pd(int n, Rng& rng) {
  const CMat g = complex_gaussian(n, n, 1.0, rng);
  return g * g.adjoint() + CMat::Identity(n, n);
}

}  // namespace

TEST(Receivers, ZeroPrecoderGivesZeroFilter) {
  const ScenarioConfig cfg = scalar_scenario(1, 1);
  BeamformerSet bf;
  bf.p = {scalar(0.0)};
  bf.f = {scalar(1.0)};
  const WmmseAux aux = update_receivers(scalar_eff({1.0}, {1.0}), bf, cfg);
  EXPECT_EQ(aux.u_ul[0].norm(), 0.0);
}

TEST(Receivers, ScalarMmse) {
  const ScenarioConfig cfg = scalar_scenario(1, 0);
  BeamformerSet bf;
  bf.p = {scalar(1.0)};
  const WmmseAux aux = update_receivers(scalar_eff({1.0}, {}), bf, cfg);
  EXPECT_NEAR(std::abs(aux.u_ul[0](0, 0) - 0.5), 0.0, 1e-14);
}

TEST(Receivers, MinimiseWeightedQuadratic) {
  const Instance in = random_instance(51);
  const WmmseAux aux = update_receivers(in.eff, in.init, in.cfg);
  Rng rng(52);
  const CMat a = uplink_covariance(in.eff, in.init, in.cfg.ul_noise);
  const CMat hp = in.eff.h_ul[0] * in.init.p[0];
  const CMat w = random_pd(2, rng);
  auto q = [&](const CMat& u) {
    return (w * u.adjoint() * a * u).trace().real() - 2.0 * (w * u.adjoint() * hp).trace().real();
  };
  const double best = q(aux.u_ul[0]);
  for (int i = 0; i < 20; ++i) {
    const CMat eps = complex_gaussian(static_cast<int>(aux.u_ul[0].rows()), 2, 1e-6 * aux.u_ul[0].norm(), rng);
    EXPECT_GT(q(aux.u_ul[0] + eps), best);
  }
}

TEST(Weights, InverseOfError) {
  EXPECT_LT((weight_from_mse(CMat::Identity(2, 2)) - CMat::Identity(2, 2)).norm(), 1e-15);
  CMat e = CMat::Zero(2, 2);
  e(0, 0) = 2.0;
  e(1, 1) = 4.0;
  const CMat w = weight_from_mse(e);
  EXPECT_NEAR(w(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(w(1, 1).real(), 0.25, 1e-15);
  Rng rng(53);
  const CMat r = random_pd(3, rng);
  EXPECT_LE((weight_from_mse(r) * r - CMat::Identity(3, 3)).norm(), 1e-10);
  EXPECT_THROW(weight_from_mse(CMat::Zero(2, 2)), NumericalError);
}

TEST(Kkt, InteriorScalar) {
  const KktSolution s = solve_power_constrained(scalar(1.0), scalar(1.0), 100.0);
  EXPECT_EQ(s.multiplier, 0.0);
  EXPECT_NEAR(std::abs(s.x(0, 0) - 1.0), 0.0, 1e-14);
}

TEST(Kkt, BindingScalar) {
  BcdConfig cfg;
  const KktSolution s = solve_power_constrained(scalar(0.0), scalar(1.0), 0.25, cfg);
  EXPECT_NEAR(s.multiplier, 2.0, 2.0 * 1e-10);
  EXPECT_NEAR(std::abs(s.x(0, 0) - 0.5), 0.0, 1e-10);
}

TEST(Kkt, SharedBudgetBinds) {
  Rng rng(54);
  const CMat a = random_pd(4, rng) * 1e-3;
  const std::vector<CMat> rhs{complex_gaussian(4, 2, 1.0, rng), complex_gaussian(4, 2, 1.0, rng)};
  const SharedKktSolution s = solve_shared_power(a, rhs, 1.0);
  double total = 0.0;
  for (const auto& x : s.x) total += x.squaredNorm();
  EXPECT_GT(s.multiplier, 0.0);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Precoders, ZeroReceiversGiveZeroPrecoders) {
  const Instance in = random_instance(55);
  WmmseAux aux = update_receivers(in.eff, in.init, in.cfg);
  update_weights(in.eff, in.init, aux, in.cfg);
  for (auto& u : aux.u_ul) u.setZero();
  for (auto& u : aux.u_dl) u.setZero();
  const UlPrecoderUpdate up = update_ul_precoders(in.eff, aux, in.cfg);
  const DlPrecoderUpdate dp = update_dl_precoders(in.eff, aux, in.cfg);
  for (std::size_t k = 0; k < up.p.size(); ++k) {
    EXPECT_EQ(up.p[k].norm(), 0.0);
    EXPECT_EQ(up.lambda[k], 0.0);
  }
  for (const auto& f : dp.f) EXPECT_EQ(f.norm(), 0.0);
  EXPECT_EQ(dp.mu, 0.0);
}

TEST(Precoders, ScalarInteriorDownlink) {
  // a = beta |h|^2 |u|^2 w = 1, rhs = beta h* u w = 1, budget large: F = 1, mu = 0.
  ScenarioConfig cfg = scalar_scenario(0, 1);
  cfg.ap_power = 100.0;
  WmmseAux aux;
  aux.u_dl = {scalar(1.0)};
  aux.w_dl = {scalar(1.0)};
  const DlPrecoderUpdate dp = update_dl_precoders(scalar_eff({}, {1.0}), aux, cfg);
  EXPECT_EQ(dp.mu, 0.0);
  EXPECT_NEAR(std::abs(dp.f[0](0, 0) - 1.0), 0.0, 1e-14);
}

TEST(Bcd, MonotoneFeasibleAndComplementary) {
  for (std::uint64_t seed : {61, 62, 63, 64}) {
    const Instance in = random_instance(seed);
    BcdConfig cfg;
    cfg.record_blocks = true;
    const BcdResult r = run_bcd(in.eff, in.init, in.cfg, cfg);
    double prev = r.trace.initial_objective;
    for (double o : r.trace.objective) {
      EXPECT_LE(o, prev + 1e-9);
      prev = o;
    }
    for (std::size_t i = 1; i < r.trace.block_objective.size(); ++i)
      EXPECT_LE(r.trace.block_objective[i], r.trace.block_objective[i - 1] + 1e-9);
    for (std::size_t i = 1; i < r.trace.sum_rate.size(); ++i)
      EXPECT_GE(r.trace.sum_rate[i], r.trace.sum_rate[i - 1] - 1e-6);
    const std::vector<double> pu = ul_powers(r.bf);
    for (int k = 0; k < in.cfg.num_ul; ++k) {
      EXPECT_LE(pu[k], in.cfg.ul_power[k] * (1.0 + 1e-9));
      EXPECT_LE(std::min(r.lambda[k], (in.cfg.ul_power[k] - pu[k]) / in.cfg.ul_power[k]), 1e-6);
    }
    EXPECT_LE(dl_power(r.bf), in.cfg.ap_power * (1.0 + 1e-9));
    EXPECT_LE(std::min(r.mu, (in.cfg.ap_power - dl_power(r.bf)) / in.cfg.ap_power), 1e-6);
  }
}

TEST(Bcd, RestartNearFixedPointStopsQuickly) {
  const Instance in = random_instance(65);
  BcdConfig cfg;
  cfg.tolerance = 1e-7;
  cfg.max_iterations = 20000;
  const BcdResult first = run_bcd(in.eff, in.init, in.cfg, cfg);
  ASSERT_TRUE(first.trace.converged);
  BcdConfig loose;
  const BcdResult again = run_bcd(in.eff, first.bf, in.cfg, loose);
  EXPECT_LE(again.trace.iterations, 2);
  EXPECT_NEAR(again.trace.objective.back(), first.trace.objective.back(), loose.tolerance);
}

TEST(Bcd, FixedPointConsistency) {
  const Instance in = random_instance(66);
  BcdConfig cfg;
  cfg.tolerance = 1e-7;
  cfg.max_iterations = 20000;
  const BcdResult r = run_bcd(in.eff, in.init, in.cfg, cfg);
  WmmseAux aux = update_receivers(in.eff, r.bf, in.cfg);
  update_weights(in.eff, r.bf, aux, in.cfg);
  for (int k = 0; k < in.cfg.num_ul; ++k) {
    EXPECT_LE((aux.u_ul[k] - r.aux.u_ul[k]).norm(), 1e-3 * aux.u_ul[k].norm());
    EXPECT_LE((aux.w_ul[k] - r.aux.w_ul[k]).norm(), 1e-3 * aux.w_ul[k].norm());
  }
}

TEST(Bcd, SingleLinkReachesMatchedFilterRate) {
  ScenarioConfig cfg = scalar_scenario(1, 0);
  cfg.nr = 4;
  cfg.ul_power = {2.0};
  EffectiveCsi eff;
  Rng rng(67);
  eff.h_ul = {complex_gaussian(4, 1, 1.0, rng)};
  eff.h_si = CMat::Zero(4, 1);
  BeamformerSet init;
  init.p = {scalar(0.3)};
  BcdConfig bcd;
  bcd.tolerance = 1e-12;
  bcd.max_iterations = 1000;
  const BcdResult r = run_bcd(eff, init, cfg, bcd);
  const double expect = std::log2(1.0 + 2.0 * eff.h_ul[0].squaredNorm());
  EXPECT_NEAR(weighted_sum_rate(eff, r.bf, cfg), expect, 1e-6);
}

TEST(Bcd, InfeasibleInitIsProjected) {
  const Instance in = random_instance(68);
  BeamformerSet big = in.init;
  for (auto& p : big.p) p *= 10.0;
  const BeamformerSet proj = project_to_budgets(big, in.cfg);
  for (int k = 0; k < in.cfg.num_ul; ++k) EXPECT_LE(ul_powers(proj)[k], in.cfg.ul_power[k] * (1.0 + 1e-12));
  BcdConfig one;
  one.max_iterations = 1;
  EXPECT_NO_THROW(run_bcd(in.eff, big, in.cfg, one));
}

TEST(Bcd, ConfigValidation) {
  BcdConfig c;
  c.max_iterations = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = BcdConfig{};
  c.tolerance = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Bcd, TraceCsv) {
  BcdTrace t;
  t.objective = {3.0, 2.0};
  t.sum_rate = {1.0, 1.5};
  std::ostringstream os;
  write_bcd_trace_csv(os, t);
  EXPECT_EQ(os.str().substr(0, 29), "iteration,objective,sum_rate\n");
}
