#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "irsfd/experiment.hpp"
#include "irsfd/overhead.hpp"
#include "irsfd/schemes.hpp"

using namespace irsfd;

namespace {

SchemeSettings quick_settings() {
  SchemeSettings s;
  s.pool_size = 4;
  s.test_slots = 2;
  s.ssca.max_iterations = 3;
  s.full_csi_outer_iterations = 3;
  return s;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST(Overhead, FrozenCounts) {
  OverheadParams p;
  const std::pair<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> cases[] = {
      {0, {46080000, 46080000}},
      {100, {790080000, 48312000}},
      {200, {1534080000, 50544000}},
      {400, {3022080000, 55008000}},
  };
  for (const auto& [t, expect] : cases) {
    p.t = t;
    const Overhead o = csi_overhead(p);
    EXPECT_EQ(o.single_timescale, expect.first) << "T=" << t;
    EXPECT_EQ(o.mixed_timescale, expect.second) << "T=" << t;
  }
}

TEST(Overhead, RejectsZeroAndOverflow) {
  OverheadParams p;
  p.k = 0;
  EXPECT_THROW(csi_overhead(p), InvalidArgument);
  p = OverheadParams{};
  p.ts = std::numeric_limits<std::uint64_t>::max() / 2;
  EXPECT_THROW(csi_overhead(p), NumericalError);
}

TEST(Overhead, MixedDelayScalesWithRatio) {
  ScenarioConfig cfg = desk_scenario();
  SchemeSettings s;
  const double tau = 2e-3;
  const double d = mixed_timescale_delay(cfg, s, tau);
  EXPECT_GT(d, 0.0);
  EXPECT_LT(d, tau);
  EXPECT_EQ(mixed_timescale_delay(cfg, s, 0.0), 0.0);
}

TEST(Schemes, NamesRoundTrip) {
  for (Scheme s : all_schemes()) EXPECT_EQ(parse_scheme(scheme_name(s)), s);
  EXPECT_THROW(parse_scheme("bogus"), InvalidArgument);
  EXPECT_EQ(all_schemes().size(), 6u);
}

TEST(Schemes, TrialIsDeterministic) {
  const ScenarioConfig cfg = desk_scenario();
  const SchemeSettings s = quick_settings();
  const Trial a = make_trial(cfg, 5, s), b = make_trial(cfg, 5, s), c = make_trial(cfg, 6, s);
  ASSERT_EQ(a.pool.size(), 4u);
  ASSERT_EQ(a.slots.size(), 2u);
  EXPECT_EQ(a.pool[0].v_ul, b.pool[0].v_ul);
  EXPECT_EQ(a.slots[1].actual.h_si, b.slots[1].actual.h_si);
  EXPECT_NE(a.pool[0].v_ul, c.pool[0].v_ul);
  const SchemeResult r1 = run_random_irs(a, s), r2 = run_random_irs(b, s);
  EXPECT_EQ(r1.total(), r2.total());
}

TEST(Schemes, IrsBaselinesCoincideWithoutIrsLinks) {
  const ScenarioConfig cfg = desk_scenario();
  const SchemeSettings s = quick_settings();
  Trial t = make_trial(cfg, 7, s);
  for (auto& c : t.pool) c = without_irs(c);
  for (auto& slot : t.slots) {
    slot.actual = without_irs(slot.actual);
    slot.observed_single = without_irs(slot.observed_single);
    slot.observed_mixed = without_irs(slot.observed_mixed);
  }
  const SchemeResult none = run_no_irs(t, s);
  const SchemeResult rnd = run_random_irs(t, s);
  EXPECT_NEAR(none.total(), rnd.total(), 1e-9 * none.total());
  EXPECT_EQ(none.theta.size(), 0);
}

TEST(Schemes, HalfDuplexSplitsTime) {
  const ScenarioConfig cfg = desk_scenario();
  const SchemeSettings s = quick_settings();
  const Trial t = make_trial(cfg, 8, s);
  const SchemeResult hd = run_hd(t, s);
  EXPECT_GT(hd.ul_rate, 0.0);
  EXPECT_GT(hd.dl_rate, 0.0);
  // Half of a single-direction rate can never exceed that direction's
  // interference-free rate, which the FD baseline at the same phases bounds.
  EXPECT_LT(hd.total(), 2.0 * run_random_irs(t, s).total() + 10.0);
}

TEST(Experiment, KindNamesRoundTrip) {
  for (auto k : {ExperimentKind::Convergence, ExperimentKind::SweepT, ExperimentKind::SweepPower,
                 ExperimentKind::SweepSi, ExperimentKind::SweepQuantization, ExperimentKind::SweepDelay,
                 ExperimentKind::SweepError, ExperimentKind::Overhead, ExperimentKind::SampleCount,
                 ExperimentKind::LayerCount, ExperimentKind::AntennaSweep, ExperimentKind::RandomLocations}) {
    EXPECT_EQ(parse_experiment_kind(experiment_name(k)), k);
    EXPECT_FALSE(default_sweep_values(k).empty());
  }
  EXPECT_THROW(parse_experiment_kind("sweep-nothing"), InvalidArgument);
}

TEST(Experiment, ParseKeys) {
  const ExperimentSpec spec = parse_experiment(R"({
    "kind": "sweep-power", "schemes": ["no-irs", "random-irs"], "seeds": [3, 4],
    "values": [20, 30], "threads": 2, "model_seed": 77,
    "settings": {"pool_size": 12, "bcd": {"max_iterations": 40}, "train": {"layers": 3}},
    "scenario": {"irs": {"elements": 8}}
  })");
  EXPECT_EQ(spec.kind, ExperimentKind::SweepPower);
  ASSERT_EQ(spec.schemes.size(), 2u);
  EXPECT_EQ(spec.schemes[1], Scheme::RandomIrs);
  EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(spec.values, (std::vector<double>{20, 30}));
  EXPECT_EQ(spec.threads, 2);
  EXPECT_EQ(spec.model_seed, 77u);
  EXPECT_EQ(spec.settings.pool_size, 12);
  EXPECT_EQ(spec.settings.bcd.max_iterations, 40);
  EXPECT_EQ(spec.settings.train.layers, 3);
  EXPECT_EQ(spec.scenario.irs_elements, 8);
  EXPECT_THROW(parse_experiment("{not json"), InvalidArgument);
  EXPECT_THROW(parse_experiment(R"({"kind": 5})"), InvalidArgument);
}

TEST(Experiment, ApplySweepValue) {
  ScenarioConfig cfg = desk_scenario();
  SchemeSettings s;
  apply_sweep_value(ExperimentKind::SweepPower, 30.0, cfg, s);
  EXPECT_NEAR(cfg.ap_power, 1.0, 1e-12);
  apply_sweep_value(ExperimentKind::SweepT, 32.0, cfg, s);
  EXPECT_EQ(cfg.irs_elements, 32);
  apply_sweep_value(ExperimentKind::SweepSi, -60.0, cfg, s);
  EXPECT_NEAR(cfg.si_power, 1e-6, 1e-18);
  apply_sweep_value(ExperimentKind::SweepQuantization, 2.0, cfg, s);
  EXPECT_EQ(s.impairments.quantization_bits, 2);
  EXPECT_THROW(apply_sweep_value(ExperimentKind::SweepT, 2.5, cfg, s), InvalidArgument);
}

TEST(Experiment, OverheadReport) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Overhead;
  const ExperimentReport rep = run_experiment(spec);
  ASSERT_TRUE(rep.files.count("overhead.csv"));
  const std::string& csv = rep.files.at("overhead.csv");
  EXPECT_EQ(count_lines(csv), 5);
  EXPECT_NE(csv.find("3022080000"), std::string::npos);
  EXPECT_EQ(rep.failures, 0);
}

TEST(Experiment, SweepIsDeterministicAcrossThreads) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::SweepPower;
  spec.schemes = {Scheme::NoIrs, Scheme::RandomIrs};
  spec.seeds = {1, 2};
  spec.values = {20.0, 30.0};
  spec.settings = quick_settings();
  const ExperimentReport a = run_experiment(spec);
  spec.threads = 3;
  const ExperimentReport b = run_experiment(spec);
  ASSERT_TRUE(a.files.count("results.csv"));
  EXPECT_EQ(a.files.at("results.csv"), b.files.at("results.csv"));
  EXPECT_EQ(count_lines(a.files.at("results.csv")), 1 + 2 * 2 * 2);
  EXPECT_EQ(a.files.at("results.csv").rfind(
                "experiment,scheme,parameter,value,delay_correlation,seed,ul_rate,dl_rate,total_rate,status\n", 0),
            0u);
  EXPECT_TRUE(a.files.count("timing.csv"));
  EXPECT_EQ(a.failures, 0);
}

TEST(Experiment, ValidationRejectsEmptySchemes) {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::SweepT;
  spec.seeds = {1};
  spec.schemes.clear();
  EXPECT_THROW(spec.validate(), InvalidArgument);
}
