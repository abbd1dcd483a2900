#include <gtest/gtest.h>

#include <sstream>

#include "irsfd/channels.hpp"
#include "irsfd/csi_io.hpp"
#include "irsfd/scenario_io.hpp"

using namespace irsfd;

TEST(ScenarioJson, RoundTrip) {
  for (const ScenarioConfig& cfg : {desk_scenario(), full_scenario(), make_scenario(3, 1, 6, 2, 1, 12)}) {
    const std::string text = scenario_to_json(cfg);
    const ScenarioConfig back = parse_scenario(text);
    EXPECT_EQ(scenario_to_json(back), text);
    EXPECT_EQ(back.num_ul, cfg.num_ul);
    EXPECT_EQ(back.irs_elements, cfg.irs_elements);
    EXPECT_NEAR(back.ap_power, cfg.ap_power, 1e-12 * cfg.ap_power);
    EXPECT_NEAR(back.ul_noise, cfg.ul_noise, 1e-12 * cfg.ul_noise);
  }
}

TEST(ScenarioJson, DefaultsAndOverrides) {
  const ScenarioConfig d = parse_scenario("{}");
  EXPECT_EQ(scenario_to_json(d), scenario_to_json(desk_scenario()));
  const ScenarioConfig p = parse_scenario(R"({"base": "full", "irs": {"elements": 40}})");
  EXPECT_EQ(p.irs_elements, 40);
  EXPECT_EQ(p.nt, full_scenario().nt);
  EXPECT_THROW(parse_scenario(R"({"base": "moon"})"), InvalidArgument);
  EXPECT_THROW(parse_scenario("[1, 2"), InvalidArgument);
  EXPECT_THROW(parse_scenario(R"({"users": {"ul": 2, "ul_antennas": [1]}})"), InvalidArgument);
}

TEST(CsiText, ExactRoundTrip) {
  const ScenarioConfig cfg = desk_scenario();
  Rng rng(3);
  const FullCsi csi = sample_full_csi(cfg, rng);
  std::stringstream ss;
  write_csi(ss, csi);
  const FullCsi back = read_csi(ss);
  const auto a = named_matrices(csi), b = named_matrices(back);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(a[i].second, b[i].second) << a[i].first;
  }
  EXPECT_NO_THROW(check_dimensions(back, cfg));
}

TEST(CsiText, NamesAndHeader) {
  const ScenarioConfig cfg = desk_scenario();
  Rng rng(4);
  const auto mats = named_matrices(sample_full_csi(cfg, rng));
  EXPECT_EQ(mats.front().first, "H_U[0]");
  EXPECT_EQ(mats.back().first, "H_tilde");
  std::stringstream ss;
  write_matrices(ss, {{"A", CMat::Identity(2, 2)}});
  EXPECT_EQ(ss.str().rfind("IRSFD-CSI 1\nmatrices 1\nA 2 2\n", 0), 0u);
}

TEST(CsiText, RejectsMalformed) {
  std::stringstream bad1("NOT-CSI 1\n");
  EXPECT_THROW(read_matrices(bad1), InvalidArgument);
  std::stringstream bad2("IRSFD-CSI 1\nmatrices 1\nA 2 2\n1 0 0 0\n");
  EXPECT_THROW(read_matrices(bad2), InvalidArgument);
  std::stringstream wrong("IRSFD-CSI 1\nmatrices 1\nA 1 1\n1 0\n");
  EXPECT_THROW(read_csi(wrong), InvalidArgument);
}
