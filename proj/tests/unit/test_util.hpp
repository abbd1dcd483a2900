#pragma once

#include "irsfd/channels.hpp"
#include "irsfd/types.hpp"

namespace irsfd::testing {

/// Scenario with single-antenna, single-stream users and single-antenna AP;
/// unit noise, budgets and weights.
inline ScenarioConfig scalar_scenario(int k, int l) {
  ScenarioConfig cfg = make_scenario(std::max(k, 1), std::max(l, 1), 1, 1, 1, 1);
  cfg.num_ul = k;
  cfg.num_dl = l;
  cfg.ul_antennas.assign(k, 1);
  cfg.dl_antennas.assign(l, 1);
  cfg.ul_streams.assign(k, 1);
  cfg.dl_streams.assign(l, 1);
  cfg.ul_positions.resize(k);
  cfg.dl_positions.resize(l);
  cfg.ul_power.assign(k, 1.0);
  cfg.ul_weights.assign(k, 1.0);
  cfg.dl_noise.assign(l, 1.0);
  cfg.dl_weights.assign(l, 1.0);
  cfg.ul_noise = 1.0;
  cfg.ap_power = 1.0;
  return cfg;
}

inline CMat scalar(Complex v) { return CMat::Constant(1, 1, v); }

/// Effective channels of a scalar scenario; SI and cross links default to zero.
inline EffectiveCsi scalar_eff(const std::vector<Complex>& h_ul, const std::vector<Complex>& h_dl) {
  EffectiveCsi eff;
  for (Complex h : h_ul) eff.h_ul.push_back(scalar(h));
  for (Complex h : h_dl) eff.h_dl.push_back(scalar(h));
  eff.j.assign(h_ul.size(), std::vector<CMat>(h_dl.size(), scalar(0.0)));
  eff.h_si = scalar(0.0);
  return eff;
}

/// Small random instance of the desk geometry with the given sizes.
inline ScenarioConfig small_scenario(int n = 4, int t = 8) { return make_scenario(2, 2, n, 2, 2, t); }

}  // namespace irsfd::testing
