#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irsfd/channels.hpp"
#include "irsfd/ssca.hpp"
#include "irsfd/types.hpp"
#include "irsfd/unfolding.hpp"
#include "irsfd/wmmse.hpp"

namespace irsfd {

enum class Scheme { Ssca, Unfolding, FullCsi, RandomIrs, NoIrs, Hd };

std::string scheme_name(Scheme s);
/// Accepts ssca, unfolding, full-csi, random-irs, no-irs, hd.
Scheme parse_scheme(const std::string& name);
const std::vector<Scheme>& all_schemes();

/// CSI imperfections seen by the optimisers. Rates are always evaluated on
/// the true channel of the slot.
struct Impairments {
  int quantization_bits = 0;  // 0 keeps continuous phases
  double delay = 0.0;         // seconds, for the single-timescale scheme
  double csi_error = 0.0;     // relative estimation error power
};

struct SchemeSettings {
  int pool_size = 30;   // full-CSI samples for the long-term design
  int test_slots = 10;  // short-term slots evaluated per trial
  SscaConfig ssca{};
  BcdConfig bcd{};
  TrainConfig train{};
  UnfoldingConfig unfolding{};
  int full_csi_outer_iterations = 30;
  Impairments impairments{};
  /// Quantisation bits used for the overhead ratio that scales the delay of
  /// the mixed-timescale schemes.
  std::uint64_t overhead_bits = 8;
  std::uint64_t slots_per_block = 10000;
};

/// One channel slot: what each class of scheme observes and the truth.
struct Slot {
  FullCsi actual;
  FullCsi observed_single;  // seen by the full-CSI scheme
  FullCsi observed_mixed;   // seen by the mixed-timescale schemes and baselines
};

/// Everything random about one seed: the long-term pool and the test slots.
struct Trial {
  ScenarioConfig cfg;
  std::uint64_t seed = 0;
  std::vector<FullCsi> pool;
  std::vector<Slot> slots;
  double mixed_delay = 0.0;  // delay applied to the mixed-timescale observations
};

Trial make_trial(const ScenarioConfig& cfg, std::uint64_t seed, const SchemeSettings& s);

/// Delay of the mixed-timescale schemes, tau * Q_m / Q_s for this scenario.
double mixed_timescale_delay(const ScenarioConfig& cfg, const SchemeSettings& s, double tau);

struct SchemeResult {
  double ul_rate = 0.0;  // weighted, averaged over the slots
  double dl_rate = 0.0;
  double total() const { return ul_rate + dl_rate; }
  PhaseVector theta;  // deployed phases (after quantisation); empty for no-irs
};

/// A trained network shared by all trials of one scenario.
struct UnfoldingModel {
  LpbnParams lpbn;
  SabnParams sabn;
};

/// Phases drawn for the random-IRS, HD and full-CSI starting points.
PhaseVector trial_random_theta(const Trial& trial);

SchemeResult run_random_irs(const Trial& trial, const SchemeSettings& s);
SchemeResult run_no_irs(const Trial& trial, const SchemeSettings& s);
/// Equal time split: half of the UL-only rate plus half of the DL-only rate.
SchemeResult run_hd(const Trial& trial, const SchemeSettings& s);
/// Long-term phases from run_ssca on the trial pool, unless `theta` is given.
SchemeResult run_ssca_scheme(const Trial& trial, const SchemeSettings& s, const PhaseVector* theta = nullptr);
/// Network trained on the trial pool, unless `model` is given.
SchemeResult run_unfolding(const Trial& trial, const SchemeSettings& s, const UnfoldingModel* model = nullptr);
/// Per-slot joint design from that slot's full CSI: alternating one BCD
/// iteration and one backtracking gradient step on theta, then a converged
/// BCD at the final phases. With quantisation, the precoders designed for
/// the continuous phases are kept.
SchemeResult run_full_csi(const Trial& trial, const SchemeSettings& s);

SchemeResult run_scheme(Scheme scheme, const Trial& trial, const SchemeSettings& s,
                        const UnfoldingModel* model = nullptr, const PhaseVector* ssca_theta = nullptr);

/// Mean converged-BCD weighted sum-rate over `samples` at fixed phases,
/// each solve started from a seeded random point.
double average_bcd_rate(const std::vector<FullCsi>& samples, const PhaseVector& theta, const ScenarioConfig& cfg,
                        const BcdConfig& bcd, std::uint64_t seed);

/// Draws `n` independent full-CSI samples.
std::vector<FullCsi> draw_samples(const ScenarioConfig& cfg, int n, std::uint64_t seed);

/// Trains a network for a scenario on its own pool drawn from `seed`. The
/// loss trace is copied to `trace` when given.
UnfoldingModel train_model(const ScenarioConfig& cfg, const SchemeSettings& s, std::uint64_t seed,
                           const PhaseVector* theta0 = nullptr, TrainTrace* trace = nullptr);

}  // namespace irsfd
