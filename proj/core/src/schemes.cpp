#include "irsfd/schemes.hpp"

#include <algorithm>
#include <cmath>

#include "irsfd/overhead.hpp"
#include "irsfd/system.hpp"

namespace irsfd {

namespace {

// Stream indices for derive_seed; one per independent random quantity.
enum Stream : std::uint64_t {
  kPoolStream = 11,
  kSlotStream = 12,
  kThetaStream = 13,
  kInitStream = 14,
  kSscaStream = 15,
  kTrainStream = 16,
  kErrorStream = 17,
  kDelayStream = 18,
};

struct SlotRates {
  double ul = 0.0;
  double dl = 0.0;
};

SchemeResult average(const std::vector<SlotRates>& rates, PhaseVector theta) {
  SchemeResult r;
  for (const auto& s : rates) {
    r.ul_rate += s.ul;
    r.dl_rate += s.dl;
  }
  if (!rates.empty()) {
    r.ul_rate /= static_cast<double>(rates.size());
    r.dl_rate /= static_cast<double>(rates.size());
  }
  r.theta = std::move(theta);
  return r;
}

SlotRates rates_on(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg) {
  const RateReport rep = evaluate_rates(eff, bf, cfg);
  return {rep.ul_weighted, rep.dl_weighted};
}

PhaseVector deploy(const PhaseVector& theta, const SchemeSettings& s) {
  const int bits = s.impairments.quantization_bits;
  return bits > 0 ? quantize_phases(theta, bits) : theta;
}

BeamformerSet slot_init(const Trial& trial, std::size_t slot, const ScenarioConfig& cfg) {
  Rng rng(derive_seed(trial.seed, kInitStream, slot));
  return random_feasible_init(cfg, rng);
}

// Short-term BCD on the mixed-timescale observation at fixed phases,
// evaluated on the true channel.
SchemeResult short_term_at(const Trial& trial, const SchemeSettings& s, const PhaseVector& theta) {
  std::vector<SlotRates> rates;
  rates.reserve(trial.slots.size());
  for (std::size_t i = 0; i < trial.slots.size(); ++i) {
    const Slot& slot = trial.slots[i];
    const EffectiveCsi observed = effective_channels(slot.observed_mixed, theta);
    const BcdResult res = run_bcd(observed, slot_init(trial, i, trial.cfg), trial.cfg, s.bcd);
    rates.push_back(rates_on(effective_channels(slot.actual, theta), res.bf, trial.cfg));
  }
  return average(rates, theta);
}

}  // namespace

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Ssca: return "ssca";
    case Scheme::Unfolding: return "unfolding";
    case Scheme::FullCsi: return "full-csi";
    case Scheme::RandomIrs: return "random-irs";
    case Scheme::NoIrs: return "no-irs";
    case Scheme::Hd: return "hd";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : all_schemes())
    if (scheme_name(s) == name) return s;
  throw InvalidArgument("unknown scheme '" + name + "'");
}

const std::vector<Scheme>& all_schemes() {
  static const std::vector<Scheme> list{Scheme::Ssca,      Scheme::Unfolding, Scheme::FullCsi,
                                        Scheme::RandomIrs, Scheme::NoIrs,     Scheme::Hd};
  return list;
}

std::vector<FullCsi> draw_samples(const ScenarioConfig& cfg, int n, std::uint64_t seed) {
  if (n < 0) throw InvalidArgument("draw_samples: negative count");
  Rng rng(seed);
  std::vector<FullCsi> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(sample_full_csi(cfg, rng));
  return out;
}

double mixed_timescale_delay(const ScenarioConfig& cfg, const SchemeSettings& s, double tau) {
  if (tau <= 0.0) return 0.0;
  OverheadParams p;
  p.q = s.overhead_bits;
  p.ts = s.slots_per_block;
  p.as = static_cast<std::uint64_t>(s.pool_size);
  p.k = static_cast<std::uint64_t>(cfg.num_ul);
  p.l = static_cast<std::uint64_t>(cfg.num_dl);
  p.n_u = static_cast<std::uint64_t>(cfg.nr);
  p.n_d = static_cast<std::uint64_t>(cfg.nt);
  // The count assumes equal antenna numbers; use the largest per direction.
  p.m_u = static_cast<std::uint64_t>(*std::max_element(cfg.ul_antennas.begin(), cfg.ul_antennas.end()));
  p.m_d = static_cast<std::uint64_t>(*std::max_element(cfg.dl_antennas.begin(), cfg.dl_antennas.end()));
  p.t = static_cast<std::uint64_t>(cfg.irs_elements);
  const Overhead o = csi_overhead(p);
  return tau * static_cast<double>(o.mixed_timescale) / static_cast<double>(o.single_timescale);
}

Trial make_trial(const ScenarioConfig& cfg, std::uint64_t seed, const SchemeSettings& s) {
  cfg.validate();
  if (s.pool_size < 1 || s.test_slots < 1) throw InvalidArgument("make_trial: pool_size and test_slots must be >= 1");
  const Impairments& imp = s.impairments;
  if (imp.delay < 0.0 || imp.csi_error < 0.0 || imp.quantization_bits < 0)
    throw InvalidArgument("make_trial: impairments must be non-negative");

  Trial trial;
  trial.cfg = cfg;
  trial.seed = seed;
  trial.pool = draw_samples(cfg, s.pool_size, derive_seed(seed, kPoolStream));
  trial.mixed_delay = mixed_timescale_delay(cfg, s, imp.delay);

  Rng slot_rng(derive_seed(seed, kSlotStream));
  Rng delay_rng(derive_seed(seed, kDelayStream));
  Rng error_rng(derive_seed(seed, kErrorStream));
  if (imp.csi_error > 0.0)
    for (auto& sample : trial.pool) sample = perturb_csi(sample, imp.csi_error, error_rng);

  for (int i = 0; i < s.test_slots; ++i) {
    Slot slot;
    slot.actual = sample_full_csi(cfg, slot_rng);
    slot.observed_single = slot.actual;
    slot.observed_mixed = slot.actual;
    // The ageing model is time-reversible, so the stale observation is the
    // true channel aged by the feedback delay with an independent innovation.
    if (imp.delay > 0.0) {
      slot.observed_single = delayed_csi(sample_full_csi(cfg, delay_rng), slot.actual, imp.delay, cfg);
      slot.observed_mixed = delayed_csi(sample_full_csi(cfg, delay_rng), slot.actual, trial.mixed_delay, cfg);
    }
    if (imp.csi_error > 0.0) {
      slot.observed_single = perturb_csi(slot.observed_single, imp.csi_error, error_rng);
      slot.observed_mixed = perturb_csi(slot.observed_mixed, imp.csi_error, error_rng);
    }
    trial.slots.push_back(std::move(slot));
  }
  return trial;
}

PhaseVector trial_random_theta(const Trial& trial) {
  Rng rng(derive_seed(trial.seed, kThetaStream));
  return random_phases(trial.cfg.irs_elements, rng);
}

SchemeResult run_random_irs(const Trial& trial, const SchemeSettings& s) {
  return short_term_at(trial, s, deploy(trial_random_theta(trial), s));
}

SchemeResult run_no_irs(const Trial& trial, const SchemeSettings& s) {
  const PhaseVector zero = PhaseVector::zeros(trial.cfg.irs_elements);
  std::vector<SlotRates> rates;
  for (std::size_t i = 0; i < trial.slots.size(); ++i) {
    const Slot& slot = trial.slots[i];
    const EffectiveCsi observed = effective_channels(without_irs(slot.observed_mixed), zero);
    const BcdResult res = run_bcd(observed, slot_init(trial, i, trial.cfg), trial.cfg, s.bcd);
    rates.push_back(rates_on(effective_channels(without_irs(slot.actual), zero), res.bf, trial.cfg));
  }
  return average(rates, PhaseVector{});
}

SchemeResult run_hd(const Trial& trial, const SchemeSettings& s) {
  const PhaseVector theta = deploy(trial_random_theta(trial), s);
  const ScenarioConfig ul_cfg = uplink_only(trial.cfg);
  const ScenarioConfig dl_cfg = downlink_only(trial.cfg);
  std::vector<SlotRates> rates;
  for (std::size_t i = 0; i < trial.slots.size(); ++i) {
    const Slot& slot = trial.slots[i];
    const EffectiveCsi observed = effective_channels(slot.observed_mixed, theta);
    const EffectiveCsi actual = effective_channels(slot.actual, theta);
    SlotRates r;
    if (ul_cfg.num_ul > 0) {
      const BcdResult ul = run_bcd(uplink_only(observed), slot_init(trial, i, ul_cfg), ul_cfg, s.bcd);
      r.ul = 0.5 * evaluate_rates(uplink_only(actual), ul.bf, ul_cfg).ul_weighted;
    }
    if (dl_cfg.num_dl > 0) {
      const BcdResult dl = run_bcd(downlink_only(observed), slot_init(trial, i, dl_cfg), dl_cfg, s.bcd);
      r.dl = 0.5 * evaluate_rates(downlink_only(actual), dl.bf, dl_cfg).dl_weighted;
    }
    rates.push_back(r);
  }
  return average(rates, theta);
}

SchemeResult run_ssca_scheme(const Trial& trial, const SchemeSettings& s, const PhaseVector* theta) {
  PhaseVector designed;
  if (theta != nullptr) {
    designed = *theta;
  } else {
    SscaConfig cfg = s.ssca;
    cfg.seed = derive_seed(trial.seed, kSscaStream);
    designed = run_ssca(trial.pool, trial.cfg, cfg, s.bcd).theta;
  }
  return short_term_at(trial, s, deploy(designed, s));
}

UnfoldingModel train_model(const ScenarioConfig& cfg, const SchemeSettings& s, std::uint64_t seed,
                           const PhaseVector* theta0, TrainTrace* trace) {
  const std::vector<FullCsi> pool = draw_samples(cfg, s.pool_size, derive_seed(seed, kPoolStream));
  TrainConfig tcfg = s.train;
  tcfg.seed = derive_seed(seed, kTrainStream);
  TrainResult res;
  if (theta0 != nullptr) {
    Rng rng(derive_seed(tcfg.seed, 0));
    auto start = init_params(cfg, tcfg.layers, rng);
    start.first.theta = *theta0;
    res = train(pool, tcfg, cfg, {}, &start, s.unfolding);
  } else {
    res = train(pool, tcfg, cfg, {}, nullptr, s.unfolding);
  }
  if (trace) *trace = res.trace;
  return {std::move(res.lpbn), std::move(res.sabn)};
}

SchemeResult run_unfolding(const Trial& trial, const SchemeSettings& s, const UnfoldingModel* model) {
  UnfoldingModel local;
  if (model == nullptr) {
    TrainConfig tcfg = s.train;
    tcfg.seed = derive_seed(trial.seed, kTrainStream);
    TrainResult res = train(trial.pool, tcfg, trial.cfg, {}, nullptr, s.unfolding);
    local = {std::move(res.lpbn), std::move(res.sabn)};
    model = &local;
  }
  LpbnParams deployed = model->lpbn;
  deployed.theta = deploy(model->lpbn.theta, s);
  std::vector<SlotRates> rates;
  for (const Slot& slot : trial.slots) {
    const SabnOutput out = network_forward(slot.observed_mixed, deployed, model->sabn, trial.cfg, s.unfolding);
    rates.push_back(rates_on(effective_channels(slot.actual, deployed.theta), out.bf, trial.cfg));
  }
  return average(rates, deployed.theta);
}

SchemeResult run_full_csi(const Trial& trial, const SchemeSettings& s) {
  if (s.full_csi_outer_iterations < 0) throw InvalidArgument("run_full_csi: negative iteration count");
  const ScenarioConfig& cfg = trial.cfg;
  BcdConfig one = s.bcd;
  one.max_iterations = 1;
  one.record_sum_rate = false;
  const PhaseVector start = trial_random_theta(trial);

  std::vector<SlotRates> rates;
  PhaseVector last;
  for (std::size_t i = 0; i < trial.slots.size(); ++i) {
    const Slot& slot = trial.slots[i];
    const FullCsi& csi = slot.observed_single;
    PhaseVector theta = start;
    BeamformerSet bf = slot_init(trial, i, cfg);
    double step = -1.0;
    for (int it = 0; it < s.full_csi_outer_iterations; ++it) {
      bf = run_bcd(effective_channels(csi, theta), bf, cfg, one).bf;
      const RVec grad = rate_gradient_theta(theta, bf, csi, cfg);
      const double gmax = grad.cwiseAbs().maxCoeff();
      if (!(gmax > 0.0) || !std::isfinite(gmax)) break;
      // Initial trial step moves the most sensitive phase by half a radian;
      // afterwards the last accepted step is doubled.
      step = step < 0.0 ? 0.5 / gmax : 2.0 * step;
      const double g0 = weighted_sum_rate(theta, bf, csi, cfg);
      bool accepted = false;
      for (int ls = 0; ls < 30 && !accepted; ++ls, step *= 0.5) {
        PhaseVector cand(theta.theta + step * grad);
        if (weighted_sum_rate(cand, bf, csi, cfg) > g0) {
          theta = std::move(cand);
          accepted = true;
          break;
        }
      }
      if (!accepted) step = -1.0;
    }
    bf = run_bcd(effective_channels(csi, theta), bf, cfg, s.bcd).bf;
    const PhaseVector deployed = deploy(theta, s);
    rates.push_back(rates_on(effective_channels(slot.actual, deployed), bf, cfg));
    last = deployed;
  }
  return average(rates, last);
}

SchemeResult run_scheme(Scheme scheme, const Trial& trial, const SchemeSettings& s, const UnfoldingModel* model,
                        const PhaseVector* ssca_theta) {
  switch (scheme) {
    case Scheme::Ssca: return run_ssca_scheme(trial, s, ssca_theta);
    case Scheme::Unfolding: return run_unfolding(trial, s, model);
    case Scheme::FullCsi: return run_full_csi(trial, s);
    case Scheme::RandomIrs: return run_random_irs(trial, s);
    case Scheme::NoIrs: return run_no_irs(trial, s);
    case Scheme::Hd: return run_hd(trial, s);
  }
  throw InvalidArgument("run_scheme: unknown scheme");
}

double average_bcd_rate(const std::vector<FullCsi>& samples, const PhaseVector& theta, const ScenarioConfig& cfg,
                        const BcdConfig& bcd, std::uint64_t seed) {
  if (samples.empty()) throw InvalidArgument("average_bcd_rate: no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(derive_seed(seed, kInitStream, i));
    const EffectiveCsi eff = effective_channels(samples[i], theta);
    total += weighted_sum_rate(eff, run_bcd(eff, random_feasible_init(cfg, rng), cfg, bcd).bf, cfg);
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace irsfd
