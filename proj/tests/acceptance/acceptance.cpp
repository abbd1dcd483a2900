// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Expensive intermediate results (SSCA phases per seed and
// the trained network) are computed once and shared between criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "irsfd/channels.hpp"
#include "irsfd/experiment.hpp"
#include "irsfd/numdiff.hpp"
#include "irsfd/overhead.hpp"
#include "irsfd/schemes.hpp"
#include "irsfd/ssca.hpp"
#include "irsfd/system.hpp"
#include "irsfd/unfolding.hpp"
#include "irsfd/wmmse.hpp"

using namespace irsfd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

// ---------------------------------------------------------------------------
// Shared desk instances for the BCD criteria.

struct BcdCase {
  ScenarioConfig cfg;
  EffectiveCsi eff;
  BcdResult res;
};

std::vector<BcdCase> bcd_cases;
double bcd_seconds = 0.0;

void solve_bcd_cases() {
  const auto t0 = Clock::now();
  const ScenarioConfig cfg = desk_scenario();
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng(derive_seed(2024, i));
    BcdCase c;
    c.cfg = cfg;
    c.eff = effective_channels(sample_full_csi(cfg, rng), random_phases(cfg.irs_elements, rng));
    c.res = run_bcd(c.eff, random_feasible_init(cfg, rng), cfg, BcdConfig{});
    bcd_cases.push_back(std::move(c));
  }
  bcd_seconds = seconds_since(t0);
}

Outcome bcd_monotone() {
  solve_bcd_cases();
  int converged = 0, monotone = 0, worst_iters = 0;
  double worst_rise = 0.0;
  for (const auto& c : bcd_cases) {
    const BcdTrace& t = c.res.trace;
    double prev = t.initial_objective;
    bool ok = true;
    for (double o : t.objective) {
      worst_rise = std::max(worst_rise, o - prev);
      ok = ok && o <= prev + 1e-9;
      prev = o;
    }
    monotone += ok;
    converged += t.converged && t.iterations <= 100;
    worst_iters = std::max(worst_iters, t.iterations);
  }
  const bool pass = monotone == 50 && converged == 50 && bcd_seconds < 60.0;
  return {pass, fmt("monotone %d/50 (max rise %.1e), converged %d/50 (max %d iterations), %.1f s", monotone,
                    worst_rise, converged, worst_iters, bcd_seconds)};
}

double dual_rate(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg) {
  const WmmseAux aux = update_receivers(eff, bf, cfg);
  double r = 0.0;
  for (int k = 0; k < cfg.num_ul; ++k)
    r -= cfg.ul_weights[k] * log2det_pd(mse_matrix_ul(eff, bf, aux, k, cfg.ul_noise));
  for (int l = 0; l < cfg.num_dl; ++l)
    r -= cfg.dl_weights[l] * log2det_pd(mse_matrix_dl(eff, bf, aux, l, cfg.dl_noise[l]));
  return r;
}

Outcome rate_mse_duality() {
  double worst = 0.0;
  for (const auto& c : bcd_cases) {
    const double g = weighted_sum_rate(c.eff, c.res.bf, c.cfg);
    worst = std::max(worst, std::abs(g - dual_rate(c.eff, c.res.bf, c.cfg)) / std::abs(g));
  }
  return {worst <= 1e-6, fmt("max relative gap %.2e over 50 fixed points", worst)};
}

Outcome kkt_bisection() {
  double feas = 0.0, slack = 0.0;
  for (const auto& c : bcd_cases) {
    const std::vector<double> pu = ul_powers(c.res.bf);
    for (int k = 0; k < c.cfg.num_ul; ++k) {
      const double rel = (pu[k] - c.cfg.ul_power[k]) / c.cfg.ul_power[k];
      feas = std::max(feas, rel);
      slack = std::max(slack, std::min(c.res.lambda[k], std::abs(rel)));
    }
    const double rel = (dl_power(c.res.bf) - c.cfg.ap_power) / c.cfg.ap_power;
    feas = std::max(feas, rel);
    slack = std::max(slack, std::min(c.res.mu, std::abs(rel)));
  }
  // Closed forms: x = r / (a + m) with |x|^2 = budget when binding.
  const BcdConfig bcd;
  auto one = [](double v) { return CMat::Constant(1, 1, Complex(v)); };
  const KktSolution bind0 = solve_power_constrained(one(0.0), one(1.0), 0.25, bcd);
  const KktSolution bind1 = solve_power_constrained(one(1.0), one(2.0), 1.0, bcd);
  const KktSolution inter = solve_power_constrained(one(1.0), one(1.0), 100.0, bcd);
  const double oracle = std::max({std::abs(bind0.multiplier - 2.0) / 2.0, std::abs(bind0.x(0, 0) - 0.5) / 0.5,
                                  std::abs(bind1.multiplier - 1.0), std::abs(bind1.x(0, 0) - 1.0),
                                  std::abs(inter.multiplier), std::abs(inter.x(0, 0) - 1.0)});
  const bool pass = feas <= 1e-9 && slack <= 1e-6 && oracle <= 1e-9;
  return {pass, fmt("feasibility excess %.1e, complementary slackness %.1e, scalar oracle error %.1e", feas, slack,
                    oracle)};
}

// ---------------------------------------------------------------------------

Outcome gradient_oracles() {
  const ScenarioConfig cfg = make_scenario(2, 2, 4, 2, 2, 8);

  // SSCA sample gradient against central differences of g with the short-term
  // solution frozen.
  double ssca_err = 0.0;
  for (std::uint64_t i = 0; i < 3; ++i) {
    Rng rng(derive_seed(404, i));
    const FullCsi csi = sample_full_csi(cfg, rng);
    const PhaseVector theta = random_phases(cfg.irs_elements, rng);
    const SampleGradient sg = sample_gradient(theta, csi, cfg, random_feasible_init(cfg, rng));
    auto f = [&](const RVec& x) { return weighted_sum_rate(PhaseVector(x), sg.short_term.bf, csi, cfg); };
    ssca_err = std::max(ssca_err, grad_check(sg.grad, f, theta.theta, 1e-5, 1e-5).max_rel_error);
  }

  // Unfolding gradients, every coordinate of theta and Psi.
  Rng rng(405);
  auto [lpbn, sabn] = init_params(cfg, 2, rng);
  // Move Psi off the identity point so that every family carries gradient.
  std::vector<double> flat = flatten(sabn);
  for (double& v : flat) v += 0.05 * std::normal_distribution<double>()(rng);
  unflatten(sabn, flat);
  for (auto& layer : sabn.layers) {
    for (auto& l : layer.lambda) l = std::abs(l);
    layer.mu = std::abs(layer.mu);
  }
  flat = flatten(sabn);
  const std::vector<FullCsi> batch = draw_samples(cfg, 2, 406);
  const UnfoldingGradients g = backward(lpbn, sabn, batch, cfg, ThetaGradient::Full);

  auto theta_loss = [&](const RVec& x) {
    LpbnParams l = lpbn;
    l.theta = PhaseVector(x);
    return loss(l, sabn, batch, cfg);
  };
  const GradCheckReport th = grad_check(g.theta, theta_loss, lpbn.theta.theta, 1e-5, 1e-4);
  const std::vector<double> gp = flatten(g.psi);
  auto psi_loss = [&](const RVec& x) {
    SabnParams s = sabn;
    unflatten(s, std::vector<double>(x.data(), x.data() + x.size()));
    return loss(lpbn, s, batch, cfg);
  };
  const RVec x0 = Eigen::Map<const RVec>(flat.data(), static_cast<Eigen::Index>(flat.size()));
  const RVec ga = Eigen::Map<const RVec>(gp.data(), static_cast<Eigen::Index>(gp.size()));
  const GradCheckReport ps = grad_check(ga, psi_loss, x0, 1e-5, 1e-4);

  // Frozen-network theta gradient against the SSCA sample gradient at the
  // network's own output precoders.
  const UnfoldingGradients direct = backward(lpbn, sabn, batch, cfg, ThetaGradient::Direct);
  RVec ssca_sum = RVec::Zero(cfg.irs_elements);
  for (const FullCsi& csi : batch)
    ssca_sum += rate_gradient_theta(lpbn.theta, network_forward(csi, lpbn, sabn, cfg).bf, csi, cfg);
  const RVec expect = -ssca_sum / static_cast<double>(batch.size());
  const double split = (direct.theta - expect).norm() / expect.norm();

  const bool pass = ssca_err <= 1e-5 && th.passed && ps.passed && split <= 1e-6;
  return {pass, fmt("ssca %.1e; unfolding theta %.1e, psi %.1e over %zu coordinates; frozen-network split %.1e",
                    ssca_err, th.max_rel_error, ps.max_rel_error, flat.size(), split)};
}

// ---------------------------------------------------------------------------
// Scheme comparisons over 20 desk seeds.

constexpr int kSeeds = 20;

struct SeedRun {
  Trial trial;
  PhaseVector ssca_theta;
  std::vector<double> ssca_trace;
  std::map<std::string, double> total;
};

std::vector<SeedRun> runs;
SchemeSettings desk_settings;
UnfoldingModel model;
bool have_model = false;

void prepare_ssca_runs() {
  const ScenarioConfig cfg = desk_scenario();
  desk_settings = SchemeSettings{};
  desk_settings.pool_size = 30;
  // Held-out rates come from a BCD run to convergence on 30 slots. The
  // 100-iteration default stops early on most desk instances and the
  // truncation noise would swamp the differences between phase designs.
  desk_settings.test_slots = 30;
  desk_settings.bcd.max_iterations = 1000;
  for (int i = 0; i < kSeeds; ++i) {
    SeedRun r;
    r.trial = make_trial(cfg, 100 + i, desk_settings);
    SscaConfig sc = desk_settings.ssca;
    sc.max_iterations = 300;
    sc.seed = derive_seed(r.trial.seed, 77);
    const SscaResult res = run_ssca(r.trial.pool, cfg, sc, BcdConfig{});
    r.ssca_theta = res.theta;
    r.ssca_trace = res.trace.batch_sum_rate;
    r.total["ssca"] = run_ssca_scheme(r.trial, desk_settings, &r.ssca_theta).total();
    r.total["random-irs"] = run_random_irs(r.trial, desk_settings).total();
    runs.push_back(std::move(r));
  }
}

Outcome ssca_improvement() {
  prepare_ssca_runs();
  int wins = 0;
  for (const auto& r : runs) wins += r.total.at("ssca") > r.total.at("random-irs");
  // Seed-averaged trace; window means at iteration 200 and at the end.
  std::vector<double> avg(runs.front().ssca_trace.size(), 0.0);
  for (const auto& r : runs)
    for (std::size_t t = 0; t < avg.size(); ++t) avg[t] += r.ssca_trace[t] / kSeeds;
  auto window = [&](std::size_t end) { return std::accumulate(avg.begin() + (end - 20), avg.begin() + end, 0.0) / 20.0; };
  const double at200 = window(200), final = window(avg.size());
  const double gap = std::abs(final - at200) / std::abs(final);
  const bool pass = wins >= 19 && gap <= 0.02;
  return {pass, fmt("SSCA beats random phases in %d/%d seeds; trace at 200 within %.2f%% of final (300)", wins,
                    kSeeds, 100.0 * gap)};
}

Outcome unfolding_quality() {
  const auto t0 = Clock::now();
  const ScenarioConfig cfg = desk_scenario();
  SchemeSettings s = desk_settings;
  s.pool_size = 100;
  s.train.layers = 8;
  s.train.train_theta = false;  // the network is judged at the SSCA phases
  const std::vector<FullCsi> pool = draw_samples(cfg, s.pool_size, derive_seed(7, 1));
  SscaConfig sc = s.ssca;
  sc.seed = derive_seed(7, 2);
  const PhaseVector theta = run_ssca(pool, cfg, sc, BcdConfig{}).theta;
  const auto t1 = Clock::now();
  model = train_model(cfg, s, 7, &theta);
  have_model = true;
  const double train_s = seconds_since(t1);
  const std::vector<FullCsi> test = draw_samples(cfg, 50, derive_seed(7, 99));
  const double net = network_average_rate(test, model.lpbn, model.sabn, cfg);
  const double bcd = average_bcd_rate(test, theta, cfg, s.bcd, 7);
  const double ratio = net / bcd;
  const bool pass = ratio >= 0.90 && train_s < 300.0;
  return {pass, fmt("network %.3f vs converged BCD %.3f bits/s/Hz on 50 held-out samples: %.1f%% (training %.1f s, "
                    "total %.1f s)",
                    net, bcd, 100.0 * ratio, train_s, seconds_since(t0))};
}

Outcome scheme_ordering() {
  if (!have_model) throw NumericalError("no trained network");
  for (auto& r : runs) {
    r.total["unfolding"] = run_unfolding(r.trial, desk_settings, &model).total();
    r.total["no-irs"] = run_no_irs(r.trial, desk_settings).total();
    r.total["hd"] = run_hd(r.trial, desk_settings).total();
  }
  std::map<std::string, double> avg;
  for (const auto& r : runs)
    for (const auto& [k, v] : r.total) avg[k] += v / kSeeds;
  const bool chain = avg["ssca"] >= avg["unfolding"] && avg["unfolding"] >= avg["random-irs"] &&
                     avg["random-irs"] >= avg["no-irs"];
  const bool fd = std::min({avg["ssca"], avg["unfolding"], avg["random-irs"], avg["no-irs"]}) > avg["hd"];
  return {chain && fd, fmt("ssca %.3f, unfolding %.3f, random-irs %.3f, no-irs %.3f, hd %.3f (%d seeds); chain %s, "
                           "FD > HD %s",
                           avg["ssca"], avg["unfolding"], avg["random-irs"], avg["no-irs"], avg["hd"], kSeeds,
                           chain ? "holds" : "broken", fd ? "holds" : "broken")};
}

Outcome quantization_trend() {
  if (!have_model) throw NumericalError("no trained network");
  constexpr int seeds = 10;
  std::map<int, double> ssca, unf, full;
  for (int bits : {0, 1, 2, 3}) {
    SchemeSettings s = desk_settings;
    s.impairments.quantization_bits = bits;
    for (int i = 0; i < seeds; ++i) {
      const SeedRun& r = runs[i];
      ssca[bits] += run_ssca_scheme(r.trial, s, &r.ssca_theta).total() / seeds;
      unf[bits] += run_unfolding(r.trial, s, &model).total() / seeds;
      full[bits] += run_full_csi(r.trial, s).total() / seeds;
    }
  }
  auto keep = [](std::map<int, double>& m, int b) { return m[b] / m[0]; };
  const bool mixed3 = keep(ssca, 3) >= 0.95 && keep(unf, 3) >= 0.95;
  bool full_lower = true;
  for (int b : {1, 2}) full_lower = full_lower && keep(full, b) < std::min(keep(ssca, b), keep(unf, b));
  return {mixed3 && full_lower,
          fmt("retention at 3 bits: ssca %.3f, unfolding %.3f; at 1/2 bits: ssca %.3f/%.3f, unfolding %.3f/%.3f, "
              "full-csi %.3f/%.3f",
              keep(ssca, 3), keep(unf, 3), keep(ssca, 1), keep(ssca, 2), keep(unf, 1), keep(unf, 2), keep(full, 1),
              keep(full, 2))};
}

// ---------------------------------------------------------------------------

// The off-diagonal scale of a near-identity instance whose layer matrices
// have the requested minimum row dominance |a_ii| / sum_{j != i} |a_ij|.
struct DominantInstance {
  ScenarioConfig cfg;
  EffectiveCsi eff;
  BeamformerSet state;
};

DominantInstance dominant_instance(double eps, std::uint64_t seed) {
  DominantInstance d;
  d.cfg = make_scenario(2, 2, 2, 2, 2, 4);
  d.cfg.ul_noise = 1.0;
  d.cfg.dl_noise = {1.0, 1.0};
  d.cfg.ul_power = {1.0, 1.0};
  d.cfg.ap_power = 2.0;
  Rng rng(seed);
  auto near = [&](double scale) {
    return CMat(scale * (CMat::Identity(2, 2) + eps * complex_gaussian(2, 2, 1.0, rng)));
  };
  for (int k = 0; k < 2; ++k) d.eff.h_ul.push_back(near(1.0));
  for (int l = 0; l < 2; ++l) d.eff.h_dl.push_back(near(1.0));
  d.eff.j.assign(2, std::vector<CMat>(2));
  for (auto& row : d.eff.j)
    for (auto& m : row) m = near(0.1);
  d.eff.h_si = near(0.1);
  for (int k = 0; k < 2; ++k) d.state.p.push_back(CMat::Identity(2, 2) / std::sqrt(2.0));
  for (int l = 0; l < 2; ++l) d.state.f.push_back(CMat::Identity(2, 2) / std::sqrt(2.0));
  return d;
}

double row_dominance(const CMat& a) {
  double best = INFINITY;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (j != i) off += std::abs(a(i, j));
    best = std::min(best, std::abs(a(i, i)) / off);
  }
  return best;
}

double dominance(const DominantInstance& d) {
  WmmseAux aux = update_receivers(d.eff, d.state, d.cfg);
  update_weights(d.eff, d.state, aux, d.cfg);
  double m = row_dominance(uplink_covariance(d.eff, d.state, d.cfg.ul_noise));
  for (int l = 0; l < 2; ++l) {
    m = std::min(m, row_dominance(downlink_covariance(d.eff, d.state, l, d.cfg.dl_noise[l])));
    m = std::min(m, row_dominance(mse_matrix_dl(d.eff, d.state, aux, l, d.cfg.dl_noise[l])));
  }
  for (int k = 0; k < 2; ++k) {
    m = std::min(m, row_dominance(mse_matrix_ul(d.eff, d.state, aux, k, d.cfg.ul_noise)));
    m = std::min(m, row_dominance(ul_precoder_matrix(d.eff, aux, d.cfg, k)));
  }
  return std::min(m, row_dominance(dl_precoder_matrix(d.eff, aux, d.cfg)));
}

DominantInstance calibrated(double ratio, std::uint64_t seed) {
  double lo = 1e-6, hi = 1.0;  // dominance falls as eps grows
  for (int i = 0; i < 60; ++i) {
    const double mid = std::sqrt(lo * hi);
    (dominance(dominant_instance(mid, seed)) > ratio ? lo : hi) = mid;
  }
  return dominant_instance(std::sqrt(lo * hi), seed);
}

Outcome dagger_and_layers() {
  // Worked 3x3 example: reciprocal diagonal, zero elsewhere.
  CMat a(3, 3);
  a << Complex(2, 1), 5.0, -1.0, 3.0, Complex(0, -4), 7.0, 0.5, 2.0, 8.0;
  CMat expect = CMat::Zero(3, 3);
  expect(0, 0) = 1.0 / Complex(2, 1);
  expect(1, 1) = 1.0 / Complex(0, -4);
  expect(2, 2) = 0.125;
  const bool example = dagger(a) == expect;

  // Taylor identity: X = 0, Y = -A0^{-2}, Z = 2 A0^{-1} is exact at A0.
  Rng rng(606);
  const CMat a0 = complex_gaussian(3, 3, 1.0, rng) + 3.0 * CMat::Identity(3, 3);
  const CMat inv = a0.inverse();
  const double taylor = (inverse_approx(a0, CMat::Zero(3, 3), -inv * inv, 2.0 * inv) - inv).norm() / inv.norm();

  const std::vector<double> ratios{2.0, 10.0, 100.0};
  std::vector<double> worst(ratios.size(), 0.0);
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double prev = INFINITY;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      const DominantInstance d = calibrated(ratios[i], seed);
      const double dev = layer_deviation(d.eff, init_sabn(d.cfg, 1).layers[0], d.state, d.cfg).max();
      worst[i] = std::max(worst[i], dev);
      monotone = monotone && dev < prev;
      prev = dev;
    }
  }
  // A first-order surrogate of A^{-1} is off by roughly 1/ratio, so the 25%
  // bound is asserted on the tiers with ratio >= 10.
  const bool bound = worst[1] <= 0.25 && worst[2] <= 0.25;
  const bool pass = example && taylor <= 1e-12 && bound && monotone;
  return {pass, fmt("3x3 example %s, Taylor identity %.1e; worst layer deviation at dominance 2/10/100: "
                    "%.3f/%.3f/%.3f over 5 seeds, monotone %s",
                    example ? "exact" : "wrong", taylor, worst[0], worst[1], worst[2], monotone ? "yes" : "no")};
}

Outcome overhead_formulas() {
  const std::uint64_t frozen[4][3] = {{0, 46080000, 46080000},
                                      {100, 790080000, 48312000},
                                      {200, 1534080000, 50544000},
                                      {400, 3022080000, 55008000}};
  OverheadParams p;
  bool exact = true;
  for (const auto& row : frozen) {
    p.t = row[0];
    const Overhead o = csi_overhead(p);
    exact = exact && o.single_timescale == row[1] && o.mixed_timescale == row[2];
  }
  bool ordered = true;
  for (std::uint64_t t = 1; t <= 400; ++t) {
    p.t = t;
    const Overhead o = csi_overhead(p);
    ordered = ordered && o.mixed_timescale < o.single_timescale;
  }
  return {exact && ordered, fmt("frozen counts %s; Q_m < Q_s for T = 1..400 %s", exact ? "match" : "differ",
                                ordered ? "holds" : "broken")};
}

Outcome determinism() {
  SchemeSettings tiny;
  tiny.pool_size = 4;
  tiny.test_slots = 2;
  tiny.ssca.max_iterations = 3;
  tiny.full_csi_outer_iterations = 2;
  tiny.train.epochs = 1;
  tiny.train.layers = 2;
  tiny.bcd.max_iterations = 20;
  int kinds = 0, files = 0;
  std::string mismatch;
  for (auto kind : {ExperimentKind::Convergence, ExperimentKind::SweepT, ExperimentKind::SweepPower,
                    ExperimentKind::SweepSi, ExperimentKind::SweepQuantization, ExperimentKind::SweepDelay,
                    ExperimentKind::SweepError, ExperimentKind::Overhead, ExperimentKind::SampleCount,
                    ExperimentKind::LayerCount, ExperimentKind::AntennaSweep, ExperimentKind::RandomLocations}) {
    ExperimentSpec spec;
    spec.kind = kind;
    spec.schemes = all_schemes();
    spec.settings = tiny;
    spec.seeds = {1, 2};
    const std::vector<double> defaults = default_sweep_values(kind);
    spec.values.assign(defaults.begin(), defaults.begin() + std::min<std::size_t>(2, defaults.size()));
    if (kind == ExperimentKind::SampleCount) spec.values = {4, 6};
    const ExperimentReport a = run_experiment(spec);
    spec.threads = 2;
    const ExperimentReport b = run_experiment(spec);
    ++kinds;
    for (const auto& [name, text] : a.files) {
      if (name == "timing.csv") continue;
      ++files;
      if (!b.files.count(name) || b.files.at(name) != text) mismatch += experiment_name(kind) + "/" + name + " ";
    }
  }
  return {mismatch.empty(), mismatch.empty() ? fmt("%d experiment kinds, %d output files identical on re-run", kinds,
                                                   files)
                                             : "differs: " + mismatch};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  std::printf("irsfd acceptance suite\n");
  report("bcd-monotone-convergence", bcd_monotone);
  report("rate-mse-duality", rate_mse_duality);
  report("kkt-bisection", kkt_bisection);
  report("gradient-oracles", gradient_oracles);
  report("ssca-improvement", ssca_improvement);
  report("dagger-inverse-approx", dagger_and_layers);
  report("unfolding-quality", unfolding_quality);
  report("overhead-formulas", overhead_formulas);
  report("scheme-ordering", scheme_ordering);
  report("quantization-robustness", quantization_trend);
  report("determinism", determinism);
  std::printf("%d of 11 criteria failed; total %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
