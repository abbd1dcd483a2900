#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "irsfd/channels.hpp"
#include "irsfd/types.hpp"
#include "irsfd/wmmse.hpp"

namespace irsfd {

/// Long-term phase optimiser settings. The step sizes follow
///   rho^t   = rho_scale   / (rho_offset + t)^rho_exponent
///   gamma^t = gamma_scale / (gamma_offset + t)^gamma_exponent
/// clamped to (0, 1].
struct SscaConfig {
  int batch_size = 5;
  double curvature = 0.5;  // the surrogate's quadratic weight
  int max_iterations = 200;
  int pool_size = 100;  // used by callers that draw the pool themselves
  double rho_scale = 10.0;
  double rho_offset = 10.0;
  double rho_exponent = 0.6;
  double gamma_scale = 15.0;
  double gamma_offset = 15.0;
  double gamma_exponent = 1.0;
  /// Restart each per-sample BCD from the previous solution for the same
  /// pool entry instead of from a fresh random point.
  bool warm_start = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct StepSizes {
  double rho = 1.0;
  double gamma = 1.0;
};

StepSizes step_schedules(int t, const SscaConfig& cfg);

struct SurrogateState {
  RVec f;  // running estimate of the gradient of the negated sum-rate
  PhaseVector theta;
  int t = 0;
};

/// d g / d theta with the precoders held fixed (bits/s/Hz per radian).
RVec rate_gradient_theta(const PhaseVector& theta, const BeamformerSet& bf, const FullCsi& csi,
                         const ScenarioConfig& cfg);

struct SampleGradient {
  RVec grad;  // d g / d theta at the short-term solution
  BcdResult short_term;
  double sum_rate = 0.0;
};

/// Solves the short-term problem on effective_channels(csi, theta) starting
/// from `init`, then differentiates g with that solution frozen.
SampleGradient sample_gradient(const PhaseVector& theta, const FullCsi& csi, const ScenarioConfig& cfg,
                               const BeamformerSet& init, const BcdConfig& bcd = {});

/// f <- (1 - rho) f + rho * sum(batch_grads). The batch gradients are those of
/// the minimised objective (the negated sum-rate). Increments state.t.
SurrogateState update_surrogate(const SurrogateState& state, const std::vector<RVec>& batch_grads, double rho);

/// Closed-form minimiser of the quadratic surrogate: theta - f / (2 curvature).
PhaseVector surrogate_minimizer(const PhaseVector& theta, const RVec& f, double curvature);

/// The surrogate's value, up to its constant term, at `x`:
/// f^T (x - theta) + curvature * ||x - theta||^2.
double surrogate_value(const PhaseVector& x, const PhaseVector& theta, const RVec& f, double curvature);

/// theta^{t+1} = (1 - gamma) theta + gamma theta_bar.
PhaseVector long_term_step(const PhaseVector& theta, const PhaseVector& theta_bar, double gamma);

struct SscaTrace {
  std::vector<double> batch_sum_rate;  // average g over the batch, per iteration
  std::vector<double> f_norm;
};

struct SscaResult {
  PhaseVector theta;
  SscaTrace trace;
};

/// Runs the long-term optimiser on a pool of full-CSI samples. `theta0`
/// may be empty, in which case a uniform random start is drawn from cfg.seed.
SscaResult run_ssca(const std::vector<FullCsi>& pool, const ScenarioConfig& scen, const SscaConfig& cfg,
                    const BcdConfig& bcd = {}, const PhaseVector& theta0 = {});

/// Uniform phases on [0, 2 pi).
PhaseVector random_phases(int t, Rng& rng);

/// CSV with columns iteration,batch_sum_rate,f_norm.
void write_ssca_trace_csv(std::ostream& out, const SscaTrace& trace);

}  // namespace irsfd
