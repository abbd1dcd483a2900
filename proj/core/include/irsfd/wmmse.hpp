#pragma once

#include <iosfwd>
#include <vector>

#include "irsfd/channels.hpp"
#include "irsfd/types.hpp"

namespace irsfd {

/// Settings of the block-coordinate-descent short-term beamformer.
struct BcdConfig {
  int max_iterations = 100;
  double tolerance = 1e-4;  // absolute change of the WMMSE objective
  double bisection_tolerance = 1e-12;  // relative width of the multiplier bracket
  int bisection_max_steps = 200;
  bool record_sum_rate = true;
  /// Also record the objective after each of the four block updates.
  bool record_blocks = false;

  void validate() const;
};

struct BcdTrace {
  std::vector<double> objective;  // WMMSE objective after each full iteration
  std::vector<double> sum_rate;   // weighted sum-rate after each iteration (if recorded)
  std::vector<double> block_objective;  // after the W, P and F blocks, and U from iteration 2 on
  double initial_objective = 0.0;  // objective at the initial precoders with optimal U and W
  int iterations = 0;
  bool converged = false;
};

/// A numerical failure inside run_bcd, carrying the trace recorded so far.
class BcdError : public NumericalError {
 public:
  BcdError(const std::string& what, BcdTrace trace) : NumericalError(what), trace_(std::move(trace)) {}
  const BcdTrace& trace() const { return trace_; }

 private:
  BcdTrace trace_;
};

/// Solution of  min Tr(X^H A X) - 2 Re Tr(X^H R)  s.t. ||X||_F^2 <= budget
/// for Hermitian PSD A: X = (A + multiplier I)^{-1} R with the multiplier
/// found by bisection when the unconstrained solution is infeasible.
struct KktSolution {
  CMat x;
  double multiplier = 0.0;
};

KktSolution solve_power_constrained(const CMat& a, const CMat& rhs, double budget, const BcdConfig& cfg = {});

/// Same problem with several right-hand sides sharing one sum-power budget.
struct SharedKktSolution {
  std::vector<CMat> x;
  double multiplier = 0.0;
};

SharedKktSolution solve_shared_power(const CMat& a, const std::vector<CMat>& rhs, double budget,
                                     const BcdConfig& cfg = {});

/// Receive filters U = A^{-1} Hbar P for every UL and DL user. Only the
/// u_ul/u_dl members of the result are filled.
WmmseAux update_receivers(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg);

/// W = E^{-1}. Throws NumericalError if E is singular.
CMat weight_from_mse(const CMat& e);

/// Fills aux.w_ul / aux.w_dl from the current error matrices.
void update_weights(const EffectiveCsi& eff, const BeamformerSet& bf, WmmseAux& aux, const ScenarioConfig& cfg);

/// A_P,k = sum_k' alpha_k' Hbar_k^H U_k' W_k' U_k'^H Hbar_k + sum_l beta_l Jbar_kl^H U_l W_l U_l^H Jbar_kl.
CMat ul_precoder_matrix(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg, int k);

/// A_F = sum_l beta_l Hbar_l^H U_l W_l U_l^H Hbar_l + sum_k alpha_k H~^H U_k W_k U_k^H H~ (shared by all l).
CMat dl_precoder_matrix(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg);

struct UlPrecoderUpdate {
  std::vector<CMat> p;
  std::vector<double> lambda;
};

struct DlPrecoderUpdate {
  std::vector<CMat> f;
  double mu = 0.0;
};

UlPrecoderUpdate update_ul_precoders(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg,
                                     const BcdConfig& bcd = {});
DlPrecoderUpdate update_dl_precoders(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg,
                                     const BcdConfig& bcd = {});

struct BcdResult {
  BeamformerSet bf;
  WmmseAux aux;
  BcdTrace trace;
  std::vector<double> lambda;
  double mu = 0.0;
};

/// Cyclic U -> W -> P -> F updates until the objective change drops below
/// the tolerance or the iteration cap is hit. An infeasible init is scaled
/// onto the budgets first.
BcdResult run_bcd(const EffectiveCsi& eff, const BeamformerSet& init, const ScenarioConfig& cfg,
                  const BcdConfig& bcd = {});

/// Complex Gaussian precoders scaled to the full power budgets.
BeamformerSet random_feasible_init(const ScenarioConfig& cfg, Rng& rng);

/// Scales down any precoder (or the DL set) that exceeds its budget.
BeamformerSet project_to_budgets(const BeamformerSet& bf, const ScenarioConfig& cfg);

/// Convenience: random init followed by run_bcd.
BcdResult solve_short_term(const EffectiveCsi& eff, const ScenarioConfig& cfg, Rng& rng, const BcdConfig& bcd = {});

/// CSV with columns iteration,objective,sum_rate.
void write_bcd_trace_csv(std::ostream& out, const BcdTrace& trace);

}  // namespace irsfd
