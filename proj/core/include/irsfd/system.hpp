#pragma once

#include <vector>

#include "irsfd/types.hpp"

namespace irsfd {

/// log2 det of a Hermitian positive definite matrix (Cholesky on the
/// Hermitian part). Throws NumericalError if the factorisation fails.
double log2det_pd(const CMat& a);

/// Received covariance at the AP: sum_k Hbar_k P_k P_k^H Hbar_k^H
/// + sum_l H~ F_l F_l^H H~^H + noise I (all UL users included).
CMat uplink_covariance(const EffectiveCsi& eff, const BeamformerSet& bf, double noise);

/// Received covariance at DL user l: sum_l' Hbar_l F_l' F_l'^H Hbar_l^H
/// + sum_k Jbar_kl P_k P_k^H Jbar_kl^H + noise I.
CMat downlink_covariance(const EffectiveCsi& eff, const BeamformerSet& bf, int l, double noise);

/// Achievable rate of UL user k in bits/s/Hz.
double uplink_rate(const EffectiveCsi& eff, const BeamformerSet& bf, int k, double noise);

/// Achievable rate of DL user l in bits/s/Hz. Inter-user DL interference is
/// received through the user's own channel Hbar_D,l.
double downlink_rate(const EffectiveCsi& eff, const BeamformerSet& bf, int l, double noise);

struct RateReport {
  std::vector<double> ul;  // per-user rates, bits/s/Hz
  std::vector<double> dl;
  double ul_weighted = 0.0;  // sum_k alpha_k R_U,k
  double dl_weighted = 0.0;  // sum_l beta_l R_D,l
  double total() const { return ul_weighted + dl_weighted; }
};

RateReport evaluate_rates(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg);

/// g = sum_k alpha_k R_U,k + sum_l beta_l R_D,l on the given effective channels.
double weighted_sum_rate(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg);

/// g evaluated on effective_channels(csi, theta).
double weighted_sum_rate(const PhaseVector& theta, const BeamformerSet& bf, const FullCsi& csi,
                         const ScenarioConfig& cfg);

/// WMMSE error matrix of UL user k for receive filter aux.u_ul[k].
CMat mse_matrix_ul(const EffectiveCsi& eff, const BeamformerSet& bf, const WmmseAux& aux, int k, double noise);

/// WMMSE error matrix of DL user l for receive filter aux.u_dl[l].
CMat mse_matrix_dl(const EffectiveCsi& eff, const BeamformerSet& bf, const WmmseAux& aux, int l, double noise);

/// sum_k alpha_k (Tr(W_U,k E_U,k) - ln det W_U,k) + sum_l beta_l (...).
/// Natural logarithm. Throws DomainError if a weight is not positive definite.
double wmmse_objective(const EffectiveCsi& eff, const BeamformerSet& bf, const WmmseAux& aux,
                       const ScenarioConfig& cfg);

/// Total transmit powers: ||P_k||_F^2 per UL user and sum_l ||F_l||_F^2.
std::vector<double> ul_powers(const BeamformerSet& bf);
double dl_power(const BeamformerSet& bf);

/// A power-normalised equivalent of a problem instance: every noise power
/// and every budget equals one. Rates, and therefore the weighted sum-rate,
/// are unchanged by the change of variables
///   P_k = sqrt(P_U,k) Phat_k,  F_l = sqrt(P_AP) Fhat_l.
struct NormalizedProblem {
  EffectiveCsi eff;
  ScenarioConfig cfg;
  std::vector<double> ul_scale;  // sqrt(P_U,k)
  double dl_scale = 1.0;         // sqrt(P_AP)

  BeamformerSet to_normalized(const BeamformerSet& bf) const;
  BeamformerSet to_physical(const BeamformerSet& bf) const;
};

NormalizedProblem normalize_problem(const EffectiveCsi& eff, const ScenarioConfig& cfg);

/// Scenario copy restricted to one direction: `ul_only` drops all DL users,
/// `dl_only` all UL users. Used by the half-duplex baseline.
ScenarioConfig uplink_only(const ScenarioConfig& cfg);
ScenarioConfig downlink_only(const ScenarioConfig& cfg);
EffectiveCsi uplink_only(const EffectiveCsi& eff);
EffectiveCsi downlink_only(const EffectiveCsi& eff);

}  // namespace irsfd
