#pragma once

#include <cstdint>
#include <random>

#include "irsfd/types.hpp"

namespace irsfd {

/// Random source used everywhere; every worker owns its own instance.
using Rng = std::mt19937_64;

/// Mixes a base seed with stream indices into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Matrix of i.i.d. CN(0, variance) entries.
CMat complex_gaussian(int rows, int cols, double variance, Rng& rng);

/// Distance-dependent path loss C0 * (d / D0)^(-a).
double path_loss(double d, double c0, double d0, double exponent);

/// Rician small-scale fading around a deterministic LoS component:
/// sqrt(b/(1+b)) * H_los + sqrt(1/(1+b)) * H_nlos.
CMat rician_channel(const CMat& h_los, double rician_factor, Rng& rng);

/// Residual self-interference channel with per-entry power `si_power`.
CMat si_channel(int nr, int nt, double si_power, Rng& rng);

/// Half-wavelength ULA response along the x axis for unit direction `u`.
CVec ula_response(int n, const Point3& u);

/// Half-wavelength UPA response in the x-z plane. The element grid is
/// chosen by `upa_shape`.
CVec upa_response(int n, const Point3& u);

/// Rows x columns of the IRS planar array for `n` elements (rows <= cols,
/// rows the largest divisor of n not exceeding sqrt(n)).
std::pair<int, int> upa_shape(int n);

/// Draws one full-CSI realisation. Throws InvalidArgument on coincident nodes.
FullCsi sample_full_csi(const ScenarioConfig& cfg, Rng& rng);

/// Deterministic (LoS) part of the full CSI at the nominal user positions,
/// i.e. the mean of `sample_full_csi` when location_radius == 0.
FullCsi mean_full_csi(const ScenarioConfig& cfg);

/// Hbar = H + V Phi G etc. with Phi = Diag(exp(j theta)).
EffectiveCsi effective_channels(const FullCsi& csi, const PhaseVector& theta);

/// Maps each phase to the nearest point of the uniform 2^bits grid on [0, 2pi).
PhaseVector quantize_phases(const PhaseVector& theta, int bits);

/// Adds estimation error with per-entry variance p_H * error_power to every matrix.
FullCsi perturb_csi(const FullCsi& csi, double error_power, Rng& rng);

/// Temporal correlation of the scattered component after a delay `tau` (s):
/// the Jakes coefficient J0(2 pi f_d tau).
double delay_correlation(double tau, double doppler_hz);

/// Ages `past` by a delay tau. The scattered (non-mean) part evolves as
/// rho * (past - mean) + sqrt(1 - rho^2) * (fresh - mean), where `fresh` is
/// an independent realisation drawn from the same statistics.
FullCsi delayed_csi(const FullCsi& fresh, const FullCsi& past, double tau, const ScenarioConfig& cfg);

/// Same mixture with an explicit correlation coefficient rho in [0, 1].
FullCsi age_csi(const FullCsi& fresh, const FullCsi& past, const FullCsi& mean, double rho);

/// Applies `fn` to every constituent matrix (same traversal order everywhere).
template <typename Fn>
void for_each_matrix(FullCsi& csi, Fn&& fn) {
  for (auto& m : csi.h_ul) fn(m);
  for (auto& m : csi.h_dl) fn(m);
  for (auto& m : csi.g_ul) fn(m);
  for (auto& m : csi.g_dl) fn(m);
  fn(csi.v_ul);
  fn(csi.v_dl);
  for (auto& row : csi.j)
    for (auto& m : row) fn(m);
  fn(csi.h_si);
}

template <typename Fn>
void for_each_matrix(const FullCsi& csi, Fn&& fn) {
  for (const auto& m : csi.h_ul) fn(m);
  for (const auto& m : csi.h_dl) fn(m);
  for (const auto& m : csi.g_ul) fn(m);
  for (const auto& m : csi.g_dl) fn(m);
  fn(csi.v_ul);
  fn(csi.v_dl);
  for (const auto& row : csi.j)
    for (const auto& m : row) fn(m);
  fn(csi.h_si);
}

/// Copy of `csi` with every IRS-related channel (G_U, G_D, V_U, V_D) zeroed.
FullCsi without_irs(const FullCsi& csi);

/// Checks that matrix dimensions agree with `cfg`; throws InvalidArgument.
void check_dimensions(const FullCsi& csi, const ScenarioConfig& cfg);

}  // namespace irsfd
