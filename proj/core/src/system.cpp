#include "irsfd/system.hpp"

#include <cmath>
#include <numbers>

#include "irsfd/channels.hpp"

namespace irsfd {

namespace {

constexpr double kLn2 = std::numbers::ln2;

CMat outer(const CMat& h, const CMat& x) {
  const CMat hx = h * x;
  return hx * hx.adjoint();
}

CMat identity(Eigen::Index n) { return CMat::Identity(n, n); }

// log2 det(noise I_n + sum_i X_i X_i^H), skipping block `skip`. Evaluated as
// n log2(noise) + log2 det(W^H W) with W = [I; X / sqrt(noise)] through a QR
// factorisation. Each stream keeps its own column, so a strong
// self-interference stream perturbs the result only in proportion to its own
// scale rather than to the condition number of the covariance.
double log2det_noise_plus(Eigen::Index n, const std::vector<CMat>& blocks, std::size_t skip, double noise) {
  Eigen::Index c = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (i != skip) c += blocks[i].cols();
  const double base = static_cast<double>(n) * std::log2(noise);
  if (c == 0) return base;
  CMat w = CMat::Zero(c + n, c);
  w.topRows(c).setIdentity();
  const double inv_sigma = 1.0 / std::sqrt(noise);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i == skip) continue;
    w.block(c, col, n, blocks[i].cols()) = inv_sigma * blocks[i];
    col += blocks[i].cols();
  }
  const Eigen::HouseholderQR<CMat> qr(w);
  const auto& r = qr.matrixQR();
  double s = 0.0;
  for (Eigen::Index i = 0; i < c; ++i) s += std::log(std::abs(r(i, i)));
  if (!std::isfinite(s)) throw NumericalError("rate evaluation: non-finite log-determinant");
  return base + 2.0 * s / kLn2;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

double log2det_pd(const CMat& a) {
  const CMat herm = 0.5 * (a + a.adjoint());
  Eigen::LLT<CMat> llt(herm);
  if (llt.info() != Eigen::Success) throw NumericalError("log2det_pd: matrix is not positive definite");
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s / kLn2;
}

CMat uplink_covariance(const EffectiveCsi& eff, const BeamformerSet& bf, double noise) {
  const auto nr = eff.h_si.rows();
  CMat a = noise * identity(nr);
  for (int k = 0; k < eff.num_ul(); ++k) a += outer(eff.h_ul[k], bf.p[k]);
  for (int l = 0; l < eff.num_dl(); ++l) a += outer(eff.h_si, bf.f[l]);
  return a;
}

CMat downlink_covariance(const EffectiveCsi& eff, const BeamformerSet& bf, int l, double noise) {
  const auto& h = eff.h_dl[l];
  CMat a = noise * identity(h.rows());
  for (int lp = 0; lp < eff.num_dl(); ++lp) a += outer(h, bf.f[lp]);
  for (int k = 0; k < eff.num_ul(); ++k) a += outer(eff.j[k][l], bf.p[k]);
  return a;
}

double uplink_rate(const EffectiveCsi& eff, const BeamformerSet& bf, int k, double noise) {
  if (k < 0 || k >= eff.num_ul() || static_cast<int>(bf.p.size()) != eff.num_ul())
    throw InvalidArgument("uplink_rate: user index or precoder count mismatch");
  if (!(noise > 0.0)) throw InvalidArgument("uplink_rate: noise must be positive");
  // Received streams: UL users first, then the self-interference of each DL precoder.
  std::vector<CMat> blocks;
  for (int kk = 0; kk < eff.num_ul(); ++kk) blocks.push_back(eff.h_ul[kk] * bf.p[kk]);
  for (int l = 0; l < eff.num_dl(); ++l) blocks.push_back(eff.h_si * bf.f[l]);
  const auto n = eff.h_si.rows();
  const auto self = static_cast<std::size_t>(k);
  return std::max(0.0, log2det_noise_plus(n, blocks, kNone, noise) - log2det_noise_plus(n, blocks, self, noise));
}

double downlink_rate(const EffectiveCsi& eff, const BeamformerSet& bf, int l, double noise) {
  if (l < 0 || l >= eff.num_dl() || static_cast<int>(bf.f.size()) != eff.num_dl())
    throw InvalidArgument("downlink_rate: user index or precoder count mismatch");
  if (!(noise > 0.0)) throw InvalidArgument("downlink_rate: noise must be positive");
  const CMat& h = eff.h_dl[l];
  std::vector<CMat> blocks;
  for (int lp = 0; lp < eff.num_dl(); ++lp) blocks.push_back(h * bf.f[lp]);
  for (int k = 0; k < eff.num_ul(); ++k) blocks.push_back(eff.j[k][l] * bf.p[k]);
  const auto n = h.rows();
  const auto self = static_cast<std::size_t>(l);
  return std::max(0.0, log2det_noise_plus(n, blocks, kNone, noise) - log2det_noise_plus(n, blocks, self, noise));
}

RateReport evaluate_rates(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg) {
  RateReport r;
  for (int k = 0; k < eff.num_ul(); ++k) {
    r.ul.push_back(uplink_rate(eff, bf, k, cfg.ul_noise));
    r.ul_weighted += cfg.ul_weights[k] * r.ul.back();
  }
  for (int l = 0; l < eff.num_dl(); ++l) {
    r.dl.push_back(downlink_rate(eff, bf, l, cfg.dl_noise[l]));
    r.dl_weighted += cfg.dl_weights[l] * r.dl.back();
  }
  return r;
}

double weighted_sum_rate(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg) {
  return evaluate_rates(eff, bf, cfg).total();
}

double weighted_sum_rate(const PhaseVector& theta, const BeamformerSet& bf, const FullCsi& csi,
                         const ScenarioConfig& cfg) {
  return weighted_sum_rate(effective_channels(csi, theta), bf, cfg);
}

CMat mse_matrix_ul(const EffectiveCsi& eff, const BeamformerSet& bf, const WmmseAux& aux, int k, double noise) {
  const CMat& u = aux.u_ul[k];
  const CMat& h = eff.h_ul[k];
  const auto d = bf.p[k].cols();
  if (u.rows() != h.rows() || u.cols() != d) throw InvalidArgument("mse_matrix_ul: receive filter shape mismatch");
  const CMat err = u.adjoint() * h * bf.p[k] - identity(d);
  const CMat interference = uplink_covariance(eff, bf, noise) - outer(h, bf.p[k]);
  return err * err.adjoint() + u.adjoint() * interference * u;
}

CMat mse_matrix_dl(const EffectiveCsi& eff, const BeamformerSet& bf, const WmmseAux& aux, int l, double noise) {
  const CMat& u = aux.u_dl[l];
  const CMat& h = eff.h_dl[l];
  const auto d = bf.f[l].cols();
  if (u.rows() != h.rows() || u.cols() != d) throw InvalidArgument("mse_matrix_dl: receive filter shape mismatch");
  const CMat err = u.adjoint() * h * bf.f[l] - identity(d);
  const CMat interference = downlink_covariance(eff, bf, l, noise) - outer(h, bf.f[l]);
  return err * err.adjoint() + u.adjoint() * interference * u;
}

namespace {

double weight_term(const CMat& w, const CMat& e) {
  const CMat herm = 0.5 * (w + w.adjoint());
  Eigen::LLT<CMat> llt(herm);
  if (llt.info() != Eigen::Success) throw DomainError("wmmse_objective: weight matrix is not positive definite");
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < herm.rows(); ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i).real());
  return (w * e).trace().real() - logdet;
}

}  // namespace

double wmmse_objective(const EffectiveCsi& eff, const BeamformerSet& bf, const WmmseAux& aux,
                       const ScenarioConfig& cfg) {
  double obj = 0.0;
  for (int k = 0; k < eff.num_ul(); ++k)
    obj += cfg.ul_weights[k] * weight_term(aux.w_ul[k], mse_matrix_ul(eff, bf, aux, k, cfg.ul_noise));
  for (int l = 0; l < eff.num_dl(); ++l)
    obj += cfg.dl_weights[l] * weight_term(aux.w_dl[l], mse_matrix_dl(eff, bf, aux, l, cfg.dl_noise[l]));
  return obj;
}

std::vector<double> ul_powers(const BeamformerSet& bf) {
  std::vector<double> out;
  for (const auto& p : bf.p) out.push_back(p.squaredNorm());
  return out;
}

double dl_power(const BeamformerSet& bf) {
  double s = 0.0;
  for (const auto& f : bf.f) s += f.squaredNorm();
  return s;
}

BeamformerSet NormalizedProblem::to_normalized(const BeamformerSet& bf) const {
  BeamformerSet out = bf;
  for (std::size_t k = 0; k < out.p.size(); ++k) out.p[k] /= ul_scale[k];
  for (auto& f : out.f) f /= dl_scale;
  return out;
}

BeamformerSet NormalizedProblem::to_physical(const BeamformerSet& bf) const {
  BeamformerSet out = bf;
  for (std::size_t k = 0; k < out.p.size(); ++k) out.p[k] *= ul_scale[k];
  for (auto& f : out.f) f *= dl_scale;
  return out;
}

NormalizedProblem normalize_problem(const EffectiveCsi& eff, const ScenarioConfig& cfg) {
  NormalizedProblem np;
  np.cfg = cfg;
  np.dl_scale = std::sqrt(cfg.ap_power);
  const double su = std::sqrt(cfg.ul_noise);
  for (int k = 0; k < eff.num_ul(); ++k) np.ul_scale.push_back(std::sqrt(cfg.ul_power[k]));
  np.eff.h_si = eff.h_si * (np.dl_scale / su);
  for (int k = 0; k < eff.num_ul(); ++k) np.eff.h_ul.push_back(eff.h_ul[k] * (np.ul_scale[k] / su));
  for (int l = 0; l < eff.num_dl(); ++l)
    np.eff.h_dl.push_back(eff.h_dl[l] * (np.dl_scale / std::sqrt(cfg.dl_noise[l])));
  np.eff.j.resize(eff.j.size());
  for (int k = 0; k < eff.num_ul(); ++k)
    for (int l = 0; l < eff.num_dl(); ++l)
      np.eff.j[k].push_back(eff.j[k][l] * (np.ul_scale[k] / std::sqrt(cfg.dl_noise[l])));
  np.cfg.ul_noise = 1.0;
  np.cfg.dl_noise.assign(cfg.dl_noise.size(), 1.0);
  np.cfg.ul_power.assign(cfg.ul_power.size(), 1.0);
  np.cfg.ap_power = 1.0;
  return np;
}

ScenarioConfig uplink_only(const ScenarioConfig& cfg) {
  ScenarioConfig out = cfg;
  out.num_dl = 0;
  out.dl_antennas.clear();
  out.dl_streams.clear();
  out.dl_positions.clear();
  out.dl_noise.clear();
  out.dl_weights.clear();
  return out;
}

ScenarioConfig downlink_only(const ScenarioConfig& cfg) {
  ScenarioConfig out = cfg;
  out.num_ul = 0;
  out.ul_antennas.clear();
  out.ul_streams.clear();
  out.ul_positions.clear();
  out.ul_power.clear();
  out.ul_weights.clear();
  return out;
}

EffectiveCsi uplink_only(const EffectiveCsi& eff) {
  EffectiveCsi out;
  out.h_ul = eff.h_ul;
  out.j.assign(eff.h_ul.size(), {});
  out.h_si = eff.h_si;
  return out;
}

EffectiveCsi downlink_only(const EffectiveCsi& eff) {
  EffectiveCsi out;
  out.h_dl = eff.h_dl;
  out.h_si = eff.h_si;
  return out;
}

}  // namespace irsfd
