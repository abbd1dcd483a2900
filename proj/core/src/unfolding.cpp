#include "irsfd/unfolding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>

#include "irsfd/autodiff.hpp"
#include "irsfd/numdiff.hpp"
#include "irsfd/system.hpp"

namespace irsfd {

using ad::Tape;
using ad::Var;
using TapeLayer = LayerT<Var, Var>;

CMat dagger(const CMat& a, double threshold) {
  if (a.rows() != a.cols()) throw InvalidArgument("dagger: matrix must be square");
  CMat d = CMat::Zero(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (std::abs(a(i, i)) < threshold)
      throw NumericalError("dagger: diagonal entry " + std::to_string(i) + " is below the singularity threshold");
    d(i, i) = 1.0 / a(i, i);
  }
  return d;
}

CMat inverse_approx(const CMat& a, const CMat& x, const CMat& y, const CMat& z, double threshold) {
  return dagger(a, threshold) * x + a * y + z;
}

CMat normalized_inverse_approx(const CMat& a, const CMat& x, const CMat& y, const CMat& z, double threshold) {
  const double s = a.norm() / std::sqrt(static_cast<double>(a.rows()));
  if (!(s > 0.0)) throw NumericalError("normalized_inverse_approx: zero matrix");
  return inverse_approx(a / s, x, y, z, threshold) / s;
}

namespace {

SabnLayer identity_layer(const ScenarioConfig& cfg) {
  SabnLayer layer;
  auto eye = [](int n) { return CMat::Identity(n, n); };
  auto zero = [](int r, int c) { return CMat::Zero(r, c); };
  for (int k = 0; k < cfg.num_ul; ++k) {
    const int m = cfg.ul_antennas[k];
    const int d = cfg.ul_streams[k];
    layer.xu_ul.push_back(eye(cfg.nr));
    layer.yu_ul.push_back(zero(cfg.nr, cfg.nr));
    layer.zu_ul.push_back(zero(cfg.nr, cfg.nr));
    layer.ou_ul.push_back(zero(cfg.nr, d));
    layer.xw_ul.push_back(eye(d));
    layer.yw_ul.push_back(zero(d, d));
    layer.zw_ul.push_back(zero(d, d));
    layer.xp.push_back(eye(m));
    layer.yp.push_back(zero(m, m));
    layer.zp.push_back(zero(m, m));
    layer.op.push_back(zero(m, d));
    layer.lambda.push_back(1e-3);
  }
  for (int l = 0; l < cfg.num_dl; ++l) {
    const int m = cfg.dl_antennas[l];
    const int d = cfg.dl_streams[l];
    layer.xu_dl.push_back(eye(m));
    layer.yu_dl.push_back(zero(m, m));
    layer.zu_dl.push_back(zero(m, m));
    layer.ou_dl.push_back(zero(m, d));
    layer.xw_dl.push_back(eye(d));
    layer.yw_dl.push_back(zero(d, d));
    layer.zw_dl.push_back(zero(d, d));
    layer.xf.push_back(eye(cfg.nt));
    layer.yf.push_back(zero(cfg.nt, cfg.nt));
    layer.zf.push_back(zero(cfg.nt, cfg.nt));
    layer.of.push_back(zero(cfg.nt, d));
  }
  layer.mu = 1e-3;
  return layer;
}

ScenarioConfig unit_config(const ScenarioConfig& cfg) {
  ScenarioConfig n = cfg;
  n.ul_noise = 1.0;
  n.dl_noise.assign(cfg.dl_noise.size(), 1.0);
  n.ul_power.assign(cfg.ul_power.size(), 1.0);
  n.ap_power = 1.0;
  return n;
}

}  // namespace

std::size_t SabnParams::real_size() const {
  std::size_t n = 0;
  for (const auto& layer : layers)
    SabnLayer::visit(layer, [&](const CMat& m) { n += 2 * static_cast<std::size_t>(m.size()); },
                     [&](const double&) { ++n; });
  return n;
}

void SabnParams::check(const ScenarioConfig& cfg) const {
  const SabnLayer ref = identity_layer(cfg);
  const auto members = SabnLayer::matrix_members();
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const SabnLayer& layer = layers[m];
    for (auto member : members) {
      const auto& got = layer.*member;
      const auto& want = ref.*member;
      if (got.size() != want.size())
        throw InvalidArgument("SabnParams: layer " + std::to_string(m) + " has a wrong user count");
      for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i].rows() != want[i].rows() || got[i].cols() != want[i].cols())
          throw InvalidArgument("SabnParams: layer " + std::to_string(m) + " has a wrong tensor shape");
    }
    if (layer.lambda.size() != ref.lambda.size())
      throw InvalidArgument("SabnParams: layer " + std::to_string(m) + " has a wrong multiplier count");
  }
}

SabnParams init_sabn(const ScenarioConfig& cfg, int layers) {
  if (layers < 1) throw InvalidArgument("init_sabn: at least one layer is required");
  SabnParams p;
  p.layers.assign(static_cast<std::size_t>(layers), identity_layer(cfg));
  return p;
}

std::pair<LpbnParams, SabnParams> init_params(const ScenarioConfig& cfg, int layers, Rng& rng) {
  LpbnParams lp;
  lp.theta = random_phases(cfg.irs_elements, rng);
  return {lp, init_sabn(cfg, layers)};
}

SabnParams zeros_like(const SabnParams& p) {
  SabnParams z = p;
  for (auto& layer : z.layers) SabnLayer::visit(layer, [](CMat& m) { m.setZero(); }, [](double& s) { s = 0.0; });
  return z;
}

std::vector<double> flatten(const SabnParams& p) {
  std::vector<double> out;
  out.reserve(p.real_size());
  for (const auto& layer : p.layers)
    SabnLayer::visit(
        layer,
        [&](const CMat& m) {
          for (Eigen::Index i = 0; i < m.size(); ++i) {
            out.push_back(m.data()[i].real());
            out.push_back(m.data()[i].imag());
          }
        },
        [&](const double& s) { out.push_back(s); });
  return out;
}

void unflatten(SabnParams& p, const std::vector<double>& x) {
  if (x.size() != p.real_size()) throw InvalidArgument("unflatten: length mismatch");
  std::size_t pos = 0;
  for (auto& layer : p.layers)
    SabnLayer::visit(
        layer,
        [&](CMat& m) {
          for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = Complex(x[pos], x[pos + 1]);
            pos += 2;
          }
        },
        [&](double& s) { s = x[pos++]; });
}

EffectiveCsi lpbn_forward(const FullCsi& csi, const LpbnParams& params) {
  return effective_channels(csi, params.theta);
}

BeamformerSet mrt_init(const EffectiveCsi& eff, const ScenarioConfig& cfg) {
  BeamformerSet bf;
  for (int k = 0; k < eff.num_ul(); ++k) {
    const CMat& h = eff.h_ul[k];
    CMat p = (h.adjoint() * h).leftCols(cfg.ul_streams[k]);
    const double n = p.norm();
    if (n == 0.0) throw NumericalError("mrt_init: uplink channel is zero");
    bf.p.push_back(p * (std::sqrt(cfg.ul_power[k]) / n));
  }
  double total = 0.0;
  for (int l = 0; l < eff.num_dl(); ++l) {
    bf.f.push_back(eff.h_dl[l].adjoint().leftCols(cfg.dl_streams[l]));
    total += bf.f.back().squaredNorm();
  }
  if (eff.num_dl() > 0 && total == 0.0) throw NumericalError("mrt_init: downlink channels are zero");
  for (auto& f : bf.f) f *= std::sqrt(cfg.ap_power / total);
  return bf;
}

double LayerDeviation::max() const { return std::max({u_ul, u_dl, w_ul, w_dl, p, f}); }

namespace {

struct TapeCsi {
  std::vector<Var> h_ul;
  std::vector<Var> h_dl;
  std::vector<std::vector<Var>> j;
  Var h_si;
  int num_ul() const { return static_cast<int>(h_ul.size()); }
  int num_dl() const { return static_cast<int>(h_dl.size()); }
};

struct TapeBf {
  std::vector<Var> p;
  std::vector<Var> f;
};

// Intermediate quantities of one unfolded layer, kept for inspection.
struct LayerRecord {
  Var a_ul;
  std::vector<Var> a_dl, u_ul, u_dl, e_ul, e_dl, w_ul, w_dl, a_p, p_raw, f_raw;
  Var a_f;
};

TapeCsi constant_csi(Tape& t, const EffectiveCsi& eff) {
  TapeCsi c;
  for (const auto& h : eff.h_ul) c.h_ul.push_back(t.constant(h));
  for (const auto& h : eff.h_dl) c.h_dl.push_back(t.constant(h));
  c.j.resize(eff.h_ul.size());
  for (int k = 0; k < eff.num_ul(); ++k)
    for (int l = 0; l < eff.num_dl(); ++l) c.j[k].push_back(t.constant(eff.j[k][l]));
  c.h_si = t.constant(eff.h_si);
  return c;
}

// Effective channels of `csi` at phases `theta` (a real column vector on
// the tape), rescaled to unit noise and unit budgets.
TapeCsi composed_csi(Tape& t, const FullCsi& csi, Var theta, const ScenarioConfig& cfg) {
  const Var phi = t.exp_j(theta);
  TapeCsi c;
  const double su = std::sqrt(cfg.ul_noise);
  const Var v_ul_phi = t.mul_diag(t.constant(csi.v_ul), phi);
  const Var v_dl = t.constant(csi.v_dl);
  std::vector<Var> g_ul;
  for (int k = 0; k < csi.num_ul(); ++k) {
    g_ul.push_back(t.constant(csi.g_ul[k]));
    const Var h = t.add(t.constant(csi.h_ul[k]), t.matmul(v_ul_phi, g_ul.back()));
    c.h_ul.push_back(t.scale(h, std::sqrt(cfg.ul_power[k]) / su));
  }
  c.j.resize(csi.h_ul.size());
  for (int l = 0; l < csi.num_dl(); ++l) {
    const double sd = std::sqrt(cfg.dl_noise[l]);
    const Var g_dl_phi = t.mul_diag(t.constant(csi.g_dl[l]), phi);
    const Var h = t.add(t.constant(csi.h_dl[l]), t.matmul(g_dl_phi, v_dl));
    c.h_dl.push_back(t.scale(h, std::sqrt(cfg.ap_power) / sd));
    for (int k = 0; k < csi.num_ul(); ++k) {
      const Var jv = t.add(t.constant(csi.j[k][l]), t.matmul(g_dl_phi, g_ul[k]));
      c.j[k].push_back(t.scale(jv, std::sqrt(cfg.ul_power[k]) / sd));
    }
  }
  c.h_si = t.constant(csi.h_si * (std::sqrt(cfg.ap_power) / su));
  return c;
}

TapeLayer layer_to_tape(Tape& t, const SabnLayer& layer, bool leaves) {
  TapeLayer out;
  const auto src = SabnLayer::matrix_members();
  const auto dst = TapeLayer::matrix_members();
  for (std::size_t i = 0; i < src.size(); ++i)
    for (const auto& m : layer.*src[i]) (out.*dst[i]).push_back(leaves ? t.leaf(m) : t.constant(m));
  for (double s : layer.lambda) out.lambda.push_back(leaves ? t.leaf_scalar(s) : t.constant_scalar(s));
  out.mu = leaves ? t.leaf_scalar(layer.mu) : t.constant_scalar(layer.mu);
  return out;
}

void layer_grad(const Tape& t, const TapeLayer& vars, SabnLayer& grad) {
  const auto src = TapeLayer::matrix_members();
  const auto dst = SabnLayer::matrix_members();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto& vs = vars.*src[i];
    auto& gs = grad.*dst[i];
    for (std::size_t j = 0; j < vs.size(); ++j) gs[j] += t.grad(vs[j]);
  }
  for (std::size_t k = 0; k < vars.lambda.size(); ++k) grad.lambda[k] += t.grad(vars.lambda[k])(0, 0).real();
  grad.mu += t.grad(vars.mu)(0, 0).real();
}

class Builder {
 public:
  Builder(Tape& t, const ScenarioConfig& cfg, const UnfoldingConfig& ucfg) : t_(t), cfg_(cfg), ucfg_(ucfg) {}

  Var eye(Eigen::Index n) {
    auto it = eye_.find(n);
    if (it != eye_.end()) return it->second;
    const Var v = t_.constant(CMat::Identity(n, n));
    eye_.emplace(n, v);
    return v;
  }

  Var outer(Var h, Var x) {
    const Var hx = t_.matmul(h, x);
    return t_.matmul(hx, t_.adjoint(hx));
  }

  // H^H U W U^H H
  Var sandwich(Var h, Var u, Var w) {
    const Var q = t_.matmul(t_.adjoint(u), h);
    return t_.matmul(t_.adjoint(q), t_.matmul(w, q));
  }

  Var ul_cov(const TapeCsi& c, const TapeBf& bf) {
    const auto nr = t_.value(c.h_si).rows();
    Var a = t_.constant(cfg_.ul_noise * CMat::Identity(nr, nr));
    for (int k = 0; k < c.num_ul(); ++k) a = t_.add(a, outer(c.h_ul[k], bf.p[k]));
    for (int l = 0; l < c.num_dl(); ++l) a = t_.add(a, outer(c.h_si, bf.f[l]));
    return a;
  }

  Var dl_cov(const TapeCsi& c, const TapeBf& bf, int l) {
    const auto m = t_.value(c.h_dl[l]).rows();
    Var a = t_.constant(cfg_.dl_noise[l] * CMat::Identity(m, m));
    for (int lp = 0; lp < c.num_dl(); ++lp) a = t_.add(a, outer(c.h_dl[l], bf.f[lp]));
    for (int k = 0; k < c.num_ul(); ++k) a = t_.add(a, outer(c.j[k][l], bf.p[k]));
    return a;
  }

  // E = I - U^H H X - (U^H H X)^H + U^H A U, with A the total covariance.
  Var mse(Var u, Var h, Var x, Var cov) {
    const Var uhx = t_.matmul(t_.adjoint(u), t_.matmul(h, x));
    const Var quad = t_.matmul(t_.adjoint(u), t_.matmul(cov, u));
    const Var e = t_.sub(t_.sub(quad, uhx), t_.adjoint(uhx));
    return t_.add_identity(e, 1.0);
  }

  // A^dagger X + A Y / s^2 + Z / s with s = ||A||_F / sqrt(n).
  // When `inv_scale` is given it receives 1/s.
  Var approx_inv(Var a, Var x, Var y, Var z, Var* inv_scale = nullptr) {
    const auto n = t_.value(a).rows();
    const Var s2 = t_.scale(t_.frob2(a), 1.0 / static_cast<double>(n));
    if (!(t_.scalar(s2) > 0.0)) throw NumericalError("unfolded layer: inverse argument is zero");
    const Var r = t_.rsqrt(s2);
    if (inv_scale) *inv_scale = r;
    auto over_s = [&](Var m) { return t_.scale_by(m, r); };
    const Var d = t_.dagger(a, ucfg_.dagger_threshold);
    return t_.add(t_.add(t_.matmul(d, x), over_s(over_s(t_.matmul(a, y)))), over_s(z));
  }

  // Precoder offsets are measured in units of ||rhs||_F / s, the size of
  // the approximate-inverse term they are added to.
  Var offset(Var o, Var rhs, Var inv_scale) {
    const Var n2 = t_.frob2(rhs);
    if (t_.scalar(n2) == 0.0) return t_.scale(o, 0.0);
    const Var norm = t_.scale_by(n2, t_.rsqrt(n2));
    return t_.scale_by(t_.scale_by(o, inv_scale), norm);
  }

  Var scale_single(Var p, double budget) {
    const Var s = t_.frob2(p);
    if (t_.scalar(s) == 0.0) return p;
    return t_.scale(t_.scale_by(p, t_.rsqrt(s)), std::sqrt(budget));
  }

  std::vector<Var> scale_joint(const std::vector<Var>& fs, double budget) {
    if (fs.empty()) return fs;
    std::vector<Var> norms;
    for (Var f : fs) norms.push_back(t_.frob2(f));
    const Var s = t_.sum(norms);
    if (t_.scalar(s) == 0.0) return fs;
    const Var r = t_.rsqrt(s);
    std::vector<Var> out;
    for (Var f : fs) out.push_back(t_.scale(t_.scale_by(f, r), std::sqrt(budget)));
    return out;
  }

  Var ap_matrix(const TapeCsi& c, int k, const std::vector<Var>& u_ul, const std::vector<Var>& w_ul,
                const std::vector<Var>& u_dl, const std::vector<Var>& w_dl) {
    const auto m = t_.value(c.h_ul[k]).cols();
    Var a = t_.constant(CMat::Zero(m, m));
    for (int kp = 0; kp < c.num_ul(); ++kp)
      a = t_.add(a, t_.scale(sandwich(c.h_ul[k], u_ul[kp], w_ul[kp]), cfg_.ul_weights[kp]));
    for (int l = 0; l < c.num_dl(); ++l)
      a = t_.add(a, t_.scale(sandwich(c.j[k][l], u_dl[l], w_dl[l]), cfg_.dl_weights[l]));
    return a;
  }

  Var af_matrix(const TapeCsi& c, const std::vector<Var>& u_ul, const std::vector<Var>& w_ul,
                const std::vector<Var>& u_dl, const std::vector<Var>& w_dl) {
    const auto nt = t_.value(c.h_si).cols();
    Var a = t_.constant(CMat::Zero(nt, nt));
    for (int l = 0; l < c.num_dl(); ++l)
      a = t_.add(a, t_.scale(sandwich(c.h_dl[l], u_dl[l], w_dl[l]), cfg_.dl_weights[l]));
    for (int k = 0; k < c.num_ul(); ++k)
      a = t_.add(a, t_.scale(sandwich(c.h_si, u_ul[k], w_ul[k]), cfg_.ul_weights[k]));
    return a;
  }

  TapeBf layer(const TapeCsi& c, const TapeBf& prev, const TapeLayer& L, LayerRecord* rec) {
    LayerRecord r;
    r.a_ul = ul_cov(c, prev);
    for (int k = 0; k < c.num_ul(); ++k) {
      Var is;
      const Var inv = approx_inv(r.a_ul, L.xu_ul[k], L.yu_ul[k], L.zu_ul[k], &is);
      r.u_ul.push_back(t_.add(t_.matmul(inv, t_.matmul(c.h_ul[k], prev.p[k])), t_.scale_by(L.ou_ul[k], is)));
    }
    for (int l = 0; l < c.num_dl(); ++l) {
      r.a_dl.push_back(dl_cov(c, prev, l));
      Var is;
      const Var inv = approx_inv(r.a_dl[l], L.xu_dl[l], L.yu_dl[l], L.zu_dl[l], &is);
      r.u_dl.push_back(t_.add(t_.matmul(inv, t_.matmul(c.h_dl[l], prev.f[l])), t_.scale_by(L.ou_dl[l], is)));
    }
    for (int k = 0; k < c.num_ul(); ++k) {
      r.e_ul.push_back(mse(r.u_ul[k], c.h_ul[k], prev.p[k], r.a_ul));
      r.w_ul.push_back(approx_inv(r.e_ul[k], L.xw_ul[k], L.yw_ul[k], L.zw_ul[k]));
    }
    for (int l = 0; l < c.num_dl(); ++l) {
      r.e_dl.push_back(mse(r.u_dl[l], c.h_dl[l], prev.f[l], r.a_dl[l]));
      r.w_dl.push_back(approx_inv(r.e_dl[l], L.xw_dl[l], L.yw_dl[l], L.zw_dl[l]));
    }
    TapeBf out;
    for (int k = 0; k < c.num_ul(); ++k) {
      r.a_p.push_back(ap_matrix(c, k, r.u_ul, r.w_ul, r.u_dl, r.w_dl));
      const Var b = t_.add_identity(r.a_p[k], L.lambda[k]);
      Var is;
      const Var inv = approx_inv(b, L.xp[k], L.yp[k], L.zp[k], &is);
      const Var rhs = t_.matmul(t_.adjoint(c.h_ul[k]), t_.matmul(r.u_ul[k], r.w_ul[k]));
      r.p_raw.push_back(t_.add(t_.scale(t_.matmul(inv, rhs), cfg_.ul_weights[k]), offset(L.op[k], rhs, is)));
      out.p.push_back(scale_single(r.p_raw[k], cfg_.ul_power[k]));
    }
    if (c.num_dl() > 0) {
      r.a_f = af_matrix(c, r.u_ul, r.w_ul, r.u_dl, r.w_dl);
      const Var b = t_.add_identity(r.a_f, L.mu);
      for (int l = 0; l < c.num_dl(); ++l) {
        Var is;
        const Var inv = approx_inv(b, L.xf[l], L.yf[l], L.zf[l], &is);
        const Var rhs = t_.matmul(t_.adjoint(c.h_dl[l]), t_.matmul(r.u_dl[l], r.w_dl[l]));
        r.f_raw.push_back(t_.add(t_.scale(t_.matmul(inv, rhs), cfg_.dl_weights[l]), offset(L.of[l], rhs, is)));
      }
      out.f = scale_joint(r.f_raw, cfg_.ap_power);
    }
    if (rec) *rec = std::move(r);
    return out;
  }

  // One exact block-coordinate iteration: U, W, then P and F through the
  // multiplier nodes.
  TapeBf exact_layer(const TapeCsi& c, const TapeBf& prev) {
    std::vector<Var> u_ul, u_dl, w_ul, w_dl;
    if (c.num_ul() > 0) {
      const Var a = ul_cov(c, prev);
      const Var a_inv = t_.inverse(a);
      for (int k = 0; k < c.num_ul(); ++k) u_ul.push_back(t_.matmul(a_inv, t_.matmul(c.h_ul[k], prev.p[k])));
      for (int k = 0; k < c.num_ul(); ++k) w_ul.push_back(t_.inverse(mse(u_ul[k], c.h_ul[k], prev.p[k], a)));
    }
    for (int l = 0; l < c.num_dl(); ++l) {
      const Var a = dl_cov(c, prev, l);
      u_dl.push_back(t_.matmul(t_.inverse(a), t_.matmul(c.h_dl[l], prev.f[l])));
      w_dl.push_back(t_.inverse(mse(u_dl[l], c.h_dl[l], prev.f[l], a)));
    }
    TapeBf out;
    for (int k = 0; k < c.num_ul(); ++k) {
      const Var ap = ap_matrix(c, k, u_ul, w_ul, u_dl, w_dl);
      const Var rhs = t_.scale(t_.matmul(t_.adjoint(c.h_ul[k]), t_.matmul(u_ul[k], w_ul[k])), cfg_.ul_weights[k]);
      const Var lam = t_.kkt_multiplier(ap, {rhs}, cfg_.ul_power[k], ucfg_.output_bcd);
      out.p.push_back(t_.matmul(t_.inverse(t_.add_identity(ap, lam)), rhs));
    }
    if (c.num_dl() > 0) {
      const Var af = af_matrix(c, u_ul, w_ul, u_dl, w_dl);
      std::vector<Var> rhs;
      for (int l = 0; l < c.num_dl(); ++l)
        rhs.push_back(
            t_.scale(t_.matmul(t_.adjoint(c.h_dl[l]), t_.matmul(u_dl[l], w_dl[l])), cfg_.dl_weights[l]));
      const Var mu = t_.kkt_multiplier(af, rhs, cfg_.ap_power, ucfg_.output_bcd);
      const Var inv = t_.inverse(t_.add_identity(af, mu));
      for (int l = 0; l < c.num_dl(); ++l) out.f.push_back(t_.matmul(inv, rhs[l]));
    }
    return out;
  }

  TapeBf matched_filter(const TapeCsi& c) {
    TapeBf bf;
    for (int k = 0; k < c.num_ul(); ++k) {
      const auto m = t_.value(c.h_ul[k]).cols();
      const Var sel = t_.constant(CMat::Identity(m, cfg_.ul_streams[k]));
      const Var g = t_.matmul(t_.adjoint(c.h_ul[k]), c.h_ul[k]);
      bf.p.push_back(scale_single(t_.matmul(g, sel), cfg_.ul_power[k]));
    }
    std::vector<Var> fs;
    for (int l = 0; l < c.num_dl(); ++l) {
      const auto m = t_.value(c.h_dl[l]).rows();
      const Var sel = t_.constant(CMat::Identity(m, cfg_.dl_streams[l]));
      fs.push_back(t_.matmul(t_.adjoint(c.h_dl[l]), sel));
    }
    bf.f = scale_joint(fs, cfg_.ap_power);
    return bf;
  }

  Var sum_rate(const TapeCsi& c, const TapeBf& bf) {
    std::vector<Var> terms;
    const double inv_ln2 = 1.0 / std::numbers::ln2;
    // Rate of block `own` = log det with it minus log det without it.
    auto rate = [&](const std::vector<Var>& blocks, std::size_t own, double noise) {
      std::vector<Var> rest;
      for (std::size_t i = 0; i < blocks.size(); ++i)
        if (i != own) rest.push_back(blocks[i]);
      const Var all = t_.logdet_gram(blocks, noise);
      if (rest.empty()) {
        const auto n = t_.value(blocks[own]).rows();
        return t_.sub(all, t_.constant_scalar(static_cast<double>(n) * std::log(noise)));
      }
      return t_.sub(all, t_.logdet_gram(rest, noise));
    };
    if (c.num_ul() > 0) {
      std::vector<Var> blocks;
      for (int k = 0; k < c.num_ul(); ++k) blocks.push_back(t_.matmul(c.h_ul[k], bf.p[k]));
      for (int l = 0; l < c.num_dl(); ++l) blocks.push_back(t_.matmul(c.h_si, bf.f[l]));
      for (int k = 0; k < c.num_ul(); ++k)
        terms.push_back(t_.scale(rate(blocks, static_cast<std::size_t>(k), cfg_.ul_noise), cfg_.ul_weights[k] * inv_ln2));
    }
    for (int l = 0; l < c.num_dl(); ++l) {
      std::vector<Var> blocks;
      for (int lp = 0; lp < c.num_dl(); ++lp) blocks.push_back(t_.matmul(c.h_dl[l], bf.f[lp]));
      for (int k = 0; k < c.num_ul(); ++k) blocks.push_back(t_.matmul(c.j[k][l], bf.p[k]));
      terms.push_back(t_.scale(rate(blocks, static_cast<std::size_t>(l), cfg_.dl_noise[l]), cfg_.dl_weights[l] * inv_ln2));
    }
    return t_.sum(terms);
  }

  TapeBf network(const TapeCsi& c, const TapeBf& init, const std::vector<TapeLayer>& layers,
                 std::vector<TapeBf>* per_layer) {
    TapeBf cur = init;
    for (const auto& L : layers) {
      cur = layer(c, cur, L, nullptr);
      if (per_layer) per_layer->push_back(cur);
    }
    return exact_layer(c, cur);
  }

 private:
  Tape& t_;
  const ScenarioConfig& cfg_;
  const UnfoldingConfig& ucfg_;
  std::map<Eigen::Index, Var> eye_;
};

Var theta_var(Tape& t, const PhaseVector& theta, bool leaf) {
  const CMat th = theta.theta.cast<Complex>();
  return leaf ? t.leaf(th) : t.constant(th);
}

BeamformerSet read_bf(const Tape& t, const TapeBf& bf) {
  BeamformerSet out;
  for (Var v : bf.p) out.p.push_back(t.value(v));
  for (Var v : bf.f) out.f.push_back(t.value(v));
  return out;
}

TapeBf constant_bf(Tape& t, const BeamformerSet& bf) {
  TapeBf out;
  for (const auto& p : bf.p) out.p.push_back(t.constant(p));
  for (const auto& f : bf.f) out.f.push_back(t.constant(f));
  return out;
}

BeamformerSet unit_to_physical(const BeamformerSet& bf, const ScenarioConfig& cfg) {
  BeamformerSet out = bf;
  for (std::size_t k = 0; k < out.p.size(); ++k) out.p[k] *= std::sqrt(cfg.ul_power[k]);
  for (auto& f : out.f) f *= std::sqrt(cfg.ap_power);
  return out;
}

std::vector<TapeLayer> params_to_tape(Tape& t, const SabnParams& p, bool leaves) {
  std::vector<TapeLayer> out;
  for (const auto& layer : p.layers) out.push_back(layer_to_tape(t, layer, leaves));
  return out;
}

void check_batch(const std::vector<FullCsi>& batch, const LpbnParams& lpbn, const SabnParams& sabn,
                 const ScenarioConfig& cfg) {
  if (batch.empty()) throw InvalidArgument("unfolding: empty batch");
  if (lpbn.theta.size() != cfg.irs_elements) throw InvalidArgument("unfolding: theta length does not match T");
  sabn.check(cfg);
}

}  // namespace

SabnOutput sabn_forward(const EffectiveCsi& eff, const SabnParams& params, const BeamformerSet& init,
                        const ScenarioConfig& cfg, const UnfoldingConfig& ucfg) {
  params.check(cfg);
  const NormalizedProblem np = normalize_problem(eff, cfg);
  Tape t;
  Builder b(t, np.cfg, ucfg);
  const TapeCsi c = constant_csi(t, np.eff);
  std::vector<TapeBf> per_layer;
  const TapeBf out = b.network(c, constant_bf(t, np.to_normalized(init)), params_to_tape(t, params, false), &per_layer);
  SabnOutput res;
  res.bf = np.to_physical(read_bf(t, out));
  for (const auto& layer : per_layer) res.layer_outputs.push_back(np.to_physical(read_bf(t, layer)));
  return res;
}

SabnOutput network_forward(const FullCsi& csi, const LpbnParams& lpbn, const SabnParams& sabn,
                           const ScenarioConfig& cfg, const UnfoldingConfig& ucfg) {
  check_batch({csi}, lpbn, sabn, cfg);
  const ScenarioConfig ucfg_scen = unit_config(cfg);
  Tape t;
  Builder b(t, ucfg_scen, ucfg);
  const TapeCsi c = composed_csi(t, csi, theta_var(t, lpbn.theta, false), cfg);
  std::vector<TapeBf> per_layer;
  const TapeBf out = b.network(c, b.matched_filter(c), params_to_tape(t, sabn, false), &per_layer);
  SabnOutput res;
  res.bf = unit_to_physical(read_bf(t, out), cfg);
  for (const auto& layer : per_layer) res.layer_outputs.push_back(unit_to_physical(read_bf(t, layer), cfg));
  return res;
}

double loss(const LpbnParams& lpbn, const SabnParams& sabn, const std::vector<FullCsi>& batch,
            const ScenarioConfig& cfg, const UnfoldingConfig& ucfg) {
  check_batch(batch, lpbn, sabn, cfg);
  const ScenarioConfig unit = unit_config(cfg);
  double total = 0.0;
  for (const auto& csi : batch) {
    Tape t;
    Builder b(t, unit, ucfg);
    const TapeCsi c = composed_csi(t, csi, theta_var(t, lpbn.theta, false), cfg);
    const TapeBf out = b.network(c, b.matched_filter(c), params_to_tape(t, sabn, false), nullptr);
    total += t.scalar(b.sum_rate(c, out));
  }
  return -total / static_cast<double>(batch.size());
}

UnfoldingGradients backward(const LpbnParams& lpbn, const SabnParams& sabn, const std::vector<FullCsi>& batch,
                            const ScenarioConfig& cfg, ThetaGradient mode, const UnfoldingConfig& ucfg) {
  check_batch(batch, lpbn, sabn, cfg);
  const ScenarioConfig unit = unit_config(cfg);
  const double w = 1.0 / static_cast<double>(batch.size());
  UnfoldingGradients g;
  g.theta = RVec::Zero(lpbn.theta.size());
  g.psi = zeros_like(sabn);
  for (const auto& csi : batch) {
    Tape t;
    Builder b(t, unit, ucfg);
    const bool full = mode == ThetaGradient::Full;
    const Var theta = theta_var(t, lpbn.theta, full);
    const TapeCsi c = composed_csi(t, csi, theta, cfg);
    const std::vector<TapeLayer> layers = params_to_tape(t, sabn, full);
    const TapeBf out = b.network(c, b.matched_filter(c), layers, nullptr);
    if (full) {
      const Var rate = b.sum_rate(c, out);
      g.loss -= w * t.scalar(rate);
      t.backward(rate);
      g.theta -= w * t.grad(theta).real();
      SabnParams sample = zeros_like(sabn);
      for (std::size_t m = 0; m < layers.size(); ++m) layer_grad(t, layers[m], sample.layers[m]);
      for (std::size_t m = 0; m < layers.size(); ++m) {
        const auto members = SabnLayer::matrix_members();
        for (auto member : members)
          for (std::size_t i = 0; i < (g.psi.layers[m].*member).size(); ++i)
            (g.psi.layers[m].*member)[i] -= w * (sample.layers[m].*member)[i];
        for (std::size_t k = 0; k < g.psi.layers[m].lambda.size(); ++k)
          g.psi.layers[m].lambda[k] -= w * sample.layers[m].lambda[k];
        g.psi.layers[m].mu -= w * sample.layers[m].mu;
      }
    } else {
      // Second tape: the same channels with the network output frozen.
      const BeamformerSet frozen = read_bf(t, out);
      Tape d;
      Builder bd(d, unit, ucfg);
      const Var th = theta_var(d, lpbn.theta, true);
      const TapeCsi cd = composed_csi(d, csi, th, cfg);
      const Var rate = bd.sum_rate(cd, constant_bf(d, frozen));
      g.loss -= w * d.scalar(rate);
      d.backward(rate);
      g.theta -= w * d.grad(th).real();
    }
  }
  if (!g.theta.allFinite()) throw NumericalError("backward: non-finite theta gradient");
  bool finite = true;
  for (const auto& layer : g.psi.layers)
    SabnLayer::visit(
        layer, [&](const CMat& m) { finite = finite && m.allFinite(); },
        [&](const double& s) { finite = finite && std::isfinite(s); });
  if (!finite) throw NumericalError("backward: non-finite network gradient");
  return g;
}

LayerDeviation layer_deviation(const EffectiveCsi& eff, const SabnLayer& layer, const BeamformerSet& state,
                               const ScenarioConfig& cfg, const UnfoldingConfig& ucfg) {
  Tape t;
  Builder b(t, cfg, ucfg);
  const TapeCsi c = constant_csi(t, eff);
  const TapeBf prev = constant_bf(t, state);
  LayerRecord r;
  b.layer(c, prev, layer_to_tape(t, layer, false), &r);

  auto rel = [](double num, double den) { return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num); };
  LayerDeviation dev;
  double num = 0.0;
  double den = 0.0;
  auto acc = [&](const CMat& got, const CMat& want) {
    num += (got - want).squaredNorm();
    den += want.squaredNorm();
  };

  for (int k = 0; k < eff.num_ul(); ++k)
    acc(t.value(r.u_ul[k]), t.value(r.a_ul).fullPivLu().solve(eff.h_ul[k] * state.p[k]));
  dev.u_ul = rel(num, den);
  num = den = 0.0;
  for (int l = 0; l < eff.num_dl(); ++l)
    acc(t.value(r.u_dl[l]), t.value(r.a_dl[l]).fullPivLu().solve(eff.h_dl[l] * state.f[l]));
  dev.u_dl = rel(num, den);
  num = den = 0.0;
  for (int k = 0; k < eff.num_ul(); ++k) acc(t.value(r.w_ul[k]), t.value(r.e_ul[k]).inverse());
  dev.w_ul = rel(num, den);
  num = den = 0.0;
  for (int l = 0; l < eff.num_dl(); ++l) acc(t.value(r.w_dl[l]), t.value(r.e_dl[l]).inverse());
  dev.w_dl = rel(num, den);
  num = den = 0.0;
  for (int k = 0; k < eff.num_ul(); ++k) {
    CMat a = t.value(r.a_p[k]);
    a.diagonal().array() += layer.lambda[k];
    const CMat rhs = cfg.ul_weights[k] * eff.h_ul[k].adjoint() * t.value(r.u_ul[k]) * t.value(r.w_ul[k]);
    acc(t.value(r.p_raw[k]), a.fullPivLu().solve(rhs));
  }
  dev.p = rel(num, den);
  num = den = 0.0;
  if (eff.num_dl() > 0) {
    CMat a = t.value(r.a_f);
    a.diagonal().array() += layer.mu;
    for (int l = 0; l < eff.num_dl(); ++l) {
      const CMat rhs = cfg.dl_weights[l] * eff.h_dl[l].adjoint() * t.value(r.u_dl[l]) * t.value(r.w_dl[l]);
      acc(t.value(r.f_raw[l]), a.fullPivLu().solve(rhs));
    }
  }
  dev.f = rel(num, den);
  return dev;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw InvalidArgument("TrainConfig: learning_rate must be >= 0");
  if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size must be >= 1");
  if (epochs < 0) throw InvalidArgument("TrainConfig: epochs must be >= 0");
  if (layers < 1) throw InvalidArgument("TrainConfig: layers must be >= 1");
  if (eval_every < 0) throw InvalidArgument("TrainConfig: eval_every must be >= 0");
  ssca.validate();
}

double network_average_rate(const std::vector<FullCsi>& samples, const LpbnParams& lpbn, const SabnParams& sabn,
                            const ScenarioConfig& cfg, const UnfoldingConfig& ucfg) {
  if (samples.empty()) throw InvalidArgument("network_average_rate: no samples");
  double s = 0.0;
  for (const auto& csi : samples)
    s += weighted_sum_rate(lpbn.theta, network_forward(csi, lpbn, sabn, cfg, ucfg).bf, csi, cfg);
  return s / static_cast<double>(samples.size());
}

namespace {

void sgd_step(SabnParams& p, const SabnParams& g, double lr, double scale) {
  for (std::size_t m = 0; m < p.layers.size(); ++m) {
    auto& pl = p.layers[m];
    const auto& gl = g.layers[m];
    for (auto member : SabnLayer::matrix_members())
      for (std::size_t i = 0; i < (pl.*member).size(); ++i) (pl.*member)[i] -= lr * scale * (gl.*member)[i];
    for (std::size_t k = 0; k < pl.lambda.size(); ++k)
      pl.lambda[k] = std::max(0.0, pl.lambda[k] - lr * scale * gl.lambda[k]);
    pl.mu = std::max(0.0, pl.mu - lr * scale * gl.mu);
  }
}

double psi_norm(const SabnParams& g) {
  double s = 0.0;
  for (const auto& layer : g.layers)
    SabnLayer::visit(layer, [&](const CMat& m) { s += m.squaredNorm(); }, [&](const double& v) { s += v * v; });
  return std::sqrt(s);
}

}  // namespace

TrainResult train(const std::vector<FullCsi>& pool, const TrainConfig& tcfg, const ScenarioConfig& cfg,
                  const std::vector<FullCsi>& heldout, const std::pair<LpbnParams, SabnParams>* start,
                  const UnfoldingConfig& ucfg) {
  tcfg.validate();
  if (pool.empty()) throw InvalidArgument("train: sample pool is empty");
  TrainResult res;
  if (start && start->second.num_layers() > 0) {
    res.lpbn = start->first;
    res.sabn = start->second;
  } else {
    Rng rng(derive_seed(tcfg.seed, 0));
    std::tie(res.lpbn, res.sabn) = init_params(cfg, tcfg.layers, rng);
  }
  res.sabn.check(cfg);

  SurrogateState surrogate;
  surrogate.theta = res.lpbn.theta;
  surrogate.f = RVec::Zero(res.lpbn.theta.size());
  const double theta_lr = tcfg.theta_learning_rate > 0.0 ? tcfg.theta_learning_rate : tcfg.learning_rate;

  std::vector<std::size_t> order(pool.size());
  int step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(tcfg.seed, 1, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(tcfg.batch_size)) {
      std::vector<FullCsi> batch;
      for (std::size_t i = first; i < std::min(order.size(), first + tcfg.batch_size); ++i)
        batch.push_back(pool[order[i]]);

      UnfoldingGradients g;
      try {
        g = backward(res.lpbn, res.sabn, batch, cfg, ThetaGradient::Full, ucfg);
      } catch (const NumericalError& e) {
        throw TrainingError(std::string("train: step ") + std::to_string(step) + ": " + e.what(), res.trace);
      }
      if (!std::isfinite(g.loss))
        throw TrainingError("train: loss diverged at step " + std::to_string(step), res.trace);

      if (tcfg.grad_check && step == 0) {
        const LpbnParams base = res.lpbn;
        auto f = [&](const RVec& th) {
          LpbnParams probe = base;
          probe.theta.theta = th;
          return loss(probe, res.sabn, batch, cfg, ucfg);
        };
        const GradCheckReport rep = grad_check(g.theta, f, base.theta.theta, 1e-5, 1e-4);
        if (!rep.passed)
          throw TrainingError("train: gradient check failed (max relative error " +
                                  std::to_string(rep.max_rel_error) + ")",
                              res.trace);
      }

      double scale = 1.0;
      if (tcfg.max_grad_norm > 0.0) {
        const double n = psi_norm(g.psi);
        if (n > tcfg.max_grad_norm) scale = tcfg.max_grad_norm / n;
      }
      sgd_step(res.sabn, g.psi, tcfg.learning_rate, scale);

      if (tcfg.train_theta) {
        if (tcfg.theta_mode == ThetaMode::Sgd) {
          res.lpbn.theta.theta -= theta_lr * g.theta;
        } else {
          const StepSizes s = step_schedules(step, tcfg.ssca);
          surrogate.theta = res.lpbn.theta;
          surrogate = update_surrogate(surrogate, {g.theta * static_cast<double>(batch.size())}, s.rho);
          const PhaseVector bar = surrogate_minimizer(surrogate.theta, surrogate.f, tcfg.ssca.curvature);
          res.lpbn.theta = long_term_step(surrogate.theta, bar, s.gamma);
        }
      }

      res.trace.step.push_back(step);
      res.trace.loss.push_back(g.loss);
      double held = std::numeric_limits<double>::quiet_NaN();
      if (tcfg.eval_every > 0 && !heldout.empty() && (step + 1) % tcfg.eval_every == 0)
        held = network_average_rate(heldout, res.lpbn, res.sabn, cfg, ucfg);
      res.trace.heldout_rate.push_back(held);
      ++step;
    }
  }
  return res;
}

void write_train_trace_csv(std::ostream& out, const TrainTrace& trace) {
  out << "step,loss,heldout_sum_rate\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < trace.step.size(); ++i) {
    out << trace.step[i] << ',' << trace.loss[i] << ',';
    if (std::isfinite(trace.heldout_rate[i])) out << trace.heldout_rate[i];
    out << '\n';
  }
  out.precision(old);
}

}  // namespace irsfd
