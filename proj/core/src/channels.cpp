#include "irsfd/channels.hpp"

#include <cmath>
#include <numbers>

namespace irsfd {

namespace {

constexpr double kPi = std::numbers::pi;
// First zero of J0; past it the Jakes coefficient is treated as decorrelated.
constexpr double kJ0FirstZero = 2.404825557695773;

Point3 direction(const Point3& from, const Point3& to) {
  const double d = distance(from, to);
  if (!(d > 0.0)) throw InvalidArgument("coincident nodes in scenario geometry");
  return {(to.x - from.x) / d, (to.y - from.y) / d, (to.z - from.z) / d};
}

Point3 negate(const Point3& u) { return {-u.x, -u.y, -u.z}; }

enum class ArrayKind { kUla, kUpa };

CVec array_response(ArrayKind kind, int n, const Point3& u) {
  return kind == ArrayKind::kUla ? ula_response(n, u) : upa_response(n, u);
}

struct Node {
  Point3 pos;
  ArrayKind kind;
};

// Deterministic LoS matrix (rx_n x tx_n) of the tx -> rx link.
CMat los_matrix(const Node& tx, int tx_n, const Node& rx, int rx_n) {
  const Point3 u = direction(tx.pos, rx.pos);
  const CVec a_tx = array_response(tx.kind, tx_n, u);
  const CVec a_rx = array_response(rx.kind, rx_n, negate(u));
  return a_rx * a_tx.adjoint();
}

struct Geometry {
  Node ap_tx, ap_rx, irs;
  std::vector<Node> ul, dl;
};

Geometry nominal_geometry(const ScenarioConfig& cfg) {
  Geometry g{{cfg.ap_position, ArrayKind::kUla},
             {cfg.ap_position, ArrayKind::kUla},
             {cfg.irs_position, ArrayKind::kUpa},
             {},
             {}};
  for (const auto& p : cfg.ul_positions) g.ul.push_back({p, ArrayKind::kUla});
  for (const auto& p : cfg.dl_positions) g.dl.push_back({p, ArrayKind::kUla});
  return g;
}

void displace(std::vector<Node>& users, double radius, Rng& rng) {
  if (radius <= 0.0) return;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& u : users) {
    const double r = radius * std::sqrt(unit(rng));
    const double phi = 2.0 * kPi * unit(rng);
    u.pos.x += r * std::cos(phi);
    u.pos.y += r * std::sin(phi);
  }
}

struct LinkDraw {
  const ScenarioConfig& cfg;
  Rng* rng;  // null: return the mean (LoS) component only

  CMat operator()(const Node& tx, int tx_n, const Node& rx, int rx_n, double exponent,
                  double rician) const {
    const double gain = path_loss(distance(tx.pos, rx.pos), cfg.ref_gain, cfg.ref_distance, exponent);
    const CMat los = los_matrix(tx, tx_n, rx, rx_n);
    if (rng == nullptr) return std::sqrt(gain * rician / (1.0 + rician)) * los;
    return std::sqrt(gain) * rician_channel(los, rician, *rng);
  }
};

FullCsi draw_csi(const ScenarioConfig& cfg, Rng* rng) {
  cfg.validate();
  Geometry geo = nominal_geometry(cfg);
  if (rng != nullptr) {
    displace(geo.ul, cfg.location_radius, *rng);
    displace(geo.dl, cfg.location_radius, *rng);
  }
  const LinkDraw link{cfg, rng};
  const auto& a = cfg.path_loss_exponent;
  const auto& b = cfg.rician_factor;
  const int t = cfg.irs_elements;

  FullCsi csi;
  for (int k = 0; k < cfg.num_ul; ++k)
    csi.h_ul.push_back(link(geo.ul[k], cfg.ul_antennas[k], geo.ap_rx, cfg.nr, a.ap_user, b.ap_user));
  for (int l = 0; l < cfg.num_dl; ++l)
    csi.h_dl.push_back(link(geo.ap_tx, cfg.nt, geo.dl[l], cfg.dl_antennas[l], a.ap_user, b.ap_user));
  for (int k = 0; k < cfg.num_ul; ++k)
    csi.g_ul.push_back(link(geo.ul[k], cfg.ul_antennas[k], geo.irs, t, a.irs_user, b.irs_user));
  for (int l = 0; l < cfg.num_dl; ++l)
    csi.g_dl.push_back(link(geo.irs, t, geo.dl[l], cfg.dl_antennas[l], a.irs_user, b.irs_user));
  csi.v_ul = link(geo.irs, t, geo.ap_rx, cfg.nr, a.ap_irs, b.ap_irs);
  csi.v_dl = link(geo.ap_tx, cfg.nt, geo.irs, t, a.ap_irs, b.ap_irs);
  csi.j.resize(cfg.num_ul);
  for (int k = 0; k < cfg.num_ul; ++k)
    for (int l = 0; l < cfg.num_dl; ++l)
      csi.j[k].push_back(
          link(geo.ul[k], cfg.ul_antennas[k], geo.dl[l], cfg.dl_antennas[l], a.user_user, b.user_user));
  csi.h_si = rng != nullptr ? si_channel(cfg.nr, cfg.nt, cfg.si_power, *rng) : CMat::Zero(cfg.nr, cfg.nt);
  return csi;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a simple combination
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ (a + 0x632be59bd9b4e019ULL)) ^ (b + 0x85157af5ULL));
}

CMat complex_gaussian(int rows, int cols, double variance, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(variance / 2.0);
  CMat m(rows, cols);
  // column-major fill order is part of the reproducibility contract
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(r, c) = Complex(s * re, s * im);
    }
  return m;
}

double path_loss(double d, double c0, double d0, double exponent) {
  if (!(d > 0.0) || !(d0 > 0.0) || !(c0 > 0.0))
    throw InvalidArgument("path_loss: distance, reference distance and gain must be positive");
  return c0 * std::pow(d / d0, -exponent);
}

CMat rician_channel(const CMat& h_los, double rician_factor, Rng& rng) {
  if (!(rician_factor >= 0.0)) throw InvalidArgument("rician_channel: negative Rician factor");
  const double los_w = std::sqrt(rician_factor / (1.0 + rician_factor));
  const double nlos_w = std::sqrt(1.0 / (1.0 + rician_factor));
  return los_w * h_los + nlos_w * complex_gaussian(static_cast<int>(h_los.rows()),
                                                   static_cast<int>(h_los.cols()), 1.0, rng);
}

CMat si_channel(int nr, int nt, double si_power, Rng& rng) {
  if (nr < 1 || nt < 1) throw InvalidArgument("si_channel: empty dimensions");
  if (si_power < 0.0) throw InvalidArgument("si_channel: negative power");
  if (si_power == 0.0) return CMat::Zero(nr, nt);
  return complex_gaussian(nr, nt, si_power, rng);
}

CVec ula_response(int n, const Point3& u) {
  CVec a(n);
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, kPi * i * u.x);
  return a;
}

std::pair<int, int> upa_shape(int n) {
  int rows = 1;
  for (int r = 1; r * r <= n; ++r)
    if (n % r == 0) rows = r;
  return {rows, n / rows};
}

CVec upa_response(int n, const Point3& u) {
  const auto [rows, cols] = upa_shape(n);
  CVec a(n);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) a(r * cols + c) = std::polar(1.0, kPi * (c * u.x + r * u.z));
  return a;
}

FullCsi sample_full_csi(const ScenarioConfig& cfg, Rng& rng) { return draw_csi(cfg, &rng); }

FullCsi mean_full_csi(const ScenarioConfig& cfg) { return draw_csi(cfg, nullptr); }

EffectiveCsi effective_channels(const FullCsi& csi, const PhaseVector& theta) {
  const auto t = theta.theta.size();
  if (csi.v_ul.cols() != t || csi.v_dl.rows() != t)
    throw InvalidArgument("effective_channels: phase vector length does not match IRS size");
  const CVec phi = theta.reflection();
  EffectiveCsi eff;
  const CMat vu_phi = csi.v_ul * phi.asDiagonal();
  for (std::size_t k = 0; k < csi.g_ul.size(); ++k) {
    if (csi.g_ul[k].rows() != t) throw InvalidArgument("effective_channels: G_U rows != T");
    eff.h_ul.push_back(csi.h_ul[k] + vu_phi * csi.g_ul[k]);
  }
  std::vector<CMat> gd_phi;
  for (std::size_t l = 0; l < csi.g_dl.size(); ++l) {
    if (csi.g_dl[l].cols() != t) throw InvalidArgument("effective_channels: G_D cols != T");
    gd_phi.push_back(csi.g_dl[l] * phi.asDiagonal());
    eff.h_dl.push_back(csi.h_dl[l] + gd_phi[l] * csi.v_dl);
  }
  eff.j.resize(csi.j.size());
  for (std::size_t k = 0; k < csi.j.size(); ++k)
    for (std::size_t l = 0; l < csi.j[k].size(); ++l)
      eff.j[k].push_back(csi.j[k][l] + gd_phi[l] * csi.g_ul[k]);
  eff.h_si = csi.h_si;
  return eff;
}

PhaseVector quantize_phases(const PhaseVector& theta, int bits) {
  if (bits < 1 || bits > 30) throw InvalidArgument("quantize_phases: bits must be in [1, 30]");
  const long levels = 1L << bits;
  const double step = 2.0 * kPi / static_cast<double>(levels);
  RVec out(theta.theta.size());
  for (Eigen::Index n = 0; n < out.size(); ++n) {
    const double wrapped = theta.theta(n) - 2.0 * kPi * std::floor(theta.theta(n) / (2.0 * kPi));
    const long m = std::lround(wrapped / step) % levels;
    out(n) = static_cast<double>(m) * step;
  }
  return PhaseVector(std::move(out));
}

FullCsi perturb_csi(const FullCsi& csi, double error_power, Rng& rng) {
  if (!(error_power >= 0.0)) throw InvalidArgument("perturb_csi: negative error power");
  FullCsi out = csi;
  if (error_power == 0.0) return out;
  for_each_matrix(out, [&](CMat& m) {
    if (m.size() == 0) return;
    const double p = m.squaredNorm() / static_cast<double>(m.size());
    if (p == 0.0) return;
    m += complex_gaussian(static_cast<int>(m.rows()), static_cast<int>(m.cols()), p * error_power, rng);
  });
  return out;
}

double delay_correlation(double tau, double doppler_hz) {
  if (tau < 0.0) throw InvalidArgument("delay_correlation: negative delay");
  const double x = 2.0 * kPi * doppler_hz * tau;
  if (x >= kJ0FirstZero) return 0.0;
  return std::cyl_bessel_j(0.0, x);
}

FullCsi age_csi(const FullCsi& fresh, const FullCsi& past, const FullCsi& mean, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("age_csi: rho must be in [0, 1]");
  if (rho == 1.0) return past;
  const double innov = std::sqrt(1.0 - rho * rho);
  std::vector<const CMat*> f, m;
  for_each_matrix(fresh, [&](const CMat& x) { f.push_back(&x); });
  for_each_matrix(mean, [&](const CMat& x) { m.push_back(&x); });
  FullCsi out = past;
  std::size_t i = 0;
  for_each_matrix(out, [&](CMat& x) {
    if (f[i]->rows() != x.rows() || f[i]->cols() != x.cols() || m[i]->rows() != x.rows() ||
        m[i]->cols() != x.cols())
      throw InvalidArgument("age_csi: dimension mismatch");
    x = *m[i] + rho * (x - *m[i]) + innov * (*f[i] - *m[i]);
    ++i;
  });
  return out;
}

FullCsi delayed_csi(const FullCsi& fresh, const FullCsi& past, double tau, const ScenarioConfig& cfg) {
  const double rho = delay_correlation(tau, cfg.doppler_hz);
  return age_csi(fresh, past, mean_full_csi(cfg), rho);
}

FullCsi without_irs(const FullCsi& csi) {
  FullCsi out = csi;
  for (auto& g : out.g_ul) g.setZero();
  for (auto& g : out.g_dl) g.setZero();
  out.v_ul.setZero();
  out.v_dl.setZero();
  return out;
}

void check_dimensions(const FullCsi& csi, const ScenarioConfig& cfg) {
  auto need = [](const CMat& m, int r, int c, const char* what) {
    if (m.rows() != r || m.cols() != c)
      throw InvalidArgument(std::string("dimension mismatch in ") + what);
    if (!m.allFinite()) throw InvalidArgument(std::string("non-finite entries in ") + what);
  };
  if (csi.num_ul() != cfg.num_ul || csi.num_dl() != cfg.num_dl ||
      static_cast<int>(csi.g_ul.size()) != cfg.num_ul || static_cast<int>(csi.g_dl.size()) != cfg.num_dl ||
      static_cast<int>(csi.j.size()) != cfg.num_ul)
    throw InvalidArgument("user count mismatch in FullCsi");
  const int t = cfg.irs_elements;
  for (int k = 0; k < cfg.num_ul; ++k) {
    need(csi.h_ul[k], cfg.nr, cfg.ul_antennas[k], "H_U");
    need(csi.g_ul[k], t, cfg.ul_antennas[k], "G_U");
    if (static_cast<int>(csi.j[k].size()) != cfg.num_dl) throw InvalidArgument("J row size mismatch");
    for (int l = 0; l < cfg.num_dl; ++l) need(csi.j[k][l], cfg.dl_antennas[l], cfg.ul_antennas[k], "J");
  }
  for (int l = 0; l < cfg.num_dl; ++l) {
    need(csi.h_dl[l], cfg.dl_antennas[l], cfg.nt, "H_D");
    need(csi.g_dl[l], cfg.dl_antennas[l], t, "G_D");
  }
  need(csi.v_ul, cfg.nr, t, "V_U");
  need(csi.v_dl, t, cfg.nt, "V_D");
  need(csi.h_si, cfg.nr, cfg.nt, "H_tilde");
}

}  // namespace irsfd
