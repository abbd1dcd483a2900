#include "irsfd/wmmse.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "irsfd/system.hpp"

namespace irsfd {

void BcdConfig::validate() const {
  if (max_iterations < 1) throw InvalidArgument("BcdConfig: max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw InvalidArgument("BcdConfig: tolerance must be positive");
  if (!(bisection_tolerance > 0.0)) throw InvalidArgument("BcdConfig: bisection_tolerance must be positive");
  if (bisection_max_steps < 1) throw InvalidArgument("BcdConfig: bisection_max_steps must be >= 1");
}

namespace {

// Eigen-coordinates of the KKT problem: A = Q diag(e) Q^H, c = Q^H rhs.
// The transmit power at multiplier m is sum_i ||c_i||^2 / (e_i + m)^2.
struct SpectralKkt {
  CMat q;
  RVec eig;
  RVec weight;  // squared row norms of c, summed over all right-hand sides
  std::vector<CMat> coeff;

  SpectralKkt(const CMat& a, const std::vector<CMat>& rhs) {
    const CMat herm = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(herm);
    if (es.info() != Eigen::Success) throw NumericalError("KKT solve: eigendecomposition failed");
    q = es.eigenvectors();
    eig = es.eigenvalues();
    // Round-off can leave tiny negative eigenvalues on a PSD matrix.
    const double scale = std::max(eig.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    for (Eigen::Index i = 0; i < eig.size(); ++i)
      if (eig(i) < 1e-13 * scale) eig(i) = 0.0;
    weight = RVec::Zero(eig.size());
    for (const auto& r : rhs) {
      coeff.push_back(q.adjoint() * r);
      weight += coeff.back().rowwise().squaredNorm().transpose();
    }
  }

  double power(double m) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
      if (weight(i) == 0.0) continue;
      const double d = eig(i) + m;
      if (d <= 0.0) return std::numeric_limits<double>::infinity();
      s += weight(i) / (d * d);
    }
    return s;
  }

  CMat solution(std::size_t idx, double m) const {
    CMat c = coeff[idx];
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
      const double d = eig(i) + m;
      if (d > 0.0)
        c.row(i) /= d;
      else
        c.row(i).setZero();
    }
    return q * c;
  }
};

double find_multiplier(const SpectralKkt& s, double budget, const BcdConfig& cfg) {
  if (s.power(0.0) <= budget) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  int grow = 0;
  while (s.power(hi) > budget) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 2000 || !std::isfinite(hi))
      throw NumericalError("KKT solve: could not bracket the power multiplier (budget " + std::to_string(budget) +
                           ")");
  }
  for (int step = 0; step < cfg.bisection_max_steps && hi - lo > cfg.bisection_tolerance * hi; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (s.power(mid) > budget)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

void check_budget(double budget) {
  if (!(budget > 0.0)) throw InvalidArgument("KKT solve: power budget must be positive");
}

}  // namespace

KktSolution solve_power_constrained(const CMat& a, const CMat& rhs, double budget, const BcdConfig& cfg) {
  check_budget(budget);
  if (a.rows() != a.cols() || a.rows() != rhs.rows()) throw InvalidArgument("KKT solve: dimension mismatch");
  SpectralKkt s(a, {rhs});
  KktSolution out;
  out.multiplier = find_multiplier(s, budget, cfg);
  out.x = s.solution(0, out.multiplier);
  return out;
}

SharedKktSolution solve_shared_power(const CMat& a, const std::vector<CMat>& rhs, double budget,
                                     const BcdConfig& cfg) {
  check_budget(budget);
  for (const auto& r : rhs)
    if (a.rows() != a.cols() || a.rows() != r.rows()) throw InvalidArgument("KKT solve: dimension mismatch");
  SharedKktSolution out;
  if (rhs.empty()) return out;
  SpectralKkt s(a, rhs);
  out.multiplier = find_multiplier(s, budget, cfg);
  for (std::size_t i = 0; i < rhs.size(); ++i) out.x.push_back(s.solution(i, out.multiplier));
  return out;
}

namespace {

CMat solve_pd(const CMat& a, const CMat& b, const char* what) {
  const CMat herm = 0.5 * (a + a.adjoint());
  Eigen::LLT<CMat> llt(herm);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + ": covariance is not positive definite");
  return llt.solve(b);
}

}  // namespace

WmmseAux update_receivers(const EffectiveCsi& eff, const BeamformerSet& bf, const ScenarioConfig& cfg) {
  WmmseAux aux;
  if (eff.num_ul() > 0) {
    const CMat a = uplink_covariance(eff, bf, cfg.ul_noise);
    for (int k = 0; k < eff.num_ul(); ++k)
      aux.u_ul.push_back(solve_pd(a, eff.h_ul[k] * bf.p[k], "update_receivers (UL)"));
  }
  for (int l = 0; l < eff.num_dl(); ++l) {
    const CMat a = downlink_covariance(eff, bf, l, cfg.dl_noise[l]);
    aux.u_dl.push_back(solve_pd(a, eff.h_dl[l] * bf.f[l], "update_receivers (DL)"));
  }
  return aux;
}

CMat weight_from_mse(const CMat& e) {
  const CMat herm = 0.5 * (e + e.adjoint());
  Eigen::LLT<CMat> llt(herm);
  if (llt.info() != Eigen::Success) throw NumericalError("weight_from_mse: error matrix is singular");
  CMat w = llt.solve(CMat::Identity(e.rows(), e.cols()));
  return 0.5 * (w + w.adjoint());
}

void update_weights(const EffectiveCsi& eff, const BeamformerSet& bf, WmmseAux& aux, const ScenarioConfig& cfg) {
  aux.w_ul.clear();
  aux.w_dl.clear();
  for (int k = 0; k < eff.num_ul(); ++k)
    aux.w_ul.push_back(weight_from_mse(mse_matrix_ul(eff, bf, aux, k, cfg.ul_noise)));
  for (int l = 0; l < eff.num_dl(); ++l)
    aux.w_dl.push_back(weight_from_mse(mse_matrix_dl(eff, bf, aux, l, cfg.dl_noise[l])));
}

namespace {

// sum of H^H U W U^H H, returned Hermitian.
CMat sandwich(const CMat& h, const CMat& u, const CMat& w) {
  const CMat uh = u.adjoint() * h;
  return uh.adjoint() * w * uh;
}

}  // namespace

CMat ul_precoder_matrix(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg, int k) {
  const auto m = eff.h_ul[k].cols();
  CMat a = CMat::Zero(m, m);
  for (int kp = 0; kp < eff.num_ul(); ++kp) a += cfg.ul_weights[kp] * sandwich(eff.h_ul[k], aux.u_ul[kp], aux.w_ul[kp]);
  for (int l = 0; l < eff.num_dl(); ++l) a += cfg.dl_weights[l] * sandwich(eff.j[k][l], aux.u_dl[l], aux.w_dl[l]);
  return 0.5 * (a + a.adjoint());
}

CMat dl_precoder_matrix(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg) {
  const auto nt = eff.h_si.cols();
  CMat a = CMat::Zero(nt, nt);
  for (int l = 0; l < eff.num_dl(); ++l) a += cfg.dl_weights[l] * sandwich(eff.h_dl[l], aux.u_dl[l], aux.w_dl[l]);
  for (int k = 0; k < eff.num_ul(); ++k) a += cfg.ul_weights[k] * sandwich(eff.h_si, aux.u_ul[k], aux.w_ul[k]);
  return 0.5 * (a + a.adjoint());
}

UlPrecoderUpdate update_ul_precoders(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg,
                                     const BcdConfig& bcd) {
  UlPrecoderUpdate out;
  for (int k = 0; k < eff.num_ul(); ++k) {
    const CMat rhs = cfg.ul_weights[k] * eff.h_ul[k].adjoint() * aux.u_ul[k] * aux.w_ul[k];
    auto sol = solve_power_constrained(ul_precoder_matrix(eff, aux, cfg, k), rhs, cfg.ul_power[k], bcd);
    out.p.push_back(std::move(sol.x));
    out.lambda.push_back(sol.multiplier);
  }
  return out;
}

DlPrecoderUpdate update_dl_precoders(const EffectiveCsi& eff, const WmmseAux& aux, const ScenarioConfig& cfg,
                                     const BcdConfig& bcd) {
  DlPrecoderUpdate out;
  if (eff.num_dl() == 0) return out;
  std::vector<CMat> rhs;
  for (int l = 0; l < eff.num_dl(); ++l)
    rhs.push_back(cfg.dl_weights[l] * eff.h_dl[l].adjoint() * aux.u_dl[l] * aux.w_dl[l]);
  auto sol = solve_shared_power(dl_precoder_matrix(eff, aux, cfg), rhs, cfg.ap_power, bcd);
  out.f = std::move(sol.x);
  out.mu = sol.multiplier;
  return out;
}

BeamformerSet project_to_budgets(const BeamformerSet& bf, const ScenarioConfig& cfg) {
  BeamformerSet out = bf;
  for (std::size_t k = 0; k < out.p.size(); ++k) {
    const double pw = out.p[k].squaredNorm();
    if (pw > cfg.ul_power[k]) out.p[k] *= std::sqrt(cfg.ul_power[k] / pw);
  }
  const double total = dl_power(out);
  if (total > cfg.ap_power)
    for (auto& f : out.f) f *= std::sqrt(cfg.ap_power / total);
  return out;
}

BeamformerSet random_feasible_init(const ScenarioConfig& cfg, Rng& rng) {
  BeamformerSet bf;
  for (int k = 0; k < cfg.num_ul; ++k) {
    CMat p = complex_gaussian(cfg.ul_antennas[k], cfg.ul_streams[k], 1.0, rng);
    p *= std::sqrt(cfg.ul_power[k]) / p.norm();
    bf.p.push_back(std::move(p));
  }
  for (int l = 0; l < cfg.num_dl; ++l) bf.f.push_back(complex_gaussian(cfg.nt, cfg.dl_streams[l], 1.0, rng));
  const double total = dl_power(bf);
  for (auto& f : bf.f) f *= std::sqrt(cfg.ap_power / total);
  return bf;
}

BcdResult run_bcd(const EffectiveCsi& eff, const BeamformerSet& init, const ScenarioConfig& cfg,
                  const BcdConfig& bcd) {
  bcd.validate();
  if (static_cast<int>(init.p.size()) != eff.num_ul() || static_cast<int>(init.f.size()) != eff.num_dl())
    throw InvalidArgument("run_bcd: initial precoder count does not match the channels");

  BcdResult res;
  res.bf = project_to_budgets(init, cfg);
  BcdTrace& trace = res.trace;
  try {
    double prev = 0.0;
    for (int it = 1; it <= bcd.max_iterations; ++it) {
      WmmseAux aux = update_receivers(eff, res.bf, cfg);
      if (bcd.record_blocks && it > 1) {
        aux.w_ul = res.aux.w_ul;
        aux.w_dl = res.aux.w_dl;
        trace.block_objective.push_back(wmmse_objective(eff, res.bf, aux, cfg));
      }
      update_weights(eff, res.bf, aux, cfg);
      const double after_w = wmmse_objective(eff, res.bf, aux, cfg);
      if (it == 1) {
        trace.initial_objective = after_w;
        prev = after_w;
      }
      if (bcd.record_blocks) trace.block_objective.push_back(after_w);

      auto ul = update_ul_precoders(eff, aux, cfg, bcd);
      res.bf.p = std::move(ul.p);
      res.lambda = std::move(ul.lambda);
      if (bcd.record_blocks) trace.block_objective.push_back(wmmse_objective(eff, res.bf, aux, cfg));

      auto dl = update_dl_precoders(eff, aux, cfg, bcd);
      res.bf.f = std::move(dl.f);
      res.mu = dl.mu;
      const double obj = wmmse_objective(eff, res.bf, aux, cfg);
      if (bcd.record_blocks) trace.block_objective.push_back(obj);

      res.aux = std::move(aux);
      trace.objective.push_back(obj);
      if (bcd.record_sum_rate) trace.sum_rate.push_back(weighted_sum_rate(eff, res.bf, cfg));
      trace.iterations = it;
      if (!std::isfinite(obj)) throw NumericalError("run_bcd: objective became non-finite");
      if (std::abs(prev - obj) < bcd.tolerance) {
        trace.converged = true;
        break;
      }
      prev = obj;
    }
  } catch (const BcdError&) {
    throw;
  } catch (const std::exception& e) {
    throw BcdError(std::string("run_bcd failed at iteration ") + std::to_string(trace.iterations + 1) + ": " +
                       e.what(),
                   trace);
  }
  return res;
}

BcdResult solve_short_term(const EffectiveCsi& eff, const ScenarioConfig& cfg, Rng& rng, const BcdConfig& bcd) {
  return run_bcd(eff, random_feasible_init(cfg, rng), cfg, bcd);
}

void write_bcd_trace_csv(std::ostream& out, const BcdTrace& trace) {
  out << "iteration,objective,sum_rate\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < trace.objective.size(); ++i) {
    out << (i + 1) << ',' << trace.objective[i] << ',';
    if (i < trace.sum_rate.size()) out << trace.sum_rate[i];
    out << '\n';
  }
  out.precision(old);
}

}  // namespace irsfd
