#include "irsfd/ssca.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>

#include "irsfd/system.hpp"

namespace irsfd {

void SscaConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("SscaConfig: batch_size must be >= 1");
  if (!(curvature > 0.0)) throw InvalidArgument("SscaConfig: curvature must be positive");
  if (max_iterations < 0) throw InvalidArgument("SscaConfig: max_iterations must be >= 0");
  if (!(rho_scale > 0.0) || !(gamma_scale > 0.0)) throw InvalidArgument("SscaConfig: schedule scales must be positive");
  if (!(rho_offset > 0.0) || !(gamma_offset > 0.0)) throw InvalidArgument("SscaConfig: schedule offsets must be positive");
  if (rho_exponent < 0.0 || gamma_exponent < 0.0) throw InvalidArgument("SscaConfig: schedule exponents must be >= 0");
}

StepSizes step_schedules(int t, const SscaConfig& cfg) {
  if (t < 0) throw InvalidArgument("step_schedules: t must be >= 0");
  StepSizes s;
  s.rho = std::min(1.0, cfg.rho_scale / std::pow(cfg.rho_offset + t, cfg.rho_exponent));
  s.gamma = std::min(1.0, cfg.gamma_scale / std::pow(cfg.gamma_offset + t, cfg.gamma_exponent));
  return s;
}

namespace {

// Adds 2 Re(j phi_n M_nn) for M = left * C^H * right to grad(n).
void accumulate(RVec& grad, const CVec& phi, const CMat& left, const CMat& c, const CMat& right) {
  const CMat ch_right = c.adjoint() * right;  // cols(left) x T
  for (Eigen::Index n = 0; n < phi.size(); ++n) {
    const Complex m = left.row(n).transpose().cwiseProduct(ch_right.col(n)).sum();
    grad(n) += 2.0 * (Complex(0.0, 1.0) * phi(n) * m).real();
  }
}

CMat pd_inverse(const CMat& a) {
  const CMat herm = 0.5 * (a + a.adjoint());
  Eigen::LLT<CMat> llt(herm);
  if (llt.info() != Eigen::Success) throw NumericalError("rate_gradient_theta: covariance is not positive definite");
  return llt.solve(CMat::Identity(a.rows(), a.cols()));
}

}  // namespace

RVec rate_gradient_theta(const PhaseVector& theta, const BeamformerSet& bf, const FullCsi& csi,
                         const ScenarioConfig& cfg) {
  const EffectiveCsi eff = effective_channels(csi, theta);
  const CVec phi = theta.reflection();
  const int t_len = theta.size();
  RVec grad = RVec::Zero(t_len);
  const int k_n = eff.num_ul();
  const int l_n = eff.num_dl();

  std::vector<CMat> s_ul;
  for (const auto& p : bf.p) s_ul.push_back(p * p.adjoint());

  // Uplink: every Hbar_U,k' enters the total covariance of each rate and the
  // interference covariance of every other user's rate.
  if (k_n > 0) {
    const CMat a = uplink_covariance(eff, bf, cfg.ul_noise);
    const CMat a_inv = pd_inverse(a);
    std::vector<CMat> b_inv;
    double alpha_sum = 0.0;
    for (int k = 0; k < k_n; ++k) {
      const CMat hp = eff.h_ul[k] * bf.p[k];
      b_inv.push_back(pd_inverse(a - hp * hp.adjoint()));
      alpha_sum += cfg.ul_weights[k];
    }
    for (int kp = 0; kp < k_n; ++kp) {
      CMat kmat = alpha_sum * a_inv;
      for (int k = 0; k < k_n; ++k)
        if (k != kp) kmat -= cfg.ul_weights[k] * b_inv[k];
      const CMat c = kmat * eff.h_ul[kp] * s_ul[kp];
      accumulate(grad, phi, csi.g_ul[kp], c, csi.v_ul);
    }
  }

  if (l_n > 0) {
    CMat s_f = CMat::Zero(eff.h_si.cols(), eff.h_si.cols());
    for (const auto& f : bf.f) s_f += f * f.adjoint();
    for (int l = 0; l < l_n; ++l) {
      const CMat a = downlink_covariance(eff, bf, l, cfg.dl_noise[l]);
      const CMat hf = eff.h_dl[l] * bf.f[l];
      const CMat a_inv = pd_inverse(a);
      const CMat b_inv = pd_inverse(a - hf * hf.adjoint());
      const double beta = cfg.dl_weights[l];
      const CMat& h = eff.h_dl[l];
      const CMat c_h = beta * (a_inv * h * s_f - b_inv * h * (s_f - bf.f[l] * bf.f[l].adjoint()));
      accumulate(grad, phi, csi.v_dl, c_h, csi.g_dl[l]);
      const CMat diff = beta * (a_inv - b_inv);
      for (int k = 0; k < k_n; ++k) {
        const CMat c_j = diff * eff.j[k][l] * s_ul[k];
        accumulate(grad, phi, csi.g_ul[k], c_j, csi.g_dl[l]);
      }
    }
  }
  return grad / std::numbers::ln2;
}

SampleGradient sample_gradient(const PhaseVector& theta, const FullCsi& csi, const ScenarioConfig& cfg,
                               const BeamformerSet& init, const BcdConfig& bcd) {
  SampleGradient out;
  BcdConfig quiet = bcd;
  quiet.record_sum_rate = false;
  out.short_term = run_bcd(effective_channels(csi, theta), init, cfg, quiet);
  out.grad = rate_gradient_theta(theta, out.short_term.bf, csi, cfg);
  out.sum_rate = weighted_sum_rate(theta, out.short_term.bf, csi, cfg);
  return out;
}

SurrogateState update_surrogate(const SurrogateState& state, const std::vector<RVec>& batch_grads, double rho) {
  if (!(rho > 0.0) || rho > 1.0) throw InvalidArgument("update_surrogate: rho must lie in (0, 1]");
  SurrogateState out = state;
  RVec sum = RVec::Zero(state.f.size());
  for (const auto& g : batch_grads) {
    if (g.size() != sum.size()) throw InvalidArgument("update_surrogate: gradient length mismatch");
    sum += g;
  }
  out.f = (1.0 - rho) * state.f + rho * sum;
  out.t = state.t + 1;
  return out;
}

PhaseVector surrogate_minimizer(const PhaseVector& theta, const RVec& f, double curvature) {
  if (!(curvature > 0.0)) throw InvalidArgument("surrogate_minimizer: curvature must be positive");
  if (f.size() != theta.theta.size()) throw InvalidArgument("surrogate_minimizer: length mismatch");
  return PhaseVector(theta.theta - f / (2.0 * curvature));
}

double surrogate_value(const PhaseVector& x, const PhaseVector& theta, const RVec& f, double curvature) {
  const RVec d = x.theta - theta.theta;
  return f.dot(d) + curvature * d.squaredNorm();
}

PhaseVector long_term_step(const PhaseVector& theta, const PhaseVector& theta_bar, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw InvalidArgument("long_term_step: gamma must lie in [0, 1]");
  return PhaseVector((1.0 - gamma) * theta.theta + gamma * theta_bar.theta);
}

PhaseVector random_phases(int t, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  RVec th(t);
  for (int i = 0; i < t; ++i) th(i) = u(rng);
  return PhaseVector(th);
}

SscaResult run_ssca(const std::vector<FullCsi>& pool, const ScenarioConfig& scen, const SscaConfig& cfg,
                    const BcdConfig& bcd, const PhaseVector& theta0) {
  cfg.validate();
  if (pool.empty()) throw InvalidArgument("run_ssca: sample pool is empty");
  SurrogateState state;
  if (theta0.size() > 0) {
    state.theta = theta0;
  } else {
    Rng rng(derive_seed(cfg.seed, 0));
    state.theta = random_phases(scen.irs_elements, rng);
  }
  state.f = RVec::Zero(state.theta.size());

  std::vector<std::optional<BeamformerSet>> cache(pool.size());
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  SscaResult res;
  for (int t = 0; t < cfg.max_iterations; ++t) {
    Rng rng(derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(t)));
    std::vector<RVec> grads;
    double rate_sum = 0.0;
    for (int m = 0; m < cfg.batch_size; ++m) {
      const std::size_t idx = pick(rng);
      const BeamformerSet init =
          (cfg.warm_start && cache[idx]) ? *cache[idx] : random_feasible_init(scen, rng);
      SampleGradient sg = sample_gradient(state.theta, pool[idx], scen, init, bcd);
      grads.push_back(-sg.grad);
      rate_sum += sg.sum_rate;
      if (cfg.warm_start) cache[idx] = std::move(sg.short_term.bf);
    }
    const StepSizes steps = step_schedules(t, cfg);
    state = update_surrogate(state, grads, steps.rho);
    const PhaseVector bar = surrogate_minimizer(state.theta, state.f, cfg.curvature);
    state.theta = long_term_step(state.theta, bar, steps.gamma);
    res.trace.batch_sum_rate.push_back(rate_sum / cfg.batch_size);
    res.trace.f_norm.push_back(state.f.norm());
  }
  res.theta = state.theta;
  return res;
}

void write_ssca_trace_csv(std::ostream& out, const SscaTrace& trace) {
  out << "iteration,batch_sum_rate,f_norm\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < trace.batch_sum_rate.size(); ++i)
    out << (i + 1) << ',' << trace.batch_sum_rate[i] << ',' << trace.f_norm[i] << '\n';
  out.precision(old);
}

}  // namespace irsfd
