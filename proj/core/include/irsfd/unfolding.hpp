#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "irsfd/channels.hpp"
#include "irsfd/ssca.hpp"
#include "irsfd/types.hpp"
#include "irsfd/wmmse.hpp"

namespace irsfd {

/// Diagonal matrix holding 1 / a_ii. Throws NumericalError when some
/// |a_ii| is below `threshold`.
CMat dagger(const CMat& a, double threshold = 1e-12);

/// A^dagger X + A Y + Z, the learnable stand-in for A^{-1}.
CMat inverse_approx(const CMat& a, const CMat& x, const CMat& y, const CMat& z, double threshold = 1e-12);

/// The form used inside the network: inverse_approx applied to the
/// scale-normalised matrix, (1/s) inverse_approx(A/s, X, Y, Z) with
/// s = ||A||_F / sqrt(n), which equals A^dagger X + A Y / s^2 + Z / s. The
/// dagger term is unchanged, while Y and Z act on a matrix of unit RMS
/// eigenvalue, so one set of learned values transfers between samples whose
/// channel gains differ by orders of magnitude. Throws NumericalError for a
/// zero matrix.
CMat normalized_inverse_approx(const CMat& a, const CMat& x, const CMat& y, const CMat& z,
                               double threshold = 1e-12);

/// Learnable tensors of one unfolded layer. M is the matrix type and S the
/// scalar type so that the same layout serves parameters, gradients and
/// tape handles. Families ending in _ul are indexed by UL user, _dl by DL
/// user; x/y/z are the inverse-approximation triplets and o the offsets.
template <typename M, typename S>
struct LayerT {
  std::vector<M> xu_ul, yu_ul, zu_ul, ou_ul;  // Nr x Nr, offset Nr x D_U
  std::vector<M> xu_dl, yu_dl, zu_dl, ou_dl;  // M_D x M_D, offset M_D x D_D
  std::vector<M> xw_ul, yw_ul, zw_ul;         // D_U x D_U
  std::vector<M> xw_dl, yw_dl, zw_dl;         // D_D x D_D
  std::vector<M> xp, yp, zp, op;              // M_U x M_U, offset M_U x D_U
  std::vector<M> xf, yf, zf, of;              // Nt x Nt, offset Nt x D_D
  std::vector<S> lambda;                      // per UL user
  S mu{};

  static constexpr auto matrix_members() {
    return std::array{&LayerT::xu_ul, &LayerT::yu_ul, &LayerT::zu_ul, &LayerT::ou_ul, &LayerT::xu_dl,
                      &LayerT::yu_dl, &LayerT::zu_dl, &LayerT::ou_dl, &LayerT::xw_ul, &LayerT::yw_ul,
                      &LayerT::zw_ul, &LayerT::xw_dl, &LayerT::yw_dl, &LayerT::zw_dl, &LayerT::xp,
                      &LayerT::yp,    &LayerT::zp,    &LayerT::op,    &LayerT::xf,    &LayerT::yf,
                      &LayerT::zf,    &LayerT::of};
  }

  template <typename Self, typename FM, typename FS>
  static void visit(Self& self, FM&& fm, FS&& fs) {
    for (auto member : matrix_members())
      for (auto& m : self.*member) fm(m);
    for (auto& s : self.lambda) fs(s);
    fs(self.mu);
  }
};

using SabnLayer = LayerT<CMat, double>;

struct SabnParams {
  std::vector<SabnLayer> layers;

  int num_layers() const { return static_cast<int>(layers.size()); }
  /// Number of real coordinates (complex entries count twice).
  std::size_t real_size() const;
  /// Shape check against a scenario; throws InvalidArgument.
  void check(const ScenarioConfig& cfg) const;
};

struct LpbnParams {
  PhaseVector theta;
};

/// Identity initialisation: X = I, Y = Z = O = 0, multipliers 1e-3.
SabnParams init_sabn(const ScenarioConfig& cfg, int layers);

/// init_sabn plus theta drawn uniformly from [0, 2 pi).
std::pair<LpbnParams, SabnParams> init_params(const ScenarioConfig& cfg, int layers, Rng& rng);

/// A zero-valued parameter set of the same shape (used for gradients).
SabnParams zeros_like(const SabnParams& p);

/// Real coordinates in visit order: Re, Im of every matrix entry (column
/// major), then the multipliers.
std::vector<double> flatten(const SabnParams& p);
void unflatten(SabnParams& p, const std::vector<double>& x);

EffectiveCsi lpbn_forward(const FullCsi& csi, const LpbnParams& params);

/// Matched-filter starting point: P_k from the leading columns of
/// Hbar_k^H Hbar_k, F_l from the leading columns of Hbar_l^H, both scaled
/// to the full budgets.
BeamformerSet mrt_init(const EffectiveCsi& eff, const ScenarioConfig& cfg);

struct UnfoldingConfig {
  double dagger_threshold = 1e-12;
  /// Settings of the multiplier search in the exact output layer.
  BcdConfig output_bcd{};
};

struct SabnOutput {
  BeamformerSet bf;  // after the exact output layer, physical units
  std::vector<BeamformerSet> layer_outputs;  // after each unfolded layer, physical units
};

/// Runs the unfolded layers and the exact output layer on physical
/// effective channels.
SabnOutput sabn_forward(const EffectiveCsi& eff, const SabnParams& params, const BeamformerSet& init,
                        const ScenarioConfig& cfg, const UnfoldingConfig& ucfg = {});

/// Full network (LPBN, matched-filter init, SABN) on one sample.
SabnOutput network_forward(const FullCsi& csi, const LpbnParams& lpbn, const SabnParams& sabn,
                           const ScenarioConfig& cfg, const UnfoldingConfig& ucfg = {});

/// Batch mean of -g at the network output.
double loss(const LpbnParams& lpbn, const SabnParams& sabn, const std::vector<FullCsi>& batch,
            const ScenarioConfig& cfg, const UnfoldingConfig& ucfg = {});

enum class ThetaGradient {
  Full,    // through every path, network included
  Direct,  // network outputs frozen: only the explicit dependence of g on theta
};

struct UnfoldingGradients {
  double loss = 0.0;
  RVec theta;
  SabnParams psi;  // zero in Direct mode
};

/// Exact reverse-mode gradients of `loss`. Throws NumericalError on a
/// non-finite gradient.
UnfoldingGradients backward(const LpbnParams& lpbn, const SabnParams& sabn, const std::vector<FullCsi>& batch,
                            const ScenarioConfig& cfg, ThetaGradient mode = ThetaGradient::Full,
                            const UnfoldingConfig& ucfg = {});

/// Per-block relative Frobenius deviation of one unfolded layer from the
/// exact block updates computed from the same inputs. The P and F blocks are
/// compared before power scaling and with the layer's own multipliers.
struct LayerDeviation {
  double u_ul = 0.0;
  double u_dl = 0.0;
  double w_ul = 0.0;
  double w_dl = 0.0;
  double p = 0.0;
  double f = 0.0;
  double max() const;
};

/// `eff`, `state` and budgets are taken as given (no normalisation).
LayerDeviation layer_deviation(const EffectiveCsi& eff, const SabnLayer& layer, const BeamformerSet& state,
                               const ScenarioConfig& cfg, const UnfoldingConfig& ucfg = {});

enum class ThetaMode { Sgd, Ssca };

struct TrainConfig {
  double learning_rate = 1e-3;
  /// Step for theta in Sgd mode; non-positive means learning_rate.
  double theta_learning_rate = 0.0;
  int batch_size = 5;
  int epochs = 100;
  int layers = 8;
  std::uint64_t seed = 1;
  ThetaMode theta_mode = ThetaMode::Ssca;
  SscaConfig ssca{};  // schedules and curvature for the Ssca theta mode
  bool train_theta = true;
  /// Evaluate the held-out sum-rate every this many steps (0 disables).
  int eval_every = 0;
  /// Check the first batch gradient against finite differences.
  bool grad_check = false;
  double max_grad_norm = 1.0;  // clip the Psi gradient norm when positive

  void validate() const;
};

struct TrainTrace {
  std::vector<int> step;
  std::vector<double> loss;
  std::vector<double> heldout_rate;  // NaN where not evaluated
};

struct TrainResult {
  LpbnParams lpbn;
  SabnParams sabn;
  TrainTrace trace;
};

class TrainingError : public NumericalError {
 public:
  TrainingError(const std::string& what, TrainTrace trace) : NumericalError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

/// Mini-batch training of (theta, Psi). `start` overrides the random
/// initialisation when it has layers.
TrainResult train(const std::vector<FullCsi>& pool, const TrainConfig& tcfg, const ScenarioConfig& cfg,
                  const std::vector<FullCsi>& heldout = {}, const std::pair<LpbnParams, SabnParams>* start = nullptr,
                  const UnfoldingConfig& ucfg = {});

/// Average g over `samples` at the network output.
double network_average_rate(const std::vector<FullCsi>& samples, const LpbnParams& lpbn, const SabnParams& sabn,
                            const ScenarioConfig& cfg, const UnfoldingConfig& ucfg = {});

void write_train_trace_csv(std::ostream& out, const TrainTrace& trace);

/// Binary checkpoint: magic, format version, dimensions, raw little-endian
/// doubles. Throws InvalidArgument on a malformed or mismatched file.
void save_checkpoint(const std::string& path, const LpbnParams& lpbn, const SabnParams& sabn);
std::pair<LpbnParams, SabnParams> load_checkpoint(const std::string& path);

}  // namespace irsfd
