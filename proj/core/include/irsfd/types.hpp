#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace irsfd {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

/// Caller passed something outside an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization, inversion or root bracket failed on otherwise valid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quantity that must be positive definite (e.g. a WMMSE weight) is not.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Point3& a, const Point3& b);

/// Per-link-class large-scale parameters: AP-IRS, AP-user, IRS-user, user-user.
struct LinkParams {
  double ap_irs = 0.0;
  double ap_user = 0.0;
  double irs_user = 0.0;
  double user_user = 0.0;
};

/// Scenario geometry, antenna/stream dimensions, budgets and weights.
///
/// All powers are linear (W), all gains linear, positions in metres.
struct ScenarioConfig {
  int num_ul = 2;  // K
  int num_dl = 2;  // L
  int nt = 8;
  int nr = 8;
  int irs_elements = 16;  // T
  std::vector<int> ul_antennas;
  std::vector<int> dl_antennas;
  std::vector<int> ul_streams;
  std::vector<int> dl_streams;

  Point3 ap_position{0.0, 0.0, 0.0};
  Point3 irs_position{0.0, 80.0, 3.0};
  std::vector<Point3> ul_positions;
  std::vector<Point3> dl_positions;
  /// Users are displaced uniformly within a disc of this radius per sample.
  double location_radius = 0.0;

  LinkParams path_loss_exponent{2.4, 3.8, 2.2, 3.0};
  LinkParams rician_factor{1.9952623149688795, 0.50118723362727224, 1.9952623149688795, 1.0};
  double ref_gain = 1e-3;  // C0
  double ref_distance = 1.0;  // D0

  double ul_noise = 0.0;
  std::vector<double> dl_noise;
  double si_power = 1e-6;
  std::vector<double> ul_power;
  double ap_power = 0.0;
  std::vector<double> ul_weights;
  std::vector<double> dl_weights;

  /// Maximum Doppler shift used by the CSI ageing model.
  double doppler_hz = 100.0;

  /// Throws InvalidArgument if any invariant is violated.
  void validate() const;

  double dl_noise_of(int l) const { return dl_noise.at(static_cast<std::size_t>(l)); }
};

/// Uniform scenario on the reference geometry: every user has `m` antennas
/// and `d` streams, the AP has `n` transmit and `n` receive antennas.
ScenarioConfig make_scenario(int k, int l, int n, int m, int d, int t);

/// Full-scale defaults (N=32, M=D=4, T=200).
ScenarioConfig full_scenario();

/// Desk-scale scenario (N=8, K=L=2, M=D=2, T=16) used by tests and the
/// acceptance suite.
ScenarioConfig desk_scenario();

double db_to_linear(double db);
double dbm_to_watts(double dbm);

/// The full high-dimensional CSI set of one channel realisation.
struct FullCsi {
  std::vector<CMat> h_ul;  // [k] Nr x M_U   UL user -> AP
  std::vector<CMat> h_dl;  // [l] M_D x Nt   AP -> DL user
  std::vector<CMat> g_ul;  // [k] T x M_U    UL user -> IRS
  std::vector<CMat> g_dl;  // [l] M_D x T    IRS -> DL user
  CMat v_ul;               // Nr x T         IRS -> AP
  CMat v_dl;               // T x Nt         AP -> IRS
  std::vector<std::vector<CMat>> j;  // [k][l] M_D x M_U   UL user -> DL user
  CMat h_si;               // Nr x Nt        residual self-interference

  int num_ul() const { return static_cast<int>(h_ul.size()); }
  int num_dl() const { return static_cast<int>(h_dl.size()); }
};

/// Composed low-dimensional channels seen once the IRS phases are fixed.
struct EffectiveCsi {
  std::vector<CMat> h_ul;            // [k] Nr x M_U
  std::vector<CMat> h_dl;            // [l] M_D x Nt
  std::vector<std::vector<CMat>> j;  // [k][l] M_D x M_U
  CMat h_si;                         // Nr x Nt

  int num_ul() const { return static_cast<int>(h_ul.size()); }
  int num_dl() const { return static_cast<int>(h_dl.size()); }
};

/// IRS phase vector; the reflection coefficients are exp(j*theta).
struct PhaseVector {
  RVec theta;

  PhaseVector() = default;
  explicit PhaseVector(RVec t) : theta(std::move(t)) {}
  static PhaseVector zeros(int t) { return PhaseVector(RVec::Zero(t)); }

  int size() const { return static_cast<int>(theta.size()); }
  CVec reflection() const;
};

/// Short-term active precoders.
struct BeamformerSet {
  std::vector<CMat> p;  // [k] M_U x D_U
  std::vector<CMat> f;  // [l] Nt x D_D
};

/// WMMSE receive filters and weights.
struct WmmseAux {
  std::vector<CMat> u_ul;  // [k] Nr x D_U
  std::vector<CMat> u_dl;  // [l] M_D x D_D
  std::vector<CMat> w_ul;  // [k] D_U x D_U
  std::vector<CMat> w_dl;  // [l] D_D x D_D
};

}  // namespace irsfd
