#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

namespace sbl {

// Plane-wave replica dictionary for a uniform linear array. Column m holds the
// steering vector for angles_deg[m]; spacing_wavelengths is the element
// spacing over the wavelength at which the dictionary is evaluated.
struct Dictionary {
  Eigen::MatrixXcd matrix;     // N x M
  Eigen::VectorXd angles_deg;  // strictly increasing grid
  double spacing_wavelengths = 0.5;
  int sensors = 0;

  int size() const { return static_cast<int>(matrix.cols()); }
  int nearest_index(double angle_deg) const;
};

enum class AmplitudeModel {
  ConstantMagnitudeRandomPhase,  // |x| fixed at sqrt(power), phase uniform per snapshot
  ComplexGaussian,               // x ~ CN(0, power) per snapshot
};

struct SourceSpec {
  double angle_deg = 0.0;
  double power_db = 0.0;
};

// Ground-truth scene. SNR is referenced to the weakest source, so the noise
// power follows from the source powers rather than being given directly.
struct SceneSpec {
  std::vector<SourceSpec> sources;
  AmplitudeModel amplitude_model = AmplitudeModel::ConstantMagnitudeRandomPhase;
  double snr_db = 0.0;
  int snapshots = 30;
  std::vector<double> frequencies = {1.0};  // relative to the lowest processed band

  int weakest_source() const;  // lowest power; ties resolve to the lowest index
};

struct SnapshotSet {
  Eigen::MatrixXcd data;               // N x L
  Eigen::MatrixXcd sample_covariance;  // (1/L) * data * data^H
};

// Homoscedastic uncertainty parameters: phi_e scales the identity covariance
// of the steering-vector error, gamma_e is the power of the additive
// unit-norm weight-error column shared by every grid point.
struct UncertaintyModel {
  double phi_e = 0.0;
  double gamma_e = 0.0;
};

double power_db_to_linear(double db);
double noise_variance_for_snr(const SceneSpec& scene);

Eigen::VectorXcd steering_vector(double theta_deg, int sensors,
                                 double spacing_wavelengths);

Dictionary build_dictionary(double grid_start_deg, double grid_stop_deg,
                            double grid_step_deg, int sensors,
                            double spacing_wavelengths);

Eigen::MatrixXcd sample_covariance(const Eigen::MatrixXcd& data);

SnapshotSet make_snapshot_set(const Eigen::MatrixXcd& data);

// Synthetic snapshot set whose sample covariance equals `cov` exactly (up to
// roundoff). Requires snapshots >= cov.rows(). Useful for driving the solver
// from a designed covariance instead of random draws.
SnapshotSet snapshot_set_from_covariance(const Eigen::MatrixXcd& cov,
                                         int snapshots);

SnapshotSet synthesize_snapshots(const SceneSpec& scene, const Dictionary& dict,
                                 std::uint64_t seed);

// Row-wise multiplicative phase errors exp(j delta_n), delta_n uniform on
// [-delta0/2, delta0/2], drawn once per sensor and shared across columns.
// With shared_per_column = false every entry gets its own draw.
Dictionary apply_multiplicative_perturbation(const Dictionary& dict,
                                             double delta0, std::uint64_t seed,
                                             bool shared_per_column = true);

}  // namespace sbl
