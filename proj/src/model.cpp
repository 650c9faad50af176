#include "sbl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sbl/rng.hpp"

namespace sbl {

namespace {
constexpr double kPi = 3.141592653589793238462643;
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

double power_db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

int SceneSpec::weakest_source() const {
  if (sources.empty()) throw std::invalid_argument("scene has no sources");
  int best = 0;
  for (int k = 1; k < static_cast<int>(sources.size()); ++k) {
    if (sources[k].power_db < sources[best].power_db) best = k;
  }
  return best;
}

double noise_variance_for_snr(const SceneSpec& scene) {
  // SNR is per sensor and referenced to the weakest source; replica columns
  // have unit-modulus entries, so source power at a sensor equals its nominal
  // power and sigma^2 = P_weakest * 10^(-SNR/10).
  double p = power_db_to_linear(scene.sources[scene.weakest_source()].power_db);
  return p * std::pow(10.0, -scene.snr_db / 10.0);
}

Eigen::VectorXcd steering_vector(double theta_deg, int sensors,
                                 double spacing_wavelengths) {
  if (sensors < 1) throw std::invalid_argument("sensors must be >= 1");
  if (!(spacing_wavelengths > 0.0))
    throw std::invalid_argument("spacing_wavelengths must be > 0");
  Eigen::VectorXcd a(sensors);
  double s = 2.0 * kPi * spacing_wavelengths * std::sin(theta_deg * kDegToRad);
  for (int n = 0; n < sensors; ++n) a(n) = std::polar(1.0, s * n);
  return a;
}

Dictionary build_dictionary(double grid_start_deg, double grid_stop_deg,
                            double grid_step_deg, int sensors,
                            double spacing_wavelengths) {
  if (!(grid_step_deg > 0.0))
    throw std::invalid_argument("grid_step_deg must be > 0");
  if (grid_stop_deg < grid_start_deg)
    throw std::invalid_argument("grid_stop_deg must be >= grid_start_deg");
  int m_count =
      static_cast<int>(std::floor((grid_stop_deg - grid_start_deg) / grid_step_deg + 1e-9)) + 1;
  Dictionary dict;
  dict.sensors = sensors;
  dict.spacing_wavelengths = spacing_wavelengths;
  dict.angles_deg.resize(m_count);
  dict.matrix.resize(sensors, m_count);
  for (int m = 0; m < m_count; ++m) {
    double angle = grid_start_deg + m * grid_step_deg;
    dict.angles_deg(m) = angle;
    dict.matrix.col(m) = steering_vector(angle, sensors, spacing_wavelengths);
  }
  return dict;
}

int Dictionary::nearest_index(double angle_deg) const {
  if (angles_deg.size() == 0) throw std::invalid_argument("empty dictionary");
  const double* begin = angles_deg.data();
  const double* end = begin + angles_deg.size();
  const double* it = std::lower_bound(begin, end, angle_deg);
  if (it == begin) return 0;
  if (it == end) return static_cast<int>(angles_deg.size()) - 1;
  int hi = static_cast<int>(it - begin);
  int lo = hi - 1;
  // Ties snap toward the lower index.
  return (angle_deg - angles_deg(lo) <= angles_deg(hi) - angle_deg) ? lo : hi;
}

Eigen::MatrixXcd sample_covariance(const Eigen::MatrixXcd& data) {
  if (data.cols() < 1) throw std::invalid_argument("need at least one snapshot");
  return (data * data.adjoint()) / static_cast<double>(data.cols());
}

SnapshotSet make_snapshot_set(const Eigen::MatrixXcd& data) {
  return {data, sample_covariance(data)};
}

SnapshotSet snapshot_set_from_covariance(const Eigen::MatrixXcd& cov,
                                         int snapshots) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("cov must be square");
  int n = static_cast<int>(cov.rows());
  if (snapshots < n)
    throw std::invalid_argument("snapshots must be >= cov.rows()");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(cov);
  if (es.info() != Eigen::Success)
    throw std::invalid_argument("cov eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXcd root =
      es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
  Eigen::MatrixXcd data = Eigen::MatrixXcd::Zero(n, snapshots);
  data.leftCols(n) = std::sqrt(static_cast<double>(snapshots)) * root;
  return make_snapshot_set(data);
}

SnapshotSet synthesize_snapshots(const SceneSpec& scene, const Dictionary& dict,
                                 std::uint64_t seed) {
  if (scene.sources.empty()) throw std::invalid_argument("scene has no sources");
  if (scene.snapshots < 1) throw std::invalid_argument("snapshots must be >= 1");
  int n = dict.sensors;
  int m_count = dict.size();
  int k_count = static_cast<int>(scene.sources.size());
  std::vector<int> grid_index(k_count);
  std::vector<double> amp(k_count);
  for (int k = 0; k < k_count; ++k) {
    double angle = scene.sources[k].angle_deg;
    if (angle < dict.angles_deg(0) || angle > dict.angles_deg(m_count - 1))
      throw std::invalid_argument("source angle outside the dictionary grid");
    grid_index[k] = dict.nearest_index(angle);
    amp[k] = std::sqrt(power_db_to_linear(scene.sources[k].power_db));
  }
  double sigma2 = noise_variance_for_snr(scene);

  Rng root(seed);
  Eigen::MatrixXcd data(n, scene.snapshots);
  for (int l = 0; l < scene.snapshots; ++l) {
    Rng r = root.fork(static_cast<std::uint64_t>(l));
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
    for (int k = 0; k < k_count; ++k) {
      std::complex<double> x =
          scene.amplitude_model == AmplitudeModel::ConstantMagnitudeRandomPhase
              ? amp[k] * r.unit_phase()
              : r.normal_complex(amp[k] * amp[k]);
      y.noalias() += dict.matrix.col(grid_index[k]) * x;
    }
    if (sigma2 > 0.0) {
      for (int i = 0; i < n; ++i) y(i) += r.normal_complex(sigma2);
    }
    data.col(l) = y;
  }
  return make_snapshot_set(data);
}

Dictionary apply_multiplicative_perturbation(const Dictionary& dict,
                                             double delta0, std::uint64_t seed,
                                             bool shared_per_column) {
  if (delta0 < 0.0) throw std::invalid_argument("delta0 must be >= 0");
  Dictionary out = dict;
  Rng r(seed);
  double half = 0.5 * delta0;
  if (shared_per_column) {
    for (int nrow = 0; nrow < dict.sensors; ++nrow) {
      out.matrix.row(nrow) *= std::polar(1.0, r.uniform(-half, half));
    }
  } else {
    for (int nrow = 0; nrow < dict.sensors; ++nrow) {
      for (int m = 0; m < dict.size(); ++m) {
        out.matrix(nrow, m) *= std::polar(1.0, r.uniform(-half, half));
      }
    }
  }
  return out;
}

}  // namespace sbl
