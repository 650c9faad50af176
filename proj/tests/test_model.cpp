#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>

#include "sbl/model.hpp"
#include "sbl/rng.hpp"

using namespace sbl;

namespace {

constexpr double kPi = 3.141592653589793238462643;

Eigen::MatrixXcd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng r(seed);
  Eigen::MatrixXcd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = r.normal_complex(1.0);
  }
  return m;
}

// Dirichlet-kernel magnitude of a steering inner product, computed without
// touching the dictionary code.
double dirichlet_gram(double theta_i_deg, double theta_j_deg, int sensors,
                      double spacing) {
  double x = spacing * (std::sin(theta_j_deg * kPi / 180.0) -
                        std::sin(theta_i_deg * kPi / 180.0));
  double denom = std::sin(kPi * x);
  if (std::abs(denom) < 1e-14) return static_cast<double>(sensors);
  return std::abs(std::sin(sensors * kPi * x) / denom);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("steering vector hand values at 30 degrees") {
  Eigen::VectorXcd a = steering_vector(30.0, 4, 0.5);
  std::complex<double> j(0.0, 1.0);
  CHECK(std::abs(a(0) - std::complex<double>(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(a(1) - j) < 1e-12);
  CHECK(std::abs(a(2) - std::complex<double>(-1.0, 0.0)) < 1e-12);
  CHECK(std::abs(a(3) - (-j)) < 1e-12);
  CHECK(a.norm() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("steering vector at broadside is all ones") {
  Eigen::VectorXcd a = steering_vector(0.0, 6, 0.5);
  for (int n = 0; n < 6; ++n)
    CHECK(std::abs(a(n) - std::complex<double>(1.0, 0.0)) < 1e-15);
}

TEST_CASE("dictionary grid layout and column norms") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, 20, 0.5);
  REQUIRE(dict.size() == 181);
  CHECK(dict.angles_deg(0) == doctest::Approx(-90.0));
  CHECK(dict.angles_deg(180) == doctest::Approx(90.0));
  CHECK(dict.sensors == 20);
  for (int m = 0; m < dict.size(); m += 13) {
    CHECK(dict.matrix.col(m).norm() ==
          doctest::Approx(std::sqrt(20.0)).epsilon(1e-12));
    Eigen::VectorXcd ref = steering_vector(dict.angles_deg(m), 20, 0.5);
    CHECK((dict.matrix.col(m) - ref).norm() == 0.0);
  }
}

TEST_CASE("nearest_index snapping and tie handling") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, 4, 0.5);
  CHECK(dict.nearest_index(-90.0) == 0);
  CHECK(dict.nearest_index(90.0) == 180);
  CHECK(dict.nearest_index(0.4) == 90);
  CHECK(dict.nearest_index(0.6) == 91);
  CHECK(dict.nearest_index(0.5) == 90);  // tie snaps down
  CHECK(dict.nearest_index(-95.0) == 0);
  CHECK(dict.nearest_index(95.0) == 180);
}

TEST_CASE("gram magnitudes match the Dirichlet kernel") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, 20, 1.0);
  auto gram = [&](int i, int j) {
    return std::abs(dict.matrix.col(i).dot(dict.matrix.col(j)));
  };
  int i0 = dict.nearest_index(0.0);
  int i90 = dict.nearest_index(90.0);
  int im15 = dict.nearest_index(-15.0);
  int i48 = dict.nearest_index(48.0);
  // sin(90) - sin(0) = 1 and spacing 1.0: exact grating-lobe copy.
  CHECK(gram(i0, i90) == doctest::Approx(20.0).epsilon(1e-12));
  for (int a = 0; a < dict.size(); a += 7) {
    for (int b = a; b < dict.size(); b += 11) {
      CHECK(gram(a, b) ==
            doctest::Approx(dirichlet_gram(dict.angles_deg(a), dict.angles_deg(b),
                                           20, 1.0))
                .epsilon(1e-9)
                .scale(20.0));
    }
  }
  // The -15 degree source folds near 48 degrees at double frequency.
  CHECK(gram(im15, i48) > 0.9 * 20.0);
}

TEST_CASE("sample covariance equals the naive average of outer products") {
  Eigen::MatrixXcd y = random_matrix(6, 17, 99);
  Eigen::MatrixXcd s = sample_covariance(y);
  Eigen::MatrixXcd naive = Eigen::MatrixXcd::Zero(6, 6);
  for (int l = 0; l < 17; ++l)
    naive += y.col(l) * y.col(l).adjoint() / 17.0;
  CHECK((s - naive).norm() < 1e-12 * naive.norm());
  CHECK((s - s.adjoint()).norm() < 1e-12 * s.norm());
}

TEST_CASE("snapshot set from covariance reproduces it") {
  Eigen::MatrixXcd b = random_matrix(8, 8, 5);
  Eigen::MatrixXcd cov = b * b.adjoint() / 8.0;
  SnapshotSet set = snapshot_set_from_covariance(cov, 40);
  REQUIRE(set.data.cols() == 40);
  CHECK((set.sample_covariance - cov).norm() < 1e-10 * cov.norm());
  CHECK_THROWS_AS(snapshot_set_from_covariance(cov, 7), std::invalid_argument);
}

TEST_CASE("synthesis is deterministic in the seed") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, 10, 0.5);
  SceneSpec scene;
  scene.sources = {{-10.0, 10.0}, {30.0, 6.0}};
  scene.snr_db = 5.0;
  scene.snapshots = 12;
  SnapshotSet a = synthesize_snapshots(scene, dict, 77);
  SnapshotSet b = synthesize_snapshots(scene, dict, 77);
  SnapshotSet c = synthesize_snapshots(scene, dict, 78);
  CHECK((a.data.array() == b.data.array()).all());
  CHECK((a.data - c.data).norm() > 0.0);
}

TEST_CASE("constant magnitude model is exact when noise is off") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, 5, 0.5);
  SceneSpec scene;
  scene.sources = {{0.0, 13.0}};
  scene.snr_db = std::numeric_limits<double>::infinity();  // sigma2 = 0
  scene.snapshots = 50;
  SnapshotSet set = synthesize_snapshots(scene, dict, 3);
  double amp = std::sqrt(power_db_to_linear(13.0));
  for (int l = 0; l < 50; ++l) {
    CHECK(std::abs(std::abs(set.data(0, l)) - amp) < 1e-12);
  }
}

TEST_CASE("complex gaussian amplitudes have the configured power") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, 5, 0.5);
  SceneSpec scene;
  scene.sources = {{0.0, 13.0}};
  scene.amplitude_model = AmplitudeModel::ComplexGaussian;
  scene.snr_db = std::numeric_limits<double>::infinity();
  scene.snapshots = 5000;
  SnapshotSet set = synthesize_snapshots(scene, dict, 11);
  double power = set.data.row(0).squaredNorm() / 5000.0;
  CHECK(power == doctest::Approx(power_db_to_linear(13.0)).epsilon(0.05));
}

TEST_CASE("synthesized data hits the requested snr within 0.2 dB") {
  const int sensors = 20;
  const double snr_db = 5.0;
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, sensors, 0.5);
  SceneSpec scene;
  scene.sources = {{0.0, 10.0}};
  scene.snr_db = snr_db;
  scene.snapshots = 1000;
  SnapshotSet set = synthesize_snapshots(scene, dict, 2);
  Eigen::VectorXcd a = steering_vector(0.0, sensors, 0.5);
  // Noise power from the signal-free complement, signal power from the
  // matched projection with the noise bias removed.
  Eigen::MatrixXcd proj = a * (a.adjoint() * set.data) / double(sensors);
  double noise_var =
      (set.data - proj).squaredNorm() / (1000.0 * (sensors - 1));
  double matched = (a.adjoint() * set.data).squaredNorm() / 1000.0;
  double signal = (matched - sensors * noise_var) / (sensors * double(sensors));
  double snr_est = 10.0 * std::log10(signal / noise_var);
  CHECK(std::abs(snr_est - snr_db) < 0.2);
  CHECK(noise_var ==
        doctest::Approx(noise_variance_for_snr(scene)).epsilon(0.03));
}

TEST_CASE("noise variance follows the weakest source") {
  SceneSpec scene;
  scene.sources = {{0.0, 22.0}, {75.0, 20.0}};
  scene.snr_db = 0.0;
  CHECK(noise_variance_for_snr(scene) ==
        doctest::Approx(power_db_to_linear(20.0)).epsilon(1e-12));
  scene.snr_db = 10.0;
  CHECK(noise_variance_for_snr(scene) ==
        doctest::Approx(power_db_to_linear(10.0)).epsilon(1e-12));
  SceneSpec ties;
  ties.sources = {{0.0, 3.0}, {10.0, 3.0}, {20.0, 5.0}};
  CHECK(ties.weakest_source() == 0);
}

TEST_CASE("zero perturbation returns the dictionary bit for bit") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 2.0, 8, 0.5);
  Dictionary out = apply_multiplicative_perturbation(dict, 0.0, 123);
  CHECK((out.matrix.array() == dict.matrix.array()).all());
}

TEST_CASE("perturbation applies one phase per sensor row") {
  Dictionary dict = build_dictionary(-90.0, 90.0, 1.0, 12, 0.5);
  const double delta0 = 0.8;
  Dictionary out = apply_multiplicative_perturbation(dict, delta0, 9);
  for (int n = 0; n < 12; ++n) {
    std::complex<double> factor = out.matrix(n, 0) / dict.matrix(n, 0);
    CHECK(std::abs(std::abs(factor) - 1.0) < 1e-12);
    CHECK(std::abs(std::arg(factor)) <= delta0 / 2 + 1e-12);
    for (int m = 1; m < dict.size(); m += 17) {
      std::complex<double> other = out.matrix(n, m) / dict.matrix(n, m);
      CHECK(std::abs(other - factor) < 1e-12);
    }
  }
  // Column norms are invariant under per-row phases.
  for (int m = 0; m < dict.size(); m += 23) {
    CHECK(out.matrix.col(m).norm() ==
          doctest::Approx(dict.matrix.col(m).norm()).epsilon(1e-12));
  }
  Dictionary independent =
      apply_multiplicative_perturbation(dict, delta0, 9, false);
  std::complex<double> f0 = independent.matrix(0, 0) / dict.matrix(0, 0);
  std::complex<double> f1 = independent.matrix(0, 1) / dict.matrix(0, 1);
  CHECK(std::abs(f0 - f1) > 1e-6);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(steering_vector(0.0, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(steering_vector(0.0, 4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_dictionary(-90.0, 90.0, 0.0, 4, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_dictionary(10.0, -10.0, 1.0, 4, 0.5),
                  std::invalid_argument);
  Dictionary dict = build_dictionary(-10.0, 10.0, 1.0, 4, 0.5);
  SceneSpec scene;
  scene.sources = {{45.0, 0.0}};
  CHECK_THROWS_AS(synthesize_snapshots(scene, dict, 0), std::invalid_argument);
  scene.sources = {};
  CHECK_THROWS_AS(synthesize_snapshots(scene, dict, 0), std::invalid_argument);
  scene.sources = {{0.0, 0.0}};
  scene.snapshots = 0;
  CHECK_THROWS_AS(synthesize_snapshots(scene, dict, 0), std::invalid_argument);
  CHECK_THROWS_AS(apply_multiplicative_perturbation(dict, -0.1, 0),
                  std::invalid_argument);
  Eigen::MatrixXcd empty(4, 0);
  CHECK_THROWS_AS(sample_covariance(empty), std::invalid_argument);
}

}  // TEST_SUITE
