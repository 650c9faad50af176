#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sbl/baselines.hpp"
#include "sbl/model.hpp"
#include "sbl/rng.hpp"
#include "sbl/solver.hpp"

using namespace sbl;

namespace {

Eigen::MatrixXcd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng r(seed);
  Eigen::MatrixXcd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = r.normal_complex(1.0);
  }
  return m;
}

Eigen::MatrixXcd random_hpsd(int n, std::uint64_t seed) {
  Eigen::MatrixXcd b = random_matrix(n, n + 3, seed);
  Eigen::MatrixXcd s = (b * b.adjoint()) / static_cast<double>(n + 3);
  s.diagonal().array() += std::complex<double>(0.1, 0.0);
  return s;
}

// Pseudo-inverse projection residual through an SVD, independent of the QR
// path used by the library.
double svd_residual(const Eigen::MatrixXcd& data, const Dictionary& dict,
                    const std::vector<int>& support) {
  int n = dict.sensors;
  int k = static_cast<int>(support.size());
  Eigen::MatrixXcd am(n, k);
  for (int i = 0; i < k; ++i) am.col(i) = dict.matrix.col(support[i]);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      am, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double tol = std::max(n, k) * Eigen::NumTraits<double>::epsilon() *
               svd.singularValues()(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(svd.singularValues().size());
  for (int i = 0; i < inv.size(); ++i) {
    if (svd.singularValues()(i) > tol) inv(i) = 1.0 / svd.singularValues()(i);
  }
  Eigen::MatrixXcd x = svd.matrixV() * inv.asDiagonal() *
                       (svd.matrixU().adjoint() * data);
  return (am * x - data).norm();
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("cbf matches the quadratic form oracle") {
  Dictionary d = build_dictionary(-90.0, 90.0, 15.0, 6, 0.5);
  REQUIRE(d.size() == 13);
  Eigen::MatrixXcd s = random_hpsd(6, 5);
  Spectrum sp = cbf_spectrum(s, d);
  REQUIRE(sp.values.size() == d.size());
  CHECK((sp.angles_deg.array() == d.angles_deg.array()).all());
  for (int m = 0; m < d.size(); ++m) {
    Eigen::VectorXcd a = d.matrix.col(m);
    double want = (a.adjoint() * s * a)(0).real();
    CHECK(sp.values(m) == doctest::Approx(want).epsilon(1e-12));
  }

  // identity covariance flattens the beam pattern at the column norm
  Spectrum flat = cbf_spectrum(Eigen::MatrixXcd::Identity(6, 6), d);
  for (int m = 0; m < d.size(); ++m)
    CHECK(flat.values(m) == doctest::Approx(6.0).epsilon(1e-12));

  // negative quadratic forms clamp to zero rather than leak through
  Spectrum clamped = cbf_spectrum(-Eigen::MatrixXcd::Identity(6, 6), d);
  CHECK(clamped.values.maxCoeff() == 0.0);

  CHECK_THROWS_AS(cbf_spectrum(random_hpsd(5, 6), d), std::invalid_argument);
}

TEST_CASE("default diagonal load is a relative trace fraction") {
  Eigen::MatrixXcd s = random_hpsd(7, 9);
  CHECK(default_diagonal_load(s) ==
        doctest::Approx(1e-6 * s.trace().real() / 7.0).epsilon(1e-15));
}

TEST_CASE("mvdr matches a direct inverse oracle") {
  Dictionary d = build_dictionary(-90.0, 90.0, 15.0, 6, 0.5);
  Eigen::MatrixXcd s = random_hpsd(6, 13);
  double load = default_diagonal_load(s);
  Spectrum sp = mvdr_spectrum(s, d, load);
  Eigen::MatrixXcd inv =
      (s + load * Eigen::MatrixXcd::Identity(6, 6)).inverse();
  for (int m = 0; m < d.size(); ++m) {
    Eigen::VectorXcd a = d.matrix.col(m);
    double want = 1.0 / (a.adjoint() * inv * a)(0).real();
    CHECK(sp.values(m) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("mvdr white noise and scaling invariances") {
  Dictionary d = build_dictionary(-90.0, 90.0, 10.0, 8, 0.5);
  double sigma2 = 0.7, load = 0.05;
  Spectrum white =
      mvdr_spectrum(sigma2 * Eigen::MatrixXcd::Identity(8, 8), d, load);
  for (int m = 0; m < d.size(); ++m)
    CHECK(white.values(m) ==
          doctest::Approx((sigma2 + load) / 8.0).epsilon(1e-12));

  Eigen::MatrixXcd s = random_hpsd(8, 17);
  double c = 3.7;
  Spectrum base = mvdr_spectrum(s, d, load);
  Spectrum scaled = mvdr_spectrum(c * s, d, c * load);
  for (int m = 0; m < d.size(); ++m)
    CHECK(scaled.values(m) == doctest::Approx(c * base.values(m)).epsilon(1e-12));
}

TEST_CASE("mvdr rejects unusable inputs") {
  Dictionary d = build_dictionary(-90.0, 90.0, 15.0, 6, 0.5);
  Eigen::MatrixXcd s = random_hpsd(6, 19);
  CHECK_THROWS_AS(mvdr_spectrum(s, d, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(mvdr_spectrum(Eigen::MatrixXcd::Zero(6, 6), d, 0.0),
                  NumericalError);
}

TEST_CASE("music pins an exactly representable subspace") {
  Dictionary d = build_dictionary(-90.0, 90.0, 1.0, 8, 0.5);
  int i1 = d.nearest_index(-20.0), i2 = d.nearest_index(40.0);
  Eigen::MatrixXcd s = 0.3 * Eigen::MatrixXcd::Identity(8, 8);
  s += 4.0 * (d.matrix.col(i1) * d.matrix.col(i1).adjoint());
  s += 2.0 * (d.matrix.col(i2) * d.matrix.col(i2).adjoint());

  Spectrum sp = music_spectrum(s, d, 2);
  CHECK(sp.values.allFinite());
  CHECK(sp.values(i1) > 1e10);
  CHECK(sp.values(i2) > 1e10);
  double floor = 8.0 * Eigen::NumTraits<double>::epsilon();
  CHECK(sp.values.maxCoeff() <= 1.0 / floor * (1.0 + 1e-12));

  std::vector<int> peaks = find_local_peaks(sp.values, 2);
  std::sort(peaks.begin(), peaks.end());
  CHECK(peaks == std::vector<int>{i1, i2});

  // away from the sources the pseudo-spectrum stays at unit scale
  int far = d.nearest_index(80.0);
  CHECK(sp.values(far) < 10.0);
}

TEST_CASE("music matches the signal-projector complement") {
  Dictionary d = build_dictionary(-90.0, 90.0, 5.0, 7, 0.5);
  Eigen::MatrixXcd s = random_hpsd(7, 23);
  int k = 3;
  Spectrum sp = music_spectrum(s, d, k);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s);
  Eigen::MatrixXcd us = es.eigenvectors().rightCols(k);
  for (int m = 0; m < d.size(); ++m) {
    Eigen::VectorXcd a = d.matrix.col(m);
    double q = (a.adjoint() * a)(0).real() - (us.adjoint() * a).squaredNorm();
    CHECK(sp.values(m) == doctest::Approx(1.0 / q).epsilon(1e-8));
  }

  CHECK_THROWS_AS(music_spectrum(s, d, 0), std::invalid_argument);
  CHECK_THROWS_AS(music_spectrum(s, d, 7), std::invalid_argument);
}

TEST_CASE("projection residual closed forms") {
  Dictionary d = build_dictionary(-90.0, 90.0, 15.0, 4, 0.5);
  Eigen::MatrixXcd y = random_matrix(4, 3, 29);

  CHECK(projection_residual(y, d, {}) == y.norm());

  // single-column projector P = a a^H / N
  int m = 5;
  Eigen::VectorXcd a = d.matrix.col(m);
  Eigen::MatrixXcd resid = y - a * (a.adjoint() * y) / 4.0;
  CHECK(projection_residual(y, d, {m}) ==
        doctest::Approx(resid.norm()).epsilon(1e-12));
  // a duplicated support column spans the same subspace
  CHECK(projection_residual(y, d, {m, m}) ==
        doctest::Approx(resid.norm()).epsilon(1e-12));

  // steering vectors 30 degrees apart on a 4-element half-wave array are
  // orthogonal, so projecting onto one leaves the other intact
  int i0 = d.nearest_index(0.0), i30 = d.nearest_index(30.0);
  Eigen::VectorXcd a0 = d.matrix.col(i0);
  REQUIRE(std::abs((d.matrix.col(i30).adjoint() * a0)(0)) < 1e-12);
  CHECK(projection_residual(a0, d, {i30}) ==
        doctest::Approx(a0.norm()).epsilon(1e-12));
  CHECK(projection_residual(a0, d, {i0}) < 1e-12);

  CHECK_THROWS_AS(projection_residual(y, d, {99}), std::invalid_argument);
  CHECK_THROWS_AS(projection_residual(random_matrix(3, 2, 31), d, {0}),
                  std::invalid_argument);
}

TEST_CASE("exhaustive search recovers a noise-free support") {
  Dictionary d = build_dictionary(-90.0, 75.0, 15.0, 6, 0.5);
  REQUIRE(d.size() == 12);
  std::vector<int> truth = {2, 9};
  Eigen::MatrixXcd am(6, 2);
  am.col(0) = d.matrix.col(truth[0]);
  am.col(1) = d.matrix.col(truth[1]);
  Eigen::MatrixXcd y = am * random_matrix(2, 4, 37);

  ExhaustiveResult r = exhaustive_search(y, d, 2);
  CHECK(r.support == truth);
  CHECK(r.residual < 1e-10 * y.norm());
  CHECK(r.complete);
}

TEST_CASE("exhaustive search matches an independent full enumeration") {
  Dictionary d = build_dictionary(-90.0, 75.0, 15.0, 6, 0.5);
  Eigen::MatrixXcd y = random_matrix(6, 3, 41);
  ExhaustiveResult r = exhaustive_search(y, d, 2);
  REQUIRE(r.complete);

  // enumerate in reverse order through the SVD pseudo-inverse
  std::vector<int> best;
  double best_res = std::numeric_limits<double>::infinity();
  for (int j = d.size() - 1; j >= 1; --j) {
    for (int i = j - 1; i >= 0; --i) {
      double res = svd_residual(y, d, {i, j});
      if (res < best_res) {
        best_res = res;
        best = {i, j};
      }
    }
  }
  CHECK(r.support == best);
  CHECK(r.residual == doctest::Approx(best_res).epsilon(1e-10));
  CHECK(r.residual ==
        doctest::Approx(projection_residual(y, d, r.support)).epsilon(1e-12));
}

TEST_CASE("exhaustive search budget truncates the enumeration honestly") {
  Dictionary d = build_dictionary(-90.0, 30.0, 30.0, 6, 0.5);
  REQUIRE(d.size() == 5);
  Eigen::MatrixXcd y = random_matrix(6, 2, 43);

  // C(5, 2) = 10 candidates in lexicographic order
  ExhaustiveResult full = exhaustive_search(y, d, 2, 10);
  CHECK(full.complete);
  ExhaustiveResult cut = exhaustive_search(y, d, 2, 9);
  CHECK(!cut.complete);
  ExhaustiveResult first = exhaustive_search(y, d, 2, 1);
  CHECK(!first.complete);
  CHECK(first.support == std::vector<int>{0, 1});
  CHECK(first.residual ==
        doctest::Approx(projection_residual(y, d, {0, 1})).epsilon(1e-12));

  // the truncated best agrees with scanning the same prefix by hand
  std::vector<std::vector<int>> combos;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) combos.push_back({i, j});
  }
  std::vector<int> best;
  double best_res = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 9; ++c) {
    double res = svd_residual(y, d, combos[c]);
    if (res < best_res) {
      best_res = res;
      best = combos[c];
    }
  }
  CHECK(cut.support == best);
}

TEST_CASE("exhaustive search keeps the earliest exact tie") {
  // hand-built dictionary with a bitwise duplicate column
  Dictionary d = build_dictionary(-45.0, 45.0, 45.0, 5, 0.5);
  REQUIRE(d.size() == 3);
  Dictionary dup = d;
  dup.matrix.conservativeResize(5, 4);
  dup.matrix.col(3) = d.matrix.col(0);
  dup.angles_deg.conservativeResize(4);
  dup.angles_deg(3) = 60.0;

  Eigen::MatrixXcd y = dup.matrix.col(0) * random_matrix(1, 3, 47);
  ExhaustiveResult r = exhaustive_search(y, dup, 1);
  CHECK(r.support == std::vector<int>{0});
  CHECK(r.residual < 1e-12 * y.norm());
}

TEST_CASE("exhaustive search argument validation") {
  Dictionary d = build_dictionary(-90.0, 90.0, 30.0, 4, 0.5);
  Eigen::MatrixXcd y = random_matrix(4, 2, 53);
  CHECK_THROWS_AS(exhaustive_search(y, d, 0), std::invalid_argument);
  CHECK_THROWS_AS(exhaustive_search(y, d, 5), std::invalid_argument);
  CHECK_THROWS_AS(exhaustive_search(y, d, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(exhaustive_search(random_matrix(3, 2, 54), d, 2),
                  std::invalid_argument);
  Dictionary tiny = build_dictionary(0.0, 30.0, 30.0, 4, 0.5);
  REQUIRE(tiny.size() == 2);
  CHECK_THROWS_AS(exhaustive_search(y, tiny, 3), std::invalid_argument);
}

}  // TEST_SUITE
