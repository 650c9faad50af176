#include "sbl/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sbl/solver.hpp"

namespace sbl {

namespace {

using Eigen::MatrixXcd;

void check_cov(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict) {
  if (sample_cov.rows() != dict.sensors || sample_cov.cols() != dict.sensors)
    throw std::invalid_argument("sample covariance must be sensors x sensors");
}

struct ProjectionWorkspace {
  MatrixXcd am, x, fit;
  Eigen::ColPivHouseholderQR<MatrixXcd> qr;
};

// ||Y - A_S A_S^+ Y||_F^2 through a rank-revealing QR; the threshold mirrors
// the pseudo-inverse tolerance used for noise estimation.
double residual_sq(const Eigen::MatrixXcd& data, const Dictionary& dict,
                   const std::vector<int>& support, ProjectionWorkspace& ws) {
  const int n = dict.sensors;
  const int k = static_cast<int>(support.size());
  ws.am.resize(n, k);
  for (int i = 0; i < k; ++i) {
    int idx = support[i];
    if (idx < 0 || idx >= dict.size())
      throw std::invalid_argument("support index outside the grid");
    ws.am.col(i) = dict.matrix.col(idx);
  }
  ws.qr.setThreshold(std::max(n, k) * Eigen::NumTraits<double>::epsilon());
  ws.qr.compute(ws.am);
  ws.x = ws.qr.solve(data);
  ws.fit.noalias() = ws.am * ws.x;
  ws.fit -= data;
  return ws.fit.squaredNorm();
}

}  // namespace

Spectrum cbf_spectrum(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict) {
  check_cov(sample_cov, dict);
  Spectrum sp;
  sp.angles_deg = dict.angles_deg;
  MatrixXcd v = sample_cov * dict.matrix;
  sp.values = dict.matrix.conjugate()
                  .cwiseProduct(v)
                  .colwise()
                  .sum()
                  .real()
                  .transpose()
                  .cwiseMax(0.0);
  return sp;
}

double default_diagonal_load(const Eigen::MatrixXcd& sample_cov) {
  return 1e-6 * sample_cov.trace().real() / static_cast<double>(sample_cov.rows());
}

Spectrum mvdr_spectrum(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict,
                       double diagonal_load) {
  check_cov(sample_cov, dict);
  if (diagonal_load < 0.0)
    throw std::invalid_argument("diagonal_load must be >= 0");
  MatrixXcd loaded = sample_cov;
  loaded.diagonal().array() += std::complex<double>(diagonal_load, 0.0);
  Eigen::LLT<MatrixXcd> llt(loaded);
  if (llt.info() != Eigen::Success)
    throw NumericalError("loaded covariance is singular", 0);
  MatrixXcd w = llt.solve(dict.matrix);
  Eigen::VectorXd q =
      dict.matrix.conjugate().cwiseProduct(w).colwise().sum().real().transpose();
  Spectrum sp;
  sp.angles_deg = dict.angles_deg;
  sp.values.resize(dict.size());
  for (int m = 0; m < dict.size(); ++m) {
    if (!(q(m) > 0.0) || !std::isfinite(q(m)))
      throw NumericalError("loaded covariance is singular", 0);
    sp.values(m) = 1.0 / q(m);
  }
  return sp;
}

Spectrum music_spectrum(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict,
                        int k) {
  check_cov(sample_cov, dict);
  if (k < 1 || k >= dict.sensors)
    throw std::invalid_argument("k must satisfy 1 <= k < sensors");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(sample_cov);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed", 0);
  // Eigenvalues come out ascending, so the leading columns span the noise
  // subspace; ties inherit that deterministic ordering.
  MatrixXcd un = es.eigenvectors().leftCols(dict.sensors - k);
  Eigen::VectorXd q =
      (un.adjoint() * dict.matrix).colwise().squaredNorm().transpose();
  double floor = dict.sensors * Eigen::NumTraits<double>::epsilon();
  Spectrum sp;
  sp.angles_deg = dict.angles_deg;
  sp.values = q.cwiseMax(floor).cwiseInverse();
  return sp;
}

double projection_residual(const Eigen::MatrixXcd& data, const Dictionary& dict,
                           const std::vector<int>& support) {
  if (data.rows() != dict.sensors)
    throw std::invalid_argument("data rows must equal sensors");
  if (support.empty()) return data.norm();
  ProjectionWorkspace ws;
  return std::sqrt(residual_sq(data, dict, support, ws));
}

ExhaustiveResult exhaustive_search(const Eigen::MatrixXcd& data,
                                   const Dictionary& dict, int k,
                                   std::uint64_t budget) {
  if (data.rows() != dict.sensors)
    throw std::invalid_argument("data rows must equal sensors");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k > dict.sensors)
    throw std::invalid_argument("k must not exceed the sensor count");
  if (k > dict.size())
    throw std::invalid_argument("k must not exceed the grid size");
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");

  const int m_count = dict.size();
  ProjectionWorkspace ws;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;

  ExhaustiveResult best;
  best.residual = std::numeric_limits<double>::infinity();
  double best_sq = std::numeric_limits<double>::infinity();
  std::uint64_t evals = 0;
  while (true) {
    double r2 = residual_sq(data, dict, idx, ws);
    ++evals;
    if (r2 < best_sq) {
      best_sq = r2;
      best.support = idx;
    }
    int pos = k - 1;
    while (pos >= 0 && idx[pos] == m_count - k + pos) --pos;
    if (pos < 0) break;
    if (evals >= budget) {
      best.complete = false;
      break;
    }
    ++idx[pos];
    for (int t = pos + 1; t < k; ++t) idx[t] = idx[t - 1] + 1;
  }
  best.residual = std::sqrt(best_sq);
  return best;
}

}  // namespace sbl
