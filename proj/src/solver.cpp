#include "sbl/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace sbl {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXd;

void check_gamma(const VectorXd& gamma, int m_count) {
  if (gamma.size() != m_count)
    throw std::invalid_argument("gamma length must match the dictionary size");
  for (int m = 0; m < m_count; ++m) {
    if (!(gamma(m) >= 0.0))
      throw std::invalid_argument("gamma entries must be >= 0");
  }
}

// Sigma_y into `out`; `aah` is a cached A A^H, required when gamma_e != 0.
void assemble_into(MatrixXcd& out, MatrixXcd& scaled, const MatrixXcd& a,
                   const MatrixXcd* aah, const VectorXd& gamma,
                   const UncertaintyModel& unc, double sigma2) {
  const int m_count = static_cast<int>(a.cols());
  scaled.resize(a.rows(), m_count);
  for (int m = 0; m < m_count; ++m) scaled.col(m) = a.col(m) * gamma(m);
  out.noalias() = scaled * a.adjoint();
  if (unc.gamma_e != 0.0) out.noalias() += unc.gamma_e * (*aah);
  double d = sigma2 + unc.phi_e * (gamma.sum() + m_count * unc.gamma_e);
  out.diagonal().array() += std::complex<double>(d, 0.0);
}

struct UpdateWorkspace {
  MatrixXcd u, v, t;
};

// Numerator and denominator of the fixed-point ratio for every grid point.
void update_terms(const MatrixXcd& si, const MatrixXcd& s, const MatrixXcd& a,
                  double phi_e, UpdateWorkspace& ws, VectorXd& num,
                  VectorXd& den) {
  ws.u.noalias() = si * a;
  ws.v.noalias() = s * ws.u;
  den = a.conjugate().cwiseProduct(ws.u).colwise().sum().real().transpose();
  num = ws.u.conjugate().cwiseProduct(ws.v).colwise().sum().real().transpose();
  if (phi_e != 0.0) {
    ws.t.noalias() = si * s;
    double tr_si = si.trace().real();
    double tr_si_si_s = si.cwiseProduct(ws.t.transpose()).sum().real();
    num.array() += phi_e * tr_si_si_s;
    den.array() += phi_e * tr_si;
  }
}

VectorXd apply_update(const VectorXd& gamma_old, const VectorXd& num,
                      const VectorXd& den, double b, int iteration) {
  VectorXd out(gamma_old.size());
  for (int m = 0; m < gamma_old.size(); ++m) {
    double ratio = num(m) / den(m);
    if (!std::isfinite(ratio))
      throw NumericalError("non-finite update ratio", iteration);
    double g = gamma_old(m) * (b == 1.0 ? ratio : std::pow(ratio, b));
    if (!std::isfinite(g)) throw NumericalError("non-finite gamma", iteration);
    out(m) = g;
  }
  return out;
}

// Per-dictionary state reused across iterations so the hot loop allocates
// nothing beyond Eigen's GEMM packing buffers.
struct DictState {
  const Dictionary* dict = nullptr;
  const SnapshotSet* snaps = nullptr;
  UncertaintyModel unc;
  double snapshot_count = 0.0;
  double sigma2 = 0.0;
  MatrixXcd aah, sigma, inv, scaled, eye;
  Eigen::LLT<MatrixXcd> llt;
  UpdateWorkspace ws;
  VectorXd num, den;
};

// Shared-gamma iteration; run_sbl is the F = 1 instance and run_sbl_cc the
// general one, so both follow bit-identical code paths.
SblResult run_shared(const SblProblem& problem, const SolverOptions& options) {
  problem.validate();
  const int f_count = problem.size();
  const int m_count = problem.dictionaries[0].size();
  int min_sensors = problem.dictionaries[0].sensors;
  for (const auto& d : problem.dictionaries)
    min_sensors = std::min(min_sensors, d.sensors);
  options.validate(min_sensors);

  std::vector<DictState> fs(f_count);
  for (int f = 0; f < f_count; ++f) {
    DictState& st = fs[f];
    st.dict = &problem.dictionaries[f];
    st.snaps = &problem.snapshots[f];
    st.unc = problem.uncertainty[f];
    st.snapshot_count = static_cast<double>(st.snaps->data.cols());
    st.sigma2 = options.sigma2_init;
    st.eye = MatrixXcd::Identity(st.dict->sensors, st.dict->sensors);
    if (st.unc.gamma_e != 0.0)
      st.aah = st.dict->matrix * st.dict->matrix.adjoint();
  }

  VectorXd gamma = VectorXd::Constant(m_count, options.gamma_init);
  VectorXd num_sum(m_count), den_sum(m_count), gamma_new;
  SblResult out;
  out.evidence_trace.reserve(options.max_iterations + 1);

  auto factor_and_evidence = [&](int iteration_label) {
    double ev = 0.0;
    for (auto& st : fs) {
      assemble_into(st.sigma, st.scaled, st.dict->matrix,
                    st.unc.gamma_e != 0.0 ? &st.aah : nullptr, gamma, st.unc,
                    st.sigma2);
      st.llt.compute(st.sigma);
      if (st.llt.info() != Eigen::Success)
        throw NumericalError("covariance factorization failed", iteration_label);
      double logdet =
          2.0 * st.llt.matrixLLT().diagonal().real().array().log().sum();
      st.inv = st.llt.solve(st.eye);
      double tr =
          st.inv.cwiseProduct(st.snaps->sample_covariance.transpose()).sum().real();
      ev -= st.snapshot_count * (logdet + tr);
    }
    if (!std::isfinite(ev))
      throw NumericalError("non-finite evidence", iteration_label);
    return ev;
  };

  std::vector<int> support;
  bool converged = false;
  int iterations = 0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    out.evidence_trace.push_back(factor_and_evidence(iter));
    num_sum.setZero();
    den_sum.setZero();
    for (auto& st : fs) {
      update_terms(st.inv, st.snaps->sample_covariance, st.dict->matrix,
                   st.unc.phi_e, st.ws, st.num, st.den);
      num_sum += st.num;
      den_sum += st.den;
    }
    gamma_new = apply_update(gamma, num_sum, den_sum, options.exponent_b, iter);
    support = find_local_peaks(gamma_new, options.k_sources);
    for (auto& st : fs) {
      st.sigma2 = estimate_noise(st.snaps->sample_covariance, *st.dict, support,
                                 static_cast<int>(support.size()));
    }
    double change = (gamma_new - gamma).lpNorm<1>();
    double base = gamma.lpNorm<1>();
    double rel = base > 0.0
                     ? change / base
                     : (change > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    gamma.swap(gamma_new);
    iterations = iter;
    if (rel < options.epsilon) {
      converged = true;
      break;
    }
  }
  out.evidence_trace.push_back(factor_and_evidence(iterations));

  out.gamma = std::move(gamma);
  out.iterations = iterations;
  out.converged = converged;
  out.support = std::move(support);
  // The floor filters reporting only; the iteration above never prunes.
  if (options.gamma_floor > 0.0) {
    std::erase_if(out.support,
                  [&](int idx) { return out.gamma(idx) < options.gamma_floor; });
  }
  out.sigma2.resize(f_count);
  for (int f = 0; f < f_count; ++f) out.sigma2(f) = fs[f].sigma2;
  if (options.compute_posterior) {
    for (int f = 0; f < f_count; ++f) {
      Posterior p = posterior(out.gamma, fs[f].sigma2, *fs[f].dict, fs[f].unc,
                              fs[f].snaps->data);
      out.posterior_means.push_back(std::move(p.means));
      out.posterior_covariance.push_back(std::move(p.covariance));
    }
  }
  return out;
}

}  // namespace

void SolverOptions::validate(int sensors) const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (max_iterations < 1)
    throw std::invalid_argument("max_iterations must be >= 1");
  if (!(exponent_b > 0.0) || exponent_b > 1.0)
    throw std::invalid_argument("exponent_b must be in (0, 1]");
  if (k_sources < 0) throw std::invalid_argument("k_sources must be >= 0");
  if (k_sources >= sensors)
    throw std::invalid_argument("k_sources must be < sensors");
  if (!(gamma_init > 0.0)) throw std::invalid_argument("gamma_init must be > 0");
  if (!(sigma2_init > 0.0))
    throw std::invalid_argument("sigma2_init must be > 0");
  if (gamma_floor < 0.0) throw std::invalid_argument("gamma_floor must be >= 0");
}

void SblProblem::validate() const {
  if (dictionaries.empty())
    throw std::invalid_argument("problem needs at least one dictionary");
  if (snapshots.size() != dictionaries.size() ||
      uncertainty.size() != dictionaries.size())
    throw std::invalid_argument(
        "dictionaries, snapshots, and uncertainty must have equal length");
  int m_count = dictionaries[0].size();
  for (size_t f = 0; f < dictionaries.size(); ++f) {
    const Dictionary& d = dictionaries[f];
    if (d.matrix.rows() != d.sensors)
      throw std::invalid_argument("dictionary rows must equal sensors");
    if (d.size() != m_count)
      throw std::invalid_argument("all dictionaries must share one grid size");
    if (snapshots[f].data.rows() != d.sensors)
      throw std::invalid_argument("snapshot rows must equal sensors");
    if (snapshots[f].data.cols() < 1)
      throw std::invalid_argument("need at least one snapshot");
    if (snapshots[f].sample_covariance.rows() != d.sensors ||
        snapshots[f].sample_covariance.cols() != d.sensors)
      throw std::invalid_argument("sample covariance must be sensors x sensors");
    if (uncertainty[f].phi_e < 0.0 || uncertainty[f].gamma_e < 0.0)
      throw std::invalid_argument("uncertainty parameters must be >= 0");
  }
}

Eigen::MatrixXcd assemble_noise_covariance(const Eigen::VectorXd& gamma,
                                           const UncertaintyModel& uncertainty,
                                           const Dictionary& dict,
                                           double sigma2) {
  check_gamma(gamma, dict.size());
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be > 0");
  if (uncertainty.phi_e < 0.0 || uncertainty.gamma_e < 0.0)
    throw std::invalid_argument("uncertainty parameters must be >= 0");
  int n = dict.sensors;
  MatrixXcd out = MatrixXcd::Zero(n, n);
  if (uncertainty.gamma_e != 0.0)
    out.noalias() = uncertainty.gamma_e * (dict.matrix * dict.matrix.adjoint());
  double d = sigma2 + uncertainty.phi_e * (gamma.sum() + dict.size() * uncertainty.gamma_e);
  out.diagonal().array() += std::complex<double>(d, 0.0);
  return out;
}

Eigen::MatrixXcd assemble_data_covariance(const Eigen::VectorXd& gamma,
                                          const UncertaintyModel& uncertainty,
                                          const Dictionary& dict,
                                          double sigma2) {
  check_gamma(gamma, dict.size());
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be > 0");
  if (uncertainty.phi_e < 0.0 || uncertainty.gamma_e < 0.0)
    throw std::invalid_argument("uncertainty parameters must be >= 0");
  MatrixXcd out, scaled, aah;
  const MatrixXcd* aah_ptr = nullptr;
  if (uncertainty.gamma_e != 0.0) {
    aah = dict.matrix * dict.matrix.adjoint();
    aah_ptr = &aah;
  }
  assemble_into(out, scaled, dict.matrix, aah_ptr, gamma, uncertainty, sigma2);
  return out;
}

Eigen::VectorXd gamma_update_step(const Eigen::VectorXd& gamma_old,
                                  const Eigen::MatrixXcd& data_cov_inverse,
                                  const Eigen::MatrixXcd& sample_cov,
                                  const Dictionary& dict,
                                  const UncertaintyModel& uncertainty,
                                  double b) {
  check_gamma(gamma_old, dict.size());
  if (!(b > 0.0) || b > 1.0) throw std::invalid_argument("b must be in (0, 1]");
  int n = dict.sensors;
  if (data_cov_inverse.rows() != n || data_cov_inverse.cols() != n ||
      sample_cov.rows() != n || sample_cov.cols() != n)
    throw std::invalid_argument("covariance matrices must be sensors x sensors");
  UpdateWorkspace ws;
  VectorXd num, den;
  update_terms(data_cov_inverse, sample_cov, dict.matrix, uncertainty.phi_e, ws,
               num, den);
  return apply_update(gamma_old, num, den, b, 1);
}

double estimate_noise(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict,
                      const std::vector<int>& support, int k) {
  int n = dict.sensors;
  if (sample_cov.rows() != n || sample_cov.cols() != n)
    throw std::invalid_argument("sample covariance must be sensors x sensors");
  if (k < 0 || static_cast<int>(support.size()) != k)
    throw std::invalid_argument("support length must equal k");
  if (k >= n) throw std::invalid_argument("k must be < sensors");
  for (int idx : support) {
    if (idx < 0 || idx >= dict.size())
      throw std::invalid_argument("support index outside the grid");
  }
  double tr_s = sample_cov.trace().real();
  double floor = std::max(1e-12 * tr_s / n, 0.0);
  double value;
  if (k == 0) {
    value = tr_s / n;
  } else {
    MatrixXcd am(n, k);
    for (int i = 0; i < k; ++i) am.col(i) = dict.matrix.col(support[i]);
    Eigen::JacobiSVD<MatrixXcd> svd(am, Eigen::ComputeThinU);
    double tol = std::max(n, k) * Eigen::NumTraits<double>::epsilon() *
                 svd.singularValues()(0);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()(i) > tol) ++rank;
    }
    double projected = 0.0;
    if (rank > 0) {
      MatrixXcd ur = svd.matrixU().leftCols(rank);
      projected = (ur.adjoint() * sample_cov * ur).trace().real();
    }
    value = (tr_s - projected) / (n - k);
  }
  return std::max(value, floor);
}

std::vector<int> find_local_peaks(const Eigen::Ref<const Eigen::VectorXd>& values,
                                  int k) {
  if (k < 0) throw std::invalid_argument("k must be >= 0");
  const int m_count = static_cast<int>(values.size());
  std::vector<int> peaks;
  int i = 0;
  while (i < m_count) {
    int j = i;
    while (j + 1 < m_count && values(j + 1) == values(i)) ++j;
    bool whole = (i == 0 && j == m_count - 1);
    bool left_ok = (i == 0) || values(i) > values(i - 1);
    bool right_ok = (j == m_count - 1) || values(j) > values(j + 1);
    if (!whole && left_ok && right_ok) peaks.push_back(i);
    i = j + 1;
  }
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) {
    if (values(a) != values(b)) return values(a) > values(b);
    return a < b;
  });
  if (static_cast<int>(peaks.size()) > k) peaks.resize(k);
  return peaks;
}

SblResult run_sbl(const SblProblem& problem, const SolverOptions& options) {
  if (problem.size() != 1)
    throw std::invalid_argument("run_sbl expects a single dictionary");
  return run_shared(problem, options);
}

SblResult run_sbl_cc(const SblProblem& problem, const SolverOptions& options) {
  return run_shared(problem, options);
}

SblResult run_sbl_mc(const SblProblem& problem, const SolverOptions& options) {
  problem.validate();
  const int f_count = problem.size();
  const int m_count = problem.dictionaries[0].size();
  SblResult out;
  VectorXd acc = VectorXd::Zero(m_count);
  out.sigma2.resize(f_count);
  out.per_dictionary.reserve(f_count);
  int max_iterations = 0;
  bool all_converged = true;
  for (int f = 0; f < f_count; ++f) {
    SblProblem sub;
    sub.dictionaries = {problem.dictionaries[f]};
    sub.snapshots = {problem.snapshots[f]};
    sub.uncertainty = {problem.uncertainty[f]};
    SblResult rf = run_shared(sub, options);
    acc += rf.gamma;
    out.sigma2(f) = rf.sigma2(0);
    max_iterations = std::max(max_iterations, rf.iterations);
    all_converged = all_converged && rf.converged;
    out.per_dictionary.push_back(std::move(rf));
  }
  out.gamma = acc / static_cast<double>(f_count);
  out.iterations = max_iterations;
  out.converged = all_converged;
  size_t trace_len = 0;
  for (const auto& rf : out.per_dictionary)
    trace_len = std::max(trace_len, rf.evidence_trace.size());
  out.evidence_trace.assign(trace_len, 0.0);
  for (const auto& rf : out.per_dictionary) {
    size_t last = rf.evidence_trace.size() - 1;
    for (size_t i = 0; i < trace_len; ++i)
      out.evidence_trace[i] += rf.evidence_trace[std::min(i, last)];
  }
  out.support = find_local_peaks(out.gamma, options.k_sources);
  if (options.gamma_floor > 0.0) {
    std::erase_if(out.support,
                  [&](int idx) { return out.gamma(idx) < options.gamma_floor; });
  }
  if (options.compute_posterior) {
    for (int f = 0; f < f_count; ++f) {
      Posterior p = posterior(out.gamma, out.sigma2(f), problem.dictionaries[f],
                              problem.uncertainty[f], problem.snapshots[f].data);
      out.posterior_means.push_back(std::move(p.means));
      out.posterior_covariance.push_back(std::move(p.covariance));
    }
  }
  return out;
}

Posterior posterior(const Eigen::VectorXd& gamma, double sigma2,
                    const Dictionary& dict, const UncertaintyModel& uncertainty,
                    const Eigen::MatrixXcd& data) {
  check_gamma(gamma, dict.size());
  if (data.rows() != dict.sensors)
    throw std::invalid_argument("data rows must equal sensors");
  MatrixXcd sigma_y = assemble_data_covariance(gamma, uncertainty, dict, sigma2);
  Eigen::LLT<MatrixXcd> llt(sigma_y);
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance factorization failed", 0);
  Posterior p;
  p.means = dict.matrix.adjoint() * llt.solve(data);
  for (int m = 0; m < dict.size(); ++m) p.means.row(m) *= gamma(m);
  MatrixXcd c = dict.matrix.adjoint() * llt.solve(dict.matrix);
  p.covariance.resize(dict.size(), dict.size());
  for (int j = 0; j < dict.size(); ++j) {
    for (int i = 0; i < dict.size(); ++i) {
      p.covariance(i, j) = -gamma(i) * gamma(j) * c(i, j);
    }
  }
  p.covariance.diagonal().array() += gamma.cast<std::complex<double>>().array();
  p.covariance = 0.5 * (p.covariance + p.covariance.adjoint()).eval();
  return p;
}

double log_evidence(const Eigen::VectorXd& gamma, double sigma2,
                    const Dictionary& dict, const UncertaintyModel& uncertainty,
                    const SnapshotSet& snapshots) {
  MatrixXcd sigma_y = assemble_data_covariance(gamma, uncertainty, dict, sigma2);
  Eigen::LLT<MatrixXcd> llt(sigma_y);
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance factorization failed", 0);
  double logdet = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  double tr = llt.solve(snapshots.sample_covariance).trace().real();
  double l_count = static_cast<double>(snapshots.data.cols());
  return -l_count * (logdet + tr);
}

Eigen::VectorXd log_evidence_gradient(const Eigen::VectorXd& gamma, double sigma2,
                                      const Dictionary& dict,
                                      const UncertaintyModel& uncertainty,
                                      const SnapshotSet& snapshots) {
  MatrixXcd sigma_y = assemble_data_covariance(gamma, uncertainty, dict, sigma2);
  Eigen::LLT<MatrixXcd> llt(sigma_y);
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance factorization failed", 0);
  MatrixXcd inv = llt.solve(MatrixXcd::Identity(dict.sensors, dict.sensors));
  UpdateWorkspace ws;
  VectorXd num, den;
  update_terms(inv, snapshots.sample_covariance, dict.matrix, uncertainty.phi_e,
               ws, num, den);
  double l_count = static_cast<double>(snapshots.data.cols());
  return l_count * (num - den);
}

}  // namespace sbl
