#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbl/model.hpp"

namespace sbl {

// Raised when the iteration produces a non-finite ratio or a covariance that
// fails to factorize. iteration() is 1-based; 0 means before the first sweep.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct SolverOptions {
  double epsilon = 1e-6;       // L1 relative-change convergence threshold
  int max_iterations = 3000;
  double exponent_b = 1.0;     // fixed-point exponent; 0.5 is the damped variant
  int k_sources = 1;           // peaks kept for support and noise estimation
  double gamma_init = 1.0;
  double sigma2_init = 0.1;
  double gamma_floor = 0.0;    // reporting threshold only; nothing is pruned
  bool compute_posterior = false;

  void validate(int sensors) const;
};

// One entry per processed dictionary (frequency). Single-dictionary problems
// have size() == 1. All dictionaries must share the same grid length.
struct SblProblem {
  std::vector<Dictionary> dictionaries;
  std::vector<SnapshotSet> snapshots;
  std::vector<UncertaintyModel> uncertainty;

  int size() const { return static_cast<int>(dictionaries.size()); }
  void validate() const;
};

struct SblResult {
  Eigen::VectorXd gamma;
  Eigen::VectorXd sigma2;            // one noise estimate per dictionary
  int iterations = 0;
  bool converged = false;
  std::vector<int> support;          // top-k local peaks, strongest first
  // evidence_trace[0] is the initial state; entry i is the state entering
  // iteration i + 1; the final entry is the returned state. Length is
  // iterations + 1.
  std::vector<double> evidence_trace;
  std::vector<Eigen::MatrixXcd> posterior_means;       // per dictionary, M x L
  std::vector<Eigen::MatrixXcd> posterior_covariance;  // per dictionary, M x M
  std::vector<SblResult> per_dictionary;               // run_sbl_mc diagnostics
};

struct Posterior {
  Eigen::MatrixXcd means;       // M x L
  Eigen::MatrixXcd covariance;  // M x M
};

// Sigma_eta = (sigma2 + phi_e * (sum gamma + M gamma_e)) I + gamma_e A A^H.
Eigen::MatrixXcd assemble_noise_covariance(const Eigen::VectorXd& gamma,
                                           const UncertaintyModel& uncertainty,
                                           const Dictionary& dict,
                                           double sigma2);

// Sigma_y = Sigma_eta + A diag(gamma) A^H.
Eigen::MatrixXcd assemble_data_covariance(const Eigen::VectorXd& gamma,
                                          const UncertaintyModel& uncertainty,
                                          const Dictionary& dict,
                                          double sigma2);

// One multiplicative fixed-point sweep:
//   gamma_m <- gamma_m * (num_m / den_m)^b
//   num_m = phi_e tr(Si Si S) + u_m^H S u_m,  den_m = phi_e tr(Si) + a_m^H u_m
// with Si = data_cov_inverse and u_m = Si a_m. Throws NumericalError on a
// non-finite ratio.
Eigen::VectorXd gamma_update_step(const Eigen::VectorXd& gamma_old,
                                  const Eigen::MatrixXcd& data_cov_inverse,
                                  const Eigen::MatrixXcd& sample_cov,
                                  const Dictionary& dict,
                                  const UncertaintyModel& uncertainty,
                                  double b);

// sigma2 = tr((I - A_S A_S^+) S) / (N - k) with a tolerance-regularized
// pseudo-inverse; clamped below at 1e-12 tr(S)/N.
double estimate_noise(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict,
                      const std::vector<int>& support, int k);

// Indices of strict local maxima (plateaus count once, reported at their first
// index; a constant vector has none). Sorted by value descending, ties by
// index ascending, truncated to k.
std::vector<int> find_local_peaks(const Eigen::Ref<const Eigen::VectorXd>& values,
                                  int k);

SblResult run_sbl(const SblProblem& problem, const SolverOptions& options);
SblResult run_sbl_mc(const SblProblem& problem, const SolverOptions& options);
SblResult run_sbl_cc(const SblProblem& problem, const SolverOptions& options);

// Gaussian posterior of the source amplitudes given gamma:
//   means = diag(gamma) A^H Sigma_y^{-1} Y
//   covariance = diag(gamma) - diag(gamma) A^H Sigma_y^{-1} A diag(gamma)
Posterior posterior(const Eigen::VectorXd& gamma, double sigma2,
                    const Dictionary& dict, const UncertaintyModel& uncertainty,
                    const Eigen::MatrixXcd& data);

// log evidence up to an additive constant: -L log|Sigma_y| - L tr(Sigma_y^{-1} S).
double log_evidence(const Eigen::VectorXd& gamma, double sigma2,
                    const Dictionary& dict, const UncertaintyModel& uncertainty,
                    const SnapshotSet& snapshots);

// d(log evidence)/d(gamma_m); zero exactly at fixed points of the b = 1 update.
Eigen::VectorXd log_evidence_gradient(const Eigen::VectorXd& gamma, double sigma2,
                                      const Dictionary& dict,
                                      const UncertaintyModel& uncertainty,
                                      const SnapshotSet& snapshots);

}  // namespace sbl
