#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sbl/model.hpp"

namespace sbl {

struct Spectrum {
  Eigen::VectorXd values;
  Eigen::VectorXd angles_deg;
};

// Conventional beamformer, P(m) = a_m^H S a_m.
Spectrum cbf_spectrum(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict);

double default_diagonal_load(const Eigen::MatrixXcd& sample_cov);  // 1e-6 tr(S)/N

// P(m) = 1 / (a_m^H (S + load I)^{-1} a_m).
Spectrum mvdr_spectrum(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict,
                       double diagonal_load);

// P(m) = 1 / ||U_n^H a_m||^2 with U_n the N - k weakest eigenvectors of S;
// the denominator is floored at machine scale so exact subspace hits stay finite.
Spectrum music_spectrum(const Eigen::MatrixXcd& sample_cov, const Dictionary& dict,
                        int k);

struct ExhaustiveResult {
  std::vector<int> support;  // ascending indices
  double residual = 0.0;     // Frobenius norm of the projection residual
  bool complete = true;      // false when the evaluation budget ran out
};

// ||Y - A_S A_S^+ Y||_F for one candidate support.
double projection_residual(const Eigen::MatrixXcd& data, const Dictionary& dict,
                           const std::vector<int>& support);

// Minimizes the projection residual over all size-k supports, enumerated in
// lexicographic order; ties keep the earliest candidate.
ExhaustiveResult exhaustive_search(const Eigen::MatrixXcd& data,
                                   const Dictionary& dict, int k,
                                   std::uint64_t budget = 10000000);

}  // namespace sbl
