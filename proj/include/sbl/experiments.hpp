#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbl/baselines.hpp"
#include "sbl/model.hpp"
#include "sbl/solver.hpp"

namespace sbl {

enum class MethodKind { Sbl, SblMc, SblCc, Cbf, Mvdr, Music, Exhaustive };

MethodKind method_kind_from_name(const std::string& name);  // throws listing valid names
std::vector<std::string> method_names();

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::Sbl;
  UncertaintyModel uncertainty;
  SolverOptions options;
  double diagonal_load = -1.0;          // < 0 selects 1e-6 tr(S)/N per dictionary
  std::uint64_t budget = 10000000;      // exhaustive-search evaluation cap
};

// Canonical method with its conventional uncertainty defaults:
// sbl {0, 0}, sbl-a {phi_e 0.03}, sbl-x {gamma_e 0.75}, sbl-mc/cc {0, 0}.
MethodSpec make_method_spec(const std::string& name);

struct DictionarySpec {
  double grid_start_deg = -90.0;
  double grid_stop_deg = 90.0;
  double grid_step_deg = 1.0;
  int sensors = 20;
  double spacing_wavelengths = 0.5;  // at relative frequency 1

  Dictionary build(double relative_frequency) const;
  void validate() const;
};

struct PerturbationSpec {
  double delta0 = 0.0;            // radians, peak-to-peak per-sensor phase error
  bool shared_per_column = true;
  bool redraw_per_snapshot = false;  // variant: fresh draw for every snapshot
};

enum class SweepParameter { SnrDb, PhiE, GammaE, Delta0 };

SweepParameter sweep_parameter_from_name(const std::string& name);
std::string sweep_parameter_name(SweepParameter p);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::SnrDb;
  std::vector<double> values;
};

// One band of scene data under the perturbation policy. The fixed variant
// applies a single dictionary perturbation drawn from pert_seed; the redraw
// variant forks both seeds per snapshot.
SnapshotSet synthesize_with_perturbation(const SceneSpec& scene,
                                         const Dictionary& nominal,
                                         const PerturbationSpec& perturbation,
                                         std::uint64_t data_seed,
                                         std::uint64_t pert_seed);

struct ExperimentConfig {
  SceneSpec scene;
  DictionarySpec dictionary;
  PerturbationSpec perturbation;
  std::vector<MethodSpec> methods;
  int runs = 100;
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;
  double mass_window_deg = 2.0;  // half-width for true/aliased histogram mass

  void validate() const;
};

struct MethodMetrics {
  std::string method;
  double sweep_value = 0.0;  // NaN when the experiment has no sweep
  int runs = 0;              // successful runs entering the statistics
  int failures = 0;
  double rmse_weakest_deg = 0.0;
  double percentile_lo_deg = 0.0;  // (1, 99) band of the second-peak angle
  double percentile_hi_deg = 0.0;
  std::vector<long long> histogram;  // top-k peak counts per grid angle
  long long total_peaks = 0;
  long long true_mass = 0;     // peaks within the window of a true source
  long long aliased_mass = 0;  // peaks within the window of an aliased location
  double aliased_mass_fraction = 0.0;
  std::vector<double> second_peak_angles;  // run-ordered, successful runs only
};

struct MetricsTable {
  Eigen::VectorXd grid_angles_deg;
  std::string sweep_parameter;  // empty when the experiment has no sweep
  std::vector<MethodMetrics> rows;
};

// Everything cmd_solve needs from one method on one data set.
struct MethodOutput {
  std::vector<int> support;  // strongest first
  Eigen::VectorXd spectrum;  // gamma for SBL methods, averaged power otherwise
  std::vector<Eigen::VectorXd> per_dictionary_spectra;
  SblResult sbl;             // populated for the SBL family
  bool is_sbl = false;
  double residual = 0.0;     // exhaustive only
  bool complete = true;      // exhaustive budget flag
};

MethodOutput run_method(const MethodSpec& spec,
                        const std::vector<Dictionary>& dictionaries,
                        const std::vector<SnapshotSet>& snapshots);

// Monte-Carlo harness. Runs are seeded as fork(sweep_index) then fork(run),
// so every (sweep value, run) pair sees the same data no matter which methods
// are configured or how many workers execute (SBLDOA_THREADS).
MetricsTable run_experiment(const ExperimentConfig& config);

double rmse_weakest(const std::vector<double>& estimates_deg, double truth_deg);

// Nearest-rank percentiles of the samples at lo and hi (in percent).
std::pair<double, double> percentile_band(std::vector<double> samples, double lo,
                                          double hi);

// Grid indices of grating-lobe images of the scene's sources for this
// dictionary: sin(theta_a) = sin(theta) + j / spacing, j != 0, |sin| <= 1.
std::vector<int> aliased_grid_indices(const SceneSpec& scene,
                                      const Dictionary& dict);

}  // namespace sbl
