#include "sbl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "sbl/rng.hpp"

namespace sbl {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

int resolve_worker_count() {
  if (const char* env = std::getenv("SBLDOA_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

struct RunRecord {
  bool ok = false;
  std::vector<int> peaks;
};

ExperimentConfig materialize(const ExperimentConfig& base, double value) {
  ExperimentConfig cfg = base;
  if (!base.sweep) return cfg;
  switch (base.sweep->parameter) {
    case SweepParameter::SnrDb:
      cfg.scene.snr_db = value;
      break;
    case SweepParameter::PhiE:
      for (auto& m : cfg.methods) {
        if (m.kind == MethodKind::Sbl || m.kind == MethodKind::SblMc ||
            m.kind == MethodKind::SblCc)
          m.uncertainty.phi_e = value;
      }
      break;
    case SweepParameter::GammaE:
      for (auto& m : cfg.methods) {
        if (m.kind == MethodKind::Sbl || m.kind == MethodKind::SblMc ||
            m.kind == MethodKind::SblCc)
          m.uncertainty.gamma_e = value;
      }
      break;
    case SweepParameter::Delta0:
      cfg.perturbation.delta0 = value;
      break;
  }
  return cfg;
}

// Stream layout under run_rng: band f draws snapshots from derive(2f) and its
// perturbation from derive(2f + 1). Methods never consume randomness, so
// adding or removing methods leaves the data untouched.
std::vector<SnapshotSet> generate_run_data(const ExperimentConfig& cfg,
                                           const std::vector<Dictionary>& dicts,
                                           const Rng& run_rng) {
  const int f_count = static_cast<int>(dicts.size());
  std::vector<SnapshotSet> snaps(f_count);
  for (int f = 0; f < f_count; ++f) {
    snaps[f] = synthesize_with_perturbation(cfg.scene, dicts[f],
                                            cfg.perturbation,
                                            run_rng.derive(2 * f),
                                            run_rng.derive(2 * f + 1));
  }
  return snaps;
}

int window_bins(double window_deg, double step_deg) {
  return static_cast<int>(std::lround(window_deg / step_deg));
}

bool near_any(int index, const std::vector<int>& targets, int bins) {
  for (int t : targets) {
    if (std::abs(index - t) <= bins) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> method_names() {
  return {"sbl", "sbl-a", "sbl-x", "sbl-mc", "sbl-cc",
          "cbf", "mvdr",  "music", "exhaustive"};
}

MethodKind method_kind_from_name(const std::string& name) {
  if (name == "sbl" || name == "sbl-a" || name == "sbl-x") return MethodKind::Sbl;
  if (name == "sbl-mc") return MethodKind::SblMc;
  if (name == "sbl-cc") return MethodKind::SblCc;
  if (name == "cbf") return MethodKind::Cbf;
  if (name == "mvdr") return MethodKind::Mvdr;
  if (name == "music") return MethodKind::Music;
  if (name == "exhaustive") return MethodKind::Exhaustive;
  std::string msg = "unknown method '" + name + "'; valid methods:";
  for (const auto& n : method_names()) msg += " " + n;
  throw std::invalid_argument(msg);
}

MethodSpec make_method_spec(const std::string& name) {
  MethodSpec spec;
  spec.name = name;
  spec.kind = method_kind_from_name(name);
  if (name == "sbl-a") spec.uncertainty.phi_e = 0.03;
  if (name == "sbl-x") spec.uncertainty.gamma_e = 0.75;
  return spec;
}

Dictionary DictionarySpec::build(double relative_frequency) const {
  return build_dictionary(grid_start_deg, grid_stop_deg, grid_step_deg, sensors,
                          spacing_wavelengths * relative_frequency);
}

void DictionarySpec::validate() const {
  if (sensors < 1) throw std::invalid_argument("sensors must be >= 1");
  if (!(grid_step_deg > 0.0))
    throw std::invalid_argument("grid_step_deg must be > 0");
  if (grid_stop_deg < grid_start_deg)
    throw std::invalid_argument("grid_stop_deg must be >= grid_start_deg");
  if (!(spacing_wavelengths > 0.0))
    throw std::invalid_argument("spacing_wavelengths must be > 0");
}

SweepParameter sweep_parameter_from_name(const std::string& name) {
  if (name == "snr_db") return SweepParameter::SnrDb;
  if (name == "phi_e") return SweepParameter::PhiE;
  if (name == "gamma_e") return SweepParameter::GammaE;
  if (name == "delta0") return SweepParameter::Delta0;
  throw std::invalid_argument(
      "unknown sweep parameter '" + name +
      "'; valid parameters: snr_db phi_e gamma_e delta0");
}

std::string sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::SnrDb: return "snr_db";
    case SweepParameter::PhiE: return "phi_e";
    case SweepParameter::GammaE: return "gamma_e";
    case SweepParameter::Delta0: return "delta0";
  }
  return "";
}

SnapshotSet synthesize_with_perturbation(const SceneSpec& scene,
                                         const Dictionary& nominal,
                                         const PerturbationSpec& perturbation,
                                         std::uint64_t data_seed,
                                         std::uint64_t pert_seed) {
  if (perturbation.delta0 < 0.0)
    throw std::invalid_argument("delta0 must be >= 0");
  if (!perturbation.redraw_per_snapshot) {
    Dictionary gen = perturbation.delta0 > 0.0
                         ? apply_multiplicative_perturbation(
                               nominal, perturbation.delta0, pert_seed,
                               perturbation.shared_per_column)
                         : nominal;
    return synthesize_snapshots(scene, gen, data_seed);
  }
  SceneSpec one = scene;
  one.snapshots = 1;
  Rng data_rng(data_seed);
  Rng pert_rng(pert_seed);
  Eigen::MatrixXcd data(nominal.sensors, scene.snapshots);
  for (int l = 0; l < scene.snapshots; ++l) {
    Dictionary gen = perturbation.delta0 > 0.0
                         ? apply_multiplicative_perturbation(
                               nominal, perturbation.delta0, pert_rng.derive(l),
                               perturbation.shared_per_column)
                         : nominal;
    data.col(l) = synthesize_snapshots(one, gen, data_rng.derive(l)).data.col(0);
  }
  return make_snapshot_set(data);
}

void ExperimentConfig::validate() const {
  dictionary.validate();
  if (scene.sources.empty()) throw std::invalid_argument("scene has no sources");
  if (scene.snapshots < 1) throw std::invalid_argument("snapshots must be >= 1");
  if (scene.frequencies.empty())
    throw std::invalid_argument("scene needs at least one frequency");
  for (double f : scene.frequencies) {
    if (!(f > 0.0)) throw std::invalid_argument("frequencies must be > 0");
  }
  if (methods.empty()) throw std::invalid_argument("no methods configured");
  const int f_count = static_cast<int>(scene.frequencies.size());
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!seen.insert(m.name).second)
      throw std::invalid_argument("duplicate method name '" + m.name + "'");
    if ((m.kind == MethodKind::Sbl || m.kind == MethodKind::Exhaustive) &&
        f_count != 1)
      throw std::invalid_argument("method '" + m.name +
                                  "' expects a single frequency");
    if (m.options.k_sources < 1)
      throw std::invalid_argument("method '" + m.name +
                                  "' needs k_sources >= 1");
  }
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (mass_window_deg < 0.0)
    throw std::invalid_argument("mass_window_deg must be >= 0");
  if (sweep && sweep->values.empty())
    throw std::invalid_argument("sweep needs at least one value");
  if (perturbation.delta0 < 0.0)
    throw std::invalid_argument("delta0 must be >= 0");
}

MethodOutput run_method(const MethodSpec& spec,
                        const std::vector<Dictionary>& dictionaries,
                        const std::vector<SnapshotSet>& snapshots) {
  if (dictionaries.empty() || dictionaries.size() != snapshots.size())
    throw std::invalid_argument("need matching dictionaries and snapshots");
  const int f_count = static_cast<int>(dictionaries.size());
  const int m_count = dictionaries[0].size();
  for (const auto& d : dictionaries) {
    if (d.size() != m_count)
      throw std::invalid_argument("all dictionaries must share one grid");
  }
  const int k = spec.options.k_sources;
  MethodOutput out;
  switch (spec.kind) {
    case MethodKind::Cbf:
    case MethodKind::Mvdr:
    case MethodKind::Music: {
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(m_count);
      for (int f = 0; f < f_count; ++f) {
        Spectrum sp;
        if (spec.kind == MethodKind::Cbf) {
          sp = cbf_spectrum(snapshots[f].sample_covariance, dictionaries[f]);
        } else if (spec.kind == MethodKind::Mvdr) {
          double load = spec.diagonal_load >= 0.0
                            ? spec.diagonal_load
                            : default_diagonal_load(snapshots[f].sample_covariance);
          sp = mvdr_spectrum(snapshots[f].sample_covariance, dictionaries[f], load);
        } else {
          sp = music_spectrum(snapshots[f].sample_covariance, dictionaries[f], k);
        }
        avg += sp.values;
        out.per_dictionary_spectra.push_back(std::move(sp.values));
      }
      avg /= static_cast<double>(f_count);
      out.support = find_local_peaks(avg, k);
      out.spectrum = std::move(avg);
      break;
    }
    case MethodKind::Sbl:
    case MethodKind::SblMc:
    case MethodKind::SblCc: {
      if (spec.kind == MethodKind::Sbl && f_count != 1)
        throw std::invalid_argument("method '" + spec.name +
                                    "' expects a single dictionary");
      SblProblem problem;
      problem.dictionaries = dictionaries;
      problem.snapshots = snapshots;
      problem.uncertainty.assign(f_count, spec.uncertainty);
      if (spec.kind == MethodKind::Sbl) {
        out.sbl = run_sbl(problem, spec.options);
      } else if (spec.kind == MethodKind::SblMc) {
        out.sbl = run_sbl_mc(problem, spec.options);
        for (const auto& rf : out.sbl.per_dictionary)
          out.per_dictionary_spectra.push_back(rf.gamma);
      } else {
        out.sbl = run_sbl_cc(problem, spec.options);
      }
      out.is_sbl = true;
      out.spectrum = out.sbl.gamma;
      out.support = out.sbl.support;
      break;
    }
    case MethodKind::Exhaustive: {
      if (f_count != 1)
        throw std::invalid_argument("method '" + spec.name +
                                    "' expects a single dictionary");
      ExhaustiveResult ex =
          exhaustive_search(snapshots[0].data, dictionaries[0], k, spec.budget);
      out.residual = ex.residual;
      out.complete = ex.complete;
      // Rank the support by estimated source power so "strongest first"
      // matches the other methods.
      Eigen::MatrixXcd am(dictionaries[0].sensors, ex.support.size());
      for (size_t i = 0; i < ex.support.size(); ++i)
        am.col(i) = dictionaries[0].matrix.col(ex.support[i]);
      Eigen::MatrixXcd x =
          am.colPivHouseholderQr().solve(snapshots[0].data);
      std::vector<std::pair<double, int>> ranked;
      for (size_t i = 0; i < ex.support.size(); ++i)
        ranked.emplace_back(x.row(i).squaredNorm(), ex.support[i]);
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (const auto& [power, idx] : ranked) out.support.push_back(idx);
      break;
    }
  }
  return out;
}

double rmse_weakest(const std::vector<double>& estimates_deg, double truth_deg) {
  if (estimates_deg.empty())
    throw std::invalid_argument("need at least one estimate");
  double acc = 0.0;
  for (double e : estimates_deg) acc += (e - truth_deg) * (e - truth_deg);
  return std::sqrt(acc / static_cast<double>(estimates_deg.size()));
}

std::pair<double, double> percentile_band(std::vector<double> samples, double lo,
                                          double hi) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  if (!(lo >= 0.0) || !(hi <= 100.0) || !(lo < hi))
    throw std::invalid_argument("need 0 <= lo < hi <= 100");
  std::sort(samples.begin(), samples.end());
  auto nearest_rank = [&](double p) {
    double n = static_cast<double>(samples.size());
    int rank = static_cast<int>(std::ceil(p / 100.0 * n));
    rank = std::max(rank, 1);
    return samples[static_cast<size_t>(rank - 1)];
  };
  return {nearest_rank(lo), nearest_rank(hi)};
}

std::vector<int> aliased_grid_indices(const SceneSpec& scene,
                                      const Dictionary& dict) {
  std::set<int> found;
  std::set<int> true_bins;
  int j_max = static_cast<int>(std::ceil(2.0 * dict.spacing_wavelengths)) + 1;
  for (const auto& src : scene.sources) {
    int t = dict.nearest_index(src.angle_deg);
    true_bins.insert(t);
    double s0 = std::sin(dict.angles_deg(t) * 3.141592653589793238462643 / 180.0);
    for (int j = -j_max; j <= j_max; ++j) {
      if (j == 0) continue;
      double sa = s0 + j / dict.spacing_wavelengths;
      if (sa < -1.0 || sa > 1.0) continue;
      double theta = std::asin(sa) * 180.0 / 3.141592653589793238462643;
      if (theta < dict.angles_deg(0) ||
          theta > dict.angles_deg(dict.size() - 1))
        continue;
      found.insert(dict.nearest_index(theta));
    }
  }
  std::vector<int> out;
  for (int idx : found) {
    if (true_bins.count(idx) == 0) out.push_back(idx);
  }
  return out;
}

MetricsTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  const int f_count = static_cast<int>(config.scene.frequencies.size());
  std::vector<Dictionary> dicts(f_count);
  for (int f = 0; f < f_count; ++f)
    dicts[f] = config.dictionary.build(config.scene.frequencies[f]);

  MetricsTable table;
  table.grid_angles_deg = dicts[0].angles_deg;
  table.sweep_parameter =
      config.sweep ? sweep_parameter_name(config.sweep->parameter) : "";

  std::vector<double> sweep_values =
      config.sweep ? config.sweep->values : std::vector<double>{kNan};
  const int n_methods = static_cast<int>(config.methods.size());
  const int wb = window_bins(config.mass_window_deg,
                             config.dictionary.grid_step_deg);

  for (size_t si = 0; si < sweep_values.size(); ++si) {
    ExperimentConfig cfg = materialize(config, sweep_values[si]);

    std::vector<int> truth;
    for (const auto& src : cfg.scene.sources)
      truth.push_back(dicts[0].nearest_index(src.angle_deg));
    double truth_ws =
        dicts[0].angles_deg(truth[cfg.scene.weakest_source()]);
    std::set<int> aliased_set;
    for (int f = 0; f < f_count; ++f) {
      for (int idx : aliased_grid_indices(cfg.scene, dicts[f]))
        aliased_set.insert(idx);
    }
    std::vector<int> aliased(aliased_set.begin(), aliased_set.end());

    std::vector<std::vector<RunRecord>> records(
        cfg.runs, std::vector<RunRecord>(n_methods));
    Rng sweep_rng = Rng(cfg.seed).fork(si);
    auto do_run = [&](int r) {
      Rng run_rng = sweep_rng.fork(static_cast<std::uint64_t>(r));
      std::vector<SnapshotSet> snaps = generate_run_data(cfg, dicts, run_rng);
      for (int mi = 0; mi < n_methods; ++mi) {
        try {
          MethodOutput mo = run_method(cfg.methods[mi], dicts, snaps);
          records[r][mi].ok = true;
          records[r][mi].peaks = std::move(mo.support);
        } catch (const NumericalError&) {
          records[r][mi].ok = false;
        }
      }
    };

    int workers = std::min(resolve_worker_count(), cfg.runs);
    if (workers <= 1) {
      for (int r = 0; r < cfg.runs; ++r) do_run(r);
    } else {
      std::atomic<int> next{0};
      std::exception_ptr error;
      std::mutex error_mutex;
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          while (true) {
            int r = next.fetch_add(1);
            if (r >= cfg.runs) return;
            try {
              do_run(r);
            } catch (...) {
              std::lock_guard<std::mutex> lock(error_mutex);
              if (!error) error = std::current_exception();
              return;
            }
          }
        });
      }
      for (auto& t : pool) t.join();
      if (error) std::rethrow_exception(error);
    }

    for (int mi = 0; mi < n_methods; ++mi) {
      MethodMetrics mm;
      mm.method = cfg.methods[mi].name;
      mm.sweep_value = sweep_values[si];
      mm.histogram.assign(dicts[0].size(), 0);
      std::vector<double> ws_estimates;
      for (int r = 0; r < cfg.runs; ++r) {
        const RunRecord& rec = records[r][mi];
        if (!rec.ok || rec.peaks.empty()) {
          ++mm.failures;
          continue;
        }
        ++mm.runs;
        for (int p : rec.peaks) {
          ++mm.histogram[p];
          ++mm.total_peaks;
          if (near_any(p, truth, wb)) ++mm.true_mass;
          if (near_any(p, aliased, wb)) ++mm.aliased_mass;
        }
        ws_estimates.push_back(dicts[0].angles_deg(rec.peaks.back()));
        int second = rec.peaks.size() >= 2 ? rec.peaks[1] : rec.peaks.back();
        mm.second_peak_angles.push_back(dicts[0].angles_deg(second));
      }
      mm.rmse_weakest_deg =
          ws_estimates.empty() ? kNan : rmse_weakest(ws_estimates, truth_ws);
      if (!mm.second_peak_angles.empty()) {
        auto band = percentile_band(mm.second_peak_angles, 1.0, 99.0);
        mm.percentile_lo_deg = band.first;
        mm.percentile_hi_deg = band.second;
      } else {
        mm.percentile_lo_deg = kNan;
        mm.percentile_hi_deg = kNan;
      }
      mm.aliased_mass_fraction =
          mm.total_peaks > 0
              ? static_cast<double>(mm.aliased_mass) / mm.total_peaks
              : 0.0;
      table.rows.push_back(std::move(mm));
    }
  }
  return table;
}

}  // namespace sbl
