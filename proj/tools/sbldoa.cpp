#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sbl/experiments.hpp"
#include "sbl/io.hpp"
#include "sbl/rng.hpp"
#include "sbl/solver.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  bool out_given = false;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_seed = true) {
  cmd->add_option("--config", args.config, "JSON configuration file")->required();
  cmd->add_option("--out", args.out, "output directory")
      ->each([&args](const std::string&) { args.out_given = true; });
  cmd->add_option("--set", args.sets,
                  "override a config value, KEY=VALUE with dotted keys");
  if (with_seed) {
    args.seed.reset();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&args](std::uint64_t v) { args.seed = v; }, "base RNG seed");
  }
}

fs::path resolve_out(const CommonArgs& args) {
  if (args.out_given) return args.out;
  if (const char* env = std::getenv("SBLDOA_OUT")) return env;
  return ".";
}

std::uint64_t resolve_seed(const CommonArgs& args,
                           std::optional<std::uint64_t> config_seed) {
  if (args.seed) return *args.seed;
  if (const char* env = std::getenv("SBLDOA_SEED"))
    return std::strtoull(env, nullptr, 10);
  if (config_seed) return *config_seed;
  return 0;
}

std::string format_angle(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

int cmd_simulate(const CommonArgs& args) {
  sbl::json raw = sbl::load_json_file(args.config);
  sbl::apply_overrides(raw, args.sets);
  sbl::SimulateConfig cfg = sbl::parse_simulate_config(raw);
  std::uint64_t seed = resolve_seed(args, cfg.seed);
  sbl::Provenance prov{sbl::kToolVersion, seed, sbl::config_hash(raw)};
  fs::path out_dir = resolve_out(args);
  fs::create_directories(out_dir);

  sbl::Rng root(seed);
  for (size_t f = 0; f < cfg.scene.frequencies.size(); ++f) {
    double freq = cfg.scene.frequencies[f];
    sbl::Dictionary nominal = cfg.dictionary.build(freq);
    sbl::SnapshotSet snaps = sbl::synthesize_with_perturbation(
        cfg.scene, nominal, cfg.perturbation, root.derive(2 * f),
        root.derive(2 * f + 1));
    sbl::SnapshotFile file;
    file.provenance = prov;
    file.frequency = freq;
    file.dictionary = cfg.dictionary;
    file.dictionary.spacing_wavelengths *= freq;
    file.data = snaps.data;
    fs::path path = out_dir / ("snapshots_" + std::to_string(f) + ".json");
    sbl::write_snapshot_file(path, file);
    std::cout << path.string() << "\n";
  }
  return 0;
}

int cmd_solve(const CommonArgs& args) {
  sbl::json raw = sbl::load_json_file(args.config);
  sbl::apply_overrides(raw, args.sets);
  sbl::SolveConfig cfg = sbl::parse_solve_config(raw);
  std::uint64_t seed = resolve_seed(args, std::nullopt);
  sbl::Provenance prov{sbl::kToolVersion, seed, sbl::config_hash(raw)};
  fs::path out_dir = resolve_out(args);
  fs::create_directories(out_dir);

  std::vector<sbl::Dictionary> dicts;
  std::vector<sbl::SnapshotSet> snaps;
  for (const auto& input : cfg.inputs) {
    sbl::SnapshotFile file = sbl::read_snapshot_file(input);
    dicts.push_back(file.dictionary.build(1.0));
    snaps.push_back(sbl::make_snapshot_set(file.data));
  }

  sbl::MethodOutput mo = sbl::run_method(cfg.method, dicts, snaps);

  const std::string& name = cfg.method.name;
  if (mo.spectrum.size() > 0) {
    sbl::Spectrum sp{mo.spectrum, dicts[0].angles_deg};
    sbl::write_spectrum_csv(out_dir / ("spectrum_" + name + ".csv"), sp, prov);
  }
  if (mo.per_dictionary_spectra.size() > 1) {
    for (size_t f = 0; f < mo.per_dictionary_spectra.size(); ++f) {
      sbl::Spectrum sp{mo.per_dictionary_spectra[f], dicts[f].angles_deg};
      sbl::write_spectrum_csv(
          out_dir / ("spectrum_" + name + "_" + std::to_string(f) + ".csv"), sp,
          prov);
    }
  }

  sbl::json result;
  result["provenance"] = sbl::provenance_to_json(prov);
  result["method"] = name;
  result["inputs"] = cfg.inputs;
  result["support"] = mo.support;
  std::vector<double> support_angles;
  for (int idx : mo.support) support_angles.push_back(dicts[0].angles_deg(idx));
  result["support_angles_deg"] = support_angles;
  if (mo.spectrum.size() > 0) {
    std::vector<double> peak_values;
    for (int idx : mo.support) peak_values.push_back(mo.spectrum(idx));
    result["peak_values"] = peak_values;
  }
  if (mo.is_sbl) {
    result["sigma2"] = std::vector<double>(
        mo.sbl.sigma2.data(), mo.sbl.sigma2.data() + mo.sbl.sigma2.size());
    result["iterations"] = mo.sbl.iterations;
    result["converged"] = mo.sbl.converged;
    result["evidence_trace"] = mo.sbl.evidence_trace;
  }
  if (cfg.method.kind == sbl::MethodKind::Exhaustive) {
    result["residual"] = mo.residual;
    result["complete"] = mo.complete;
  }
  sbl::atomic_write(out_dir / ("result_" + name + ".json"), result.dump(2));

  std::cout << "method=" << name << " support_angles=[";
  for (size_t i = 0; i < support_angles.size(); ++i) {
    if (i) std::cout << " ";
    std::cout << format_angle(support_angles[i]);
  }
  std::cout << "]";
  if (mo.is_sbl) {
    std::cout << " iterations=" << mo.sbl.iterations
              << " converged=" << (mo.sbl.converged ? "yes" : "no");
  }
  std::cout << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args, std::optional<int> runs_override) {
  sbl::json raw = sbl::load_json_file(args.config);
  sbl::apply_overrides(raw, args.sets);
  sbl::ExperimentConfig cfg = sbl::parse_experiment_config(raw);
  cfg.seed = resolve_seed(args, cfg.seed);
  if (runs_override) {
    cfg.runs = *runs_override;
    if (cfg.runs < 1) throw sbl::ConfigError("--runs must be >= 1");
  }
  sbl::Provenance prov{sbl::kToolVersion, cfg.seed, sbl::config_hash(raw)};
  fs::path out_dir = resolve_out(args);
  fs::create_directories(out_dir);

  sbl::MetricsTable table = sbl::run_experiment(cfg);

  sbl::atomic_write(out_dir / "metrics.json",
                    sbl::metrics_to_json(table, prov).dump(2));
  sbl::write_metrics_csv(out_dir / "metrics.csv", table, prov);
  sbl::write_histogram_csv(out_dir / "histograms.csv", table, prov);

  const size_t n_methods = cfg.methods.size();
  bool any_success = false;
  for (size_t v = 0; v * n_methods < table.rows.size(); ++v) {
    const sbl::MethodMetrics& first = table.rows[v * n_methods];
    if (table.sweep_parameter.empty())
      std::cout << "all-runs:";
    else
      std::cout << table.sweep_parameter << "="
                << format_angle(first.sweep_value) << ":";
    for (size_t mi = 0; mi < n_methods; ++mi) {
      const sbl::MethodMetrics& mm = table.rows[v * n_methods + mi];
      any_success = any_success || mm.runs > 0;
      char buf[64];
      std::snprintf(buf, sizeof buf, " %s rmse=%.3f fail=%d", mm.method.c_str(),
                    mm.rmse_weakest_deg, mm.failures);
      std::cout << buf;
      if (mi + 1 < n_methods) std::cout << " |";
    }
    std::cout << "\n";
  }
  if (!any_success) {
    std::cerr << "numerical failure: every run of every method failed\n";
    return 3;
  }
  return 0;
}

int cmd_gram(const CommonArgs& args) {
  sbl::json raw = sbl::load_json_file(args.config);
  sbl::apply_overrides(raw, args.sets);
  if (!raw.is_object()) throw sbl::ConfigError("config must be an object");
  for (const auto& item : raw.items()) {
    if (item.key() != "dictionary" && item.key() != "frequency")
      throw sbl::ConfigError("config field '" + item.key() + "': unknown field");
  }
  if (!raw.contains("dictionary"))
    throw sbl::ConfigError("config field 'dictionary': is required");
  sbl::DictionarySpec spec =
      sbl::parse_dictionary_spec(raw["dictionary"], "dictionary");
  double freq = 1.0;
  if (raw.contains("frequency")) {
    if (!raw["frequency"].is_number() || !(raw["frequency"].get<double>() > 0.0))
      throw sbl::ConfigError("config field 'frequency': must be > 0");
    freq = raw["frequency"].get<double>();
  }
  sbl::Provenance prov{sbl::kToolVersion, resolve_seed(args, std::nullopt),
                       sbl::config_hash(raw)};
  fs::path out_dir = resolve_out(args);
  fs::create_directories(out_dir);
  sbl::Dictionary dict = spec.build(freq);
  sbl::write_gram_csv(out_dir / "gram.csv", dict, prov);
  sbl::write_dictionary_csv(out_dir / "dictionary.csv", dict, prov);
  std::cout << (out_dir / "gram.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse DoA estimation with dictionary uncertainty models"};
  app.set_version_flag("--version", std::string(sbl::kToolVersion));
  app.require_subcommand(1);

  CommonArgs sim_args, solve_args, sweep_args, gram_args;
  std::optional<int> runs_override;

  CLI::App* sim = app.add_subcommand("simulate", "synthesize snapshot files");
  add_common(sim, sim_args);
  CLI::App* solve = app.add_subcommand("solve", "run one method on snapshot files");
  add_common(solve, solve_args);
  CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo experiment sweep");
  add_common(sweep, sweep_args);
  sweep->add_option_function<int>(
      "--runs", [&](int v) { runs_override = v; }, "override the run count");
  CLI::App* gram = app.add_subcommand("gram", "export dictionary and Gram matrix");
  add_common(gram, gram_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (solve->parsed()) return cmd_solve(solve_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, runs_override);
    if (gram->parsed()) return cmd_gram(gram_args);
  } catch (const sbl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sbl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
