#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbl/baselines.hpp"
#include "sbl/experiments.hpp"
#include "sbl/model.hpp"

namespace sbl {

using json = nlohmann::json;

extern const char* kToolVersion;

// Configuration problems (bad JSON, missing or unknown fields, bad values).
// Messages name the offending field path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct Provenance {
  std::string tool_version;
  std::uint64_t seed = 0;
  std::string config_hash;
};

json provenance_to_json(const Provenance& p);

// FNV-1a over the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const json& config);

// 17 significant digits; round-trips through strtod exactly.
std::string format_full(double value);

// Write to a sibling temp file, then rename over the target.
void atomic_write(const std::filesystem::path& path, const std::string& content);

json load_json_file(const std::filesystem::path& path);

// Apply KEY=VALUE overrides with dotted paths ("scene.snr_db=3"). Paths must
// resolve to existing keys; values parse as JSON, falling back to strings.
void apply_overrides(json& config, const std::vector<std::string>& overrides);

struct SimulateConfig {
  SceneSpec scene;
  DictionarySpec dictionary;
  PerturbationSpec perturbation;
  std::optional<std::uint64_t> seed;
};

struct SolveConfig {
  MethodSpec method;
  std::vector<std::string> inputs;
};

SimulateConfig parse_simulate_config(const json& j);
SolveConfig parse_solve_config(const json& j);
ExperimentConfig parse_experiment_config(const json& j);
DictionarySpec parse_dictionary_spec(const json& j, const std::string& path);
MethodSpec parse_method_spec(const json& j, const std::string& path);

struct SnapshotFile {
  Provenance provenance;
  double frequency = 1.0;
  DictionarySpec dictionary;  // effective spacing for this band
  Eigen::MatrixXcd data;
};

void write_snapshot_file(const std::filesystem::path& path,
                         const SnapshotFile& file);
SnapshotFile read_snapshot_file(const std::filesystem::path& path);

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& sp,
                        const Provenance& prov);
Spectrum read_spectrum_csv(const std::filesystem::path& path);

void write_dictionary_csv(const std::filesystem::path& path,
                          const Dictionary& dict, const Provenance& prov);

// Square matrix of |a_i^H a_j| with angle labels on both axes.
void write_gram_csv(const std::filesystem::path& path, const Dictionary& dict,
                    const Provenance& prov);

json metrics_to_json(const MetricsTable& table, const Provenance& prov);
void write_metrics_csv(const std::filesystem::path& path,
                       const MetricsTable& table, const Provenance& prov);
void write_histogram_csv(const std::filesystem::path& path,
                         const MetricsTable& table, const Provenance& prov);

}  // namespace sbl
