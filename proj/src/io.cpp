#include "sbl/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace sbl {

#ifndef SBLDOA_VERSION
#define SBLDOA_VERSION "0.0.0"
#endif
const char* kToolVersion = SBLDOA_VERSION;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

void check_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "(root)" : path, "must be an object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& path) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        ok = true;
        break;
      }
    }
    if (!ok) fail(join(path, item.key()), "unknown field");
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const char* key, const std::string& path,
                  std::optional<double> def = std::nullopt) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(join(path, key), "is required");
  }
  if (!v->is_number()) fail(join(path, key), "must be a number");
  return v->get<double>();
}

int get_int(const json& j, const char* key, const std::string& path,
            std::optional<int> def = std::nullopt) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(join(path, key), "is required");
  }
  if (!v->is_number_integer()) fail(join(path, key), "must be an integer");
  return v->get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& path,
                      std::optional<std::uint64_t> def = std::nullopt) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(join(path, key), "is required");
  }
  if (!v->is_number_integer() || (v->is_number_integer() && v->get<long long>() < 0 && !v->is_number_unsigned()))
    fail(join(path, key), "must be a non-negative integer");
  return v->get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, const std::string& path,
              std::optional<bool> def = std::nullopt) {
  const json* v = find(j, key);
  if (!v) {
    if (def) return *def;
    fail(join(path, key), "is required");
  }
  if (!v->is_boolean()) fail(join(path, key), "must be a boolean");
  return v->get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& path) {
  const json* v = find(j, key);
  if (!v) fail(join(path, key), "is required");
  if (!v->is_string()) fail(join(path, key), "must be a string");
  return v->get<std::string>();
}

SceneSpec parse_scene(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, {"sources", "amplitude_model", "snr_db", "snapshots", "frequencies"},
             path);
  SceneSpec scene;
  const json* sources = find(j, "sources");
  if (!sources) fail(join(path, "sources"), "is required");
  if (!sources->is_array() || sources->empty())
    fail(join(path, "sources"), "must be a non-empty array");
  int idx = 0;
  for (const auto& s : *sources) {
    std::string spath = join(path, "sources[" + std::to_string(idx) + "]");
    check_object(s, spath);
    check_keys(s, {"angle_deg", "power_db"}, spath);
    SourceSpec src;
    src.angle_deg = get_number(s, "angle_deg", spath);
    src.power_db = get_number(s, "power_db", spath);
    scene.sources.push_back(src);
    ++idx;
  }
  if (const json* am = find(j, "amplitude_model")) {
    if (!am->is_string()) fail(join(path, "amplitude_model"), "must be a string");
    std::string name = am->get<std::string>();
    if (name == "constant_magnitude_random_phase")
      scene.amplitude_model = AmplitudeModel::ConstantMagnitudeRandomPhase;
    else if (name == "complex_gaussian")
      scene.amplitude_model = AmplitudeModel::ComplexGaussian;
    else
      fail(join(path, "amplitude_model"),
           "must be 'constant_magnitude_random_phase' or 'complex_gaussian'");
  }
  scene.snr_db = get_number(j, "snr_db", path, 0.0);
  scene.snapshots = get_int(j, "snapshots", path, 30);
  if (scene.snapshots < 1) fail(join(path, "snapshots"), "must be >= 1");
  if (const json* fr = find(j, "frequencies")) {
    if (!fr->is_array() || fr->empty())
      fail(join(path, "frequencies"), "must be a non-empty array");
    scene.frequencies.clear();
    for (const auto& f : *fr) {
      if (!f.is_number() || !(f.get<double>() > 0.0))
        fail(join(path, "frequencies"), "entries must be positive numbers");
      scene.frequencies.push_back(f.get<double>());
    }
  }
  return scene;
}

PerturbationSpec parse_perturbation(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, {"delta0", "shared_per_column", "redraw_per_snapshot"}, path);
  PerturbationSpec p;
  p.delta0 = get_number(j, "delta0", path, 0.0);
  if (p.delta0 < 0.0) fail(join(path, "delta0"), "must be >= 0");
  p.shared_per_column = get_bool(j, "shared_per_column", path, true);
  p.redraw_per_snapshot = get_bool(j, "redraw_per_snapshot", path, false);
  return p;
}

SolverOptions parse_solver_options(const json& j, const std::string& path,
                                   SolverOptions opts) {
  check_object(j, path);
  check_keys(j,
             {"epsilon", "max_iterations", "exponent_b", "k_sources",
              "gamma_init", "sigma2_init", "gamma_floor", "compute_posterior"},
             path);
  opts.epsilon = get_number(j, "epsilon", path, opts.epsilon);
  opts.max_iterations = get_int(j, "max_iterations", path, opts.max_iterations);
  opts.exponent_b = get_number(j, "exponent_b", path, opts.exponent_b);
  opts.k_sources = get_int(j, "k_sources", path, opts.k_sources);
  opts.gamma_init = get_number(j, "gamma_init", path, opts.gamma_init);
  opts.sigma2_init = get_number(j, "sigma2_init", path, opts.sigma2_init);
  opts.gamma_floor = get_number(j, "gamma_floor", path, opts.gamma_floor);
  opts.compute_posterior =
      get_bool(j, "compute_posterior", path, opts.compute_posterior);
  return opts;
}

MethodSpec parse_method_spec_with_default(const json& j, const std::string& path,
                                          int default_k) {
  check_object(j, path);
  check_keys(j, {"name", "phi_e", "gamma_e", "options", "diagonal_load", "budget"},
             path);
  std::string name = get_string(j, "name", path);
  MethodSpec spec;
  try {
    spec = make_method_spec(name);
  } catch (const std::invalid_argument& e) {
    fail(join(path, "name"), e.what());
  }
  spec.options.k_sources = default_k;
  spec.uncertainty.phi_e = get_number(j, "phi_e", path, spec.uncertainty.phi_e);
  spec.uncertainty.gamma_e =
      get_number(j, "gamma_e", path, spec.uncertainty.gamma_e);
  if (spec.uncertainty.phi_e < 0.0) fail(join(path, "phi_e"), "must be >= 0");
  if (spec.uncertainty.gamma_e < 0.0) fail(join(path, "gamma_e"), "must be >= 0");
  if (const json* o = find(j, "options"))
    spec.options = parse_solver_options(*o, join(path, "options"), spec.options);
  spec.diagonal_load = get_number(j, "diagonal_load", path, spec.diagonal_load);
  spec.budget = get_u64(j, "budget", path, spec.budget);
  if (spec.budget < 1) fail(join(path, "budget"), "must be >= 1");
  return spec;
}

std::string provenance_header(const Provenance& prov) {
  std::string out;
  out += "# sbldoa " + prov.tool_version + "\n";
  out += "# seed " + std::to_string(prov.seed) + "\n";
  out += "# config " + prov.config_hash + "\n";
  return out;
}

json matrix_to_json(const Eigen::MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXcd matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty array");
  Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXcd m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || row.empty()) fail(path, "rows must be non-empty arrays");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    }
    if (static_cast<Eigen::Index>(row.size()) != cols)
      fail(path, "rows must have equal length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& e = row[static_cast<size_t>(c)];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        fail(path, "entries must be [re, im] number pairs");
      m(i, c) = {e[0].get<double>(), e[1].get<double>()};
    }
  }
  return m;
}

json dictionary_spec_to_json(const DictionarySpec& d) {
  return json{{"grid_start_deg", d.grid_start_deg},
              {"grid_stop_deg", d.grid_stop_deg},
              {"grid_step_deg", d.grid_step_deg},
              {"sensors", d.sensors},
              {"spacing_wavelengths", d.spacing_wavelengths}};
}

}  // namespace

json provenance_to_json(const Provenance& p) {
  return json{{"tool_version", p.tool_version},
              {"seed", p.seed},
              {"config_hash", p.config_hash}};
}

std::string config_hash(const json& config) {
  std::string s = config.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_full(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", value);
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void apply_overrides(json& config, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + kv + "' must look like KEY=VALUE");
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    if (key.empty()) throw ConfigError("override '" + kv + "' has an empty key");
    json* cur = &config;
    size_t start = 0;
    while (start <= key.size()) {
      size_t dot = key.find('.', start);
      std::string tok =
          key.substr(start, dot == std::string::npos ? dot : dot - start);
      if (cur->is_object()) {
        if (!cur->contains(tok))
          throw ConfigError("override key '" + key + "' not found in config");
        cur = &(*cur)[tok];
      } else if (cur->is_array()) {
        char* end = nullptr;
        long idx = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0' || idx < 0 ||
            idx >= static_cast<long>(cur->size()))
          throw ConfigError("override key '" + key +
                            "' has a bad array index '" + tok + "'");
        cur = &(*cur)[static_cast<size_t>(idx)];
      } else {
        throw ConfigError("override key '" + key + "' not found in config");
      }
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;
    }
    *cur = parsed;
  }
}

DictionarySpec parse_dictionary_spec(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j,
             {"grid_start_deg", "grid_stop_deg", "grid_step_deg", "sensors",
              "spacing_wavelengths"},
             path);
  DictionarySpec d;
  d.grid_start_deg = get_number(j, "grid_start_deg", path, d.grid_start_deg);
  d.grid_stop_deg = get_number(j, "grid_stop_deg", path, d.grid_stop_deg);
  d.grid_step_deg = get_number(j, "grid_step_deg", path, d.grid_step_deg);
  d.sensors = get_int(j, "sensors", path, d.sensors);
  d.spacing_wavelengths =
      get_number(j, "spacing_wavelengths", path, d.spacing_wavelengths);
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    fail(path.empty() ? "dictionary" : path, e.what());
  }
  return d;
}

MethodSpec parse_method_spec(const json& j, const std::string& path) {
  return parse_method_spec_with_default(j, path, 1);
}

SimulateConfig parse_simulate_config(const json& j) {
  check_object(j, "");
  check_keys(j, {"scene", "dictionary", "perturbation", "seed"}, "");
  SimulateConfig cfg;
  const json* scene = find(j, "scene");
  if (!scene) fail("scene", "is required");
  cfg.scene = parse_scene(*scene, "scene");
  const json* dict = find(j, "dictionary");
  if (!dict) fail("dictionary", "is required");
  cfg.dictionary = parse_dictionary_spec(*dict, "dictionary");
  if (const json* p = find(j, "perturbation"))
    cfg.perturbation = parse_perturbation(*p, "perturbation");
  if (find(j, "seed")) cfg.seed = get_u64(j, "seed", "");
  return cfg;
}

SolveConfig parse_solve_config(const json& j) {
  check_object(j, "");
  check_keys(j, {"method", "inputs"}, "");
  SolveConfig cfg;
  const json* m = find(j, "method");
  if (!m) fail("method", "is required");
  cfg.method = parse_method_spec(*m, "method");
  const json* inputs = find(j, "inputs");
  if (!inputs) fail("inputs", "is required");
  if (!inputs->is_array() || inputs->empty())
    fail("inputs", "must be a non-empty array of file paths");
  for (const auto& p : *inputs) {
    if (!p.is_string()) fail("inputs", "entries must be strings");
    cfg.inputs.push_back(p.get<std::string>());
  }
  return cfg;
}

ExperimentConfig parse_experiment_config(const json& j) {
  check_object(j, "");
  check_keys(j,
             {"scene", "dictionary", "perturbation", "methods", "runs", "seed",
              "sweep", "mass_window_deg"},
             "");
  ExperimentConfig cfg;
  const json* scene = find(j, "scene");
  if (!scene) fail("scene", "is required");
  cfg.scene = parse_scene(*scene, "scene");
  const json* dict = find(j, "dictionary");
  if (!dict) fail("dictionary", "is required");
  cfg.dictionary = parse_dictionary_spec(*dict, "dictionary");
  if (const json* p = find(j, "perturbation"))
    cfg.perturbation = parse_perturbation(*p, "perturbation");
  const json* methods = find(j, "methods");
  if (!methods) fail("methods", "is required");
  if (!methods->is_array() || methods->empty())
    fail("methods", "must be a non-empty array");
  int default_k = std::min(static_cast<int>(cfg.scene.sources.size()),
                           cfg.dictionary.sensors - 1);
  int idx = 0;
  for (const auto& m : *methods) {
    cfg.methods.push_back(parse_method_spec_with_default(
        m, "methods[" + std::to_string(idx) + "]", default_k));
    ++idx;
  }
  cfg.runs = get_int(j, "runs", "", cfg.runs);
  cfg.seed = get_u64(j, "seed", "", cfg.seed);
  cfg.mass_window_deg =
      get_number(j, "mass_window_deg", "", cfg.mass_window_deg);
  if (const json* sw = find(j, "sweep")) {
    check_object(*sw, "sweep");
    check_keys(*sw, {"parameter", "values"}, "sweep");
    SweepSpec sweep;
    std::string pname = get_string(*sw, "parameter", "sweep");
    try {
      sweep.parameter = sweep_parameter_from_name(pname);
    } catch (const std::invalid_argument& e) {
      fail("sweep.parameter", e.what());
    }
    const json* values = find(*sw, "values");
    if (!values || !values->is_array() || values->empty())
      fail("sweep.values", "must be a non-empty array of numbers");
    for (const auto& v : *values) {
      if (!v.is_number()) fail("sweep.values", "entries must be numbers");
      sweep.values.push_back(v.get<double>());
    }
    cfg.sweep = std::move(sweep);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

void write_snapshot_file(const std::filesystem::path& path,
                         const SnapshotFile& file) {
  json j;
  j["provenance"] = provenance_to_json(file.provenance);
  j["frequency"] = file.frequency;
  j["dictionary"] = dictionary_spec_to_json(file.dictionary);
  j["data"] = matrix_to_json(file.data);
  atomic_write(path, j.dump());
}

SnapshotFile read_snapshot_file(const std::filesystem::path& path) {
  json j = load_json_file(path);
  check_object(j, "");
  check_keys(j, {"provenance", "frequency", "dictionary", "data"}, "");
  SnapshotFile out;
  if (const json* p = find(j, "provenance")) {
    check_object(*p, "provenance");
    check_keys(*p, {"tool_version", "seed", "config_hash"}, "provenance");
    if (find(*p, "tool_version"))
      out.provenance.tool_version = get_string(*p, "tool_version", "provenance");
    out.provenance.seed = get_u64(*p, "seed", "provenance", 0);
    if (find(*p, "config_hash"))
      out.provenance.config_hash = get_string(*p, "config_hash", "provenance");
  }
  out.frequency = get_number(j, "frequency", "", 1.0);
  const json* dict = find(j, "dictionary");
  if (!dict) fail("dictionary", "is required");
  out.dictionary = parse_dictionary_spec(*dict, "dictionary");
  const json* data = find(j, "data");
  if (!data) fail("data", "is required");
  out.data = matrix_from_json(*data, "data");
  if (out.data.rows() != out.dictionary.sensors)
    fail("data", "row count must equal dictionary.sensors");
  return out;
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& sp,
                        const Provenance& prov) {
  std::string out = provenance_header(prov);
  out += "angle_deg,value\n";
  for (Eigen::Index m = 0; m < sp.values.size(); ++m) {
    out += format_full(sp.angles_deg(m));
    out += ",";
    out += format_full(sp.values(m));
    out += "\n";
  }
  atomic_write(path, out);
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<double> angles, values;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "angle_deg,value")
        throw ConfigError("unexpected header in " + path.string());
      header_seen = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("malformed row in " + path.string());
    angles.push_back(std::strtod(line.substr(0, comma).c_str(), nullptr));
    values.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  if (!header_seen) throw ConfigError("missing header in " + path.string());
  Spectrum sp;
  sp.angles_deg = Eigen::Map<Eigen::VectorXd>(angles.data(), angles.size());
  sp.values = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
  return sp;
}

void write_dictionary_csv(const std::filesystem::path& path,
                          const Dictionary& dict, const Provenance& prov) {
  std::string out = provenance_header(prov);
  out += "sensor";
  for (int m = 0; m < dict.size(); ++m) {
    std::string tag = "a" + std::to_string(m);
    out += "," + tag + "_re," + tag + "_im";
  }
  out += "\n";
  for (int n = 0; n < dict.sensors; ++n) {
    out += std::to_string(n);
    for (int m = 0; m < dict.size(); ++m) {
      out += ",";
      out += format_full(dict.matrix(n, m).real());
      out += ",";
      out += format_full(dict.matrix(n, m).imag());
    }
    out += "\n";
  }
  atomic_write(path, out);
}

void write_gram_csv(const std::filesystem::path& path, const Dictionary& dict,
                    const Provenance& prov) {
  Eigen::MatrixXd gram = (dict.matrix.adjoint() * dict.matrix).cwiseAbs();
  std::string out = provenance_header(prov);
  out += "angle_deg";
  for (int m = 0; m < dict.size(); ++m) {
    out += ",";
    out += format_full(dict.angles_deg(m));
  }
  out += "\n";
  for (int i = 0; i < dict.size(); ++i) {
    out += format_full(dict.angles_deg(i));
    for (int m = 0; m < dict.size(); ++m) {
      out += ",";
      out += format_full(gram(i, m));
    }
    out += "\n";
  }
  atomic_write(path, out);
}

json metrics_to_json(const MetricsTable& table, const Provenance& prov) {
  json j;
  j["provenance"] = provenance_to_json(prov);
  if (table.sweep_parameter.empty())
    j["sweep_parameter"] = nullptr;
  else
    j["sweep_parameter"] = table.sweep_parameter;
  j["grid_angles_deg"] = std::vector<double>(
      table.grid_angles_deg.data(),
      table.grid_angles_deg.data() + table.grid_angles_deg.size());
  json rows = json::array();
  for (const auto& mm : table.rows) {
    json r;
    r["method"] = mm.method;
    if (std::isfinite(mm.sweep_value)) r["sweep_value"] = mm.sweep_value;
    r["runs"] = mm.runs;
    r["failures"] = mm.failures;
    r["rmse_weakest_deg"] = mm.rmse_weakest_deg;
    r["percentile_lo_deg"] = mm.percentile_lo_deg;
    r["percentile_hi_deg"] = mm.percentile_hi_deg;
    r["total_peaks"] = mm.total_peaks;
    r["true_mass"] = mm.true_mass;
    r["aliased_mass"] = mm.aliased_mass;
    r["aliased_mass_fraction"] = mm.aliased_mass_fraction;
    r["histogram"] = mm.histogram;
    r["second_peak_angles"] = mm.second_peak_angles;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const MetricsTable& table, const Provenance& prov) {
  std::string out = provenance_header(prov);
  out +=
      "sweep_parameter,sweep_value,method,runs,failures,rmse_weakest_deg,"
      "percentile_lo_deg,percentile_hi_deg,total_peaks,true_mass,aliased_mass,"
      "aliased_mass_fraction\n";
  for (const auto& mm : table.rows) {
    out += table.sweep_parameter;
    out += ",";
    if (std::isfinite(mm.sweep_value)) out += format_full(mm.sweep_value);
    out += "," + mm.method;
    out += "," + std::to_string(mm.runs);
    out += "," + std::to_string(mm.failures);
    out += ",";
    if (std::isfinite(mm.rmse_weakest_deg)) out += format_full(mm.rmse_weakest_deg);
    out += ",";
    if (std::isfinite(mm.percentile_lo_deg)) out += format_full(mm.percentile_lo_deg);
    out += ",";
    if (std::isfinite(mm.percentile_hi_deg)) out += format_full(mm.percentile_hi_deg);
    out += "," + std::to_string(mm.total_peaks);
    out += "," + std::to_string(mm.true_mass);
    out += "," + std::to_string(mm.aliased_mass);
    out += "," + format_full(mm.aliased_mass_fraction);
    out += "\n";
  }
  atomic_write(path, out);
}

void write_histogram_csv(const std::filesystem::path& path,
                         const MetricsTable& table, const Provenance& prov) {
  std::string out = provenance_header(prov);
  out += "sweep_value,method,angle_deg,count\n";
  for (const auto& mm : table.rows) {
    for (size_t m = 0; m < mm.histogram.size(); ++m) {
      if (std::isfinite(mm.sweep_value))
        out += format_full(mm.sweep_value);
      out += "," + mm.method;
      out += "," + format_full(table.grid_angles_deg(static_cast<Eigen::Index>(m)));
      out += "," + std::to_string(mm.histogram[m]);
      out += "\n";
    }
  }
  atomic_write(path, out);
}

}  // namespace sbl
