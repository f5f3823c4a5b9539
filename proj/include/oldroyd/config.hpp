#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "oldroyd/experiments.hpp"

namespace oldroyd {

/// Invalid or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Unreadable input or unwritable output (CLI exit code 3).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridConfig {
  int dim = 2;
  int modes = 64;
  double box_length = spectral::kTwoPi;
  double truncation_radius = 21.0;
};

/// Everything a command needs; sections mirror the INI layout.
struct RunConfig {
  GridConfig grid;
  PhysicalParams params;
  double s = 2.0;  ///< solution regularity index
  InitialData initial;
  NoiseConfig noise;
  StepperConfig stepper;
  MonitorConfig monitor;
  std::uint64_t master_seed = 0;
  EnsembleOptions ensemble;
  RefinementOptions refine;

  GridPtr make_grid() const {
    try {
      return spectral::make_grid(grid.dim, grid.modes, grid.box_length, grid.truncation_radius);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  SimulationSetup setup() const {
    SimulationSetup s_;
    s_.grid = make_grid();
    s_.params = params;
    s_.noise = noise;
    s_.stepper = stepper;
    s_.monitor = monitor;
    return s_;
  }

  /// Checks every section; the message names the offending key.
  void validate() const {
    if (grid.dim != 2 && grid.dim != 3) throw ConfigError("grid.dim = " + std::to_string(grid.dim) + " must be 2 or 3");
    if (grid.modes < 8 || grid.modes % 2 != 0) {
      throw ConfigError("grid.M = " + std::to_string(grid.modes) + " must be even and >= 8");
    }
    if (!(grid.box_length > 0.0) || !std::isfinite(grid.box_length)) throw ConfigError("grid.L must be > 0");
    if (!(grid.truncation_radius > 0.0)) throw ConfigError("grid.n must be > 0");
    make_grid();
    if (!std::isfinite(s) || s < 0.0) throw ConfigError("params.s must be >= 0");
    try {
      params.validate();
      initial.validate();
      noise.validate();
      stepper.validate();
      monitor.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (refine.paths < 1) throw ConfigError("refine.paths must be >= 1");
    for (double c : refine.cutoffs) {
      if (!(c > 0.0)) throw ConfigError("refine.cutoffs entries must be > 0");
    }
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string key_name(const std::string& section, const std::string& key) { return section + "." + key; }

inline double to_double(const std::string& text, const std::string& key) {
  const auto t = trim(text);
  double x = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + " = '" + t + "' is not a number");
  }
  return x;
}

inline std::uint64_t to_u64(const std::string& text, const std::string& key) {
  const auto t = trim(text);
  std::uint64_t x = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + " = '" + t + "' is not a non-negative integer");
  }
  return x;
}

inline int to_int(const std::string& text, const std::string& key) {
  const auto t = trim(text);
  int x = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + " = '" + t + "' is not an integer");
  }
  return x;
}

inline bool to_bool(const std::string& text, const std::string& key) {
  const auto t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(key + " = '" + t + "' is not a boolean (true/false)");
}

inline std::vector<double> to_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item, key));
  if (out.empty()) throw ConfigError(key + " must list at least one value");
  return out;
}

inline std::string from_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + format_double(xs[i]);
  return out;
}

inline std::string from_bool(bool b) { return b ? "true" : "false"; }

/// One configurable key: how to read it into and write it out of RunConfig.
struct Binding {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

template <class Get>
Binding real(std::string section, std::string key, Get get) {
  return {section, key,
          [get](RunConfig& c, const std::string& v, const std::string& name) { get(c) = to_double(v, name); },
          [get](const RunConfig& c) { return format_double(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Binding integer(std::string section, std::string key, Get get) {
  return {section, key,
          [get](RunConfig& c, const std::string& v, const std::string& name) { get(c) = to_int(v, name); },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Binding count(std::string section, std::string key, Get get) {
  return {section, key,
          [get](RunConfig& c, const std::string& v, const std::string& name) {
            get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(to_u64(v, name));
          },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Binding flag(std::string section, std::string key, Get get) {
  return {section, key,
          [get](RunConfig& c, const std::string& v, const std::string& name) { get(c) = to_bool(v, name); },
          [get](const RunConfig& c) { return from_bool(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Binding list(std::string section, std::string key, Get get) {
  return {section, key,
          [get](RunConfig& c, const std::string& v, const std::string& name) { get(c) = to_list(v, name); },
          [get](const RunConfig& c) { return from_list(get(const_cast<RunConfig&>(c))); }};
}

inline const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    b.push_back(integer("grid", "dim", [](RunConfig& c) -> int& { return c.grid.dim; }));
    b.push_back(integer("grid", "M", [](RunConfig& c) -> int& { return c.grid.modes; }));
    b.push_back(real("grid", "L", [](RunConfig& c) -> double& { return c.grid.box_length; }));
    b.push_back(real("grid", "n", [](RunConfig& c) -> double& { return c.grid.truncation_radius; }));

    b.push_back(real("params", "nu", [](RunConfig& c) -> double& { return c.params.nu; }));
    b.push_back(real("params", "a", [](RunConfig& c) -> double& { return c.params.a; }));
    b.push_back(real("params", "b", [](RunConfig& c) -> double& { return c.params.b; }));
    b.push_back(real("params", "mu1", [](RunConfig& c) -> double& { return c.params.mu1; }));
    b.push_back(real("params", "mu2", [](RunConfig& c) -> double& { return c.params.mu2; }));
    b.push_back(real("params", "s", [](RunConfig& c) -> double& { return c.s; }));
    b.push_back(flag("params", "nonlinear", [](RunConfig& c) -> bool& { return c.params.nonlinear; }));

    b.push_back(real("initial", "velocity_amplitude", [](RunConfig& c) -> double& { return c.initial.velocity_amplitude; }));
    b.push_back(real("initial", "stress_amplitude", [](RunConfig& c) -> double& { return c.initial.stress_amplitude; }));
    b.push_back(real("initial", "decay", [](RunConfig& c) -> double& { return c.initial.decay; }));
    b.push_back(flag("initial", "randomize", [](RunConfig& c) -> bool& { return c.initial.randomize; }));

    b.push_back(real("noise", "lambda0", [](RunConfig& c) -> double& { return c.noise.wiener.lambda0; }));
    b.push_back(integer("noise", "count", [](RunConfig& c) -> int& { return c.noise.wiener.count; }));
    b.push_back(real("noise", "c0", [](RunConfig& c) -> double& { return c.noise.sigma.c0; }));
    b.push_back(real("noise", "c1", [](RunConfig& c) -> double& { return c.noise.sigma.c1; }));
    b.push_back(Binding{
        "noise", "h_kind",
        [](RunConfig& c, const std::string& v, const std::string& name) {
          const auto t = trim(v);
          if (t == "identity") c.noise.stress.profile = StressNoiseProfile::identity;
          else if (t == "bump") c.noise.stress.profile = StressNoiseProfile::bump;
          else throw ConfigError(name + " = '" + t + "' must be identity or bump");
        },
        [](const RunConfig& c) {
          return std::string(c.noise.stress.profile == StressNoiseProfile::identity ? "identity" : "bump");
        }});
    b.push_back(real("noise", "h_scale", [](RunConfig& c) -> double& { return c.noise.stress.scale; }));
    b.push_back(Binding{
        "noise", "h_matrix",
        [](RunConfig& c, const std::string& v, const std::string& name) {
          const auto xs = to_list(v, name);
          if (xs.size() != 9) throw ConfigError(name + " needs 9 row-major entries, got " + std::to_string(xs.size()));
          std::copy(xs.begin(), xs.end(), c.noise.stress.matrix.begin());
        },
        [](const RunConfig& c) {
          return from_list(std::vector<double>(c.noise.stress.matrix.begin(), c.noise.stress.matrix.end()));
        }});
    b.push_back(real("noise", "h_width", [](RunConfig& c) -> double& { return c.noise.stress.width; }));
    b.push_back(flag("noise", "h_identity_only", [](RunConfig& c) -> bool& { return c.noise.stress.identity_only; }));
    b.push_back(real("noise", "jump_rate", [](RunConfig& c) -> double& { return c.noise.jumps.rate; }));
    b.push_back(real("noise", "gamma0", [](RunConfig& c) -> double& { return c.noise.jumps.gamma0; }));
    b.push_back(real("noise", "z_min", [](RunConfig& c) -> double& { return c.noise.jumps.z_min; }));
    b.push_back(real("noise", "z_max", [](RunConfig& c) -> double& { return c.noise.jumps.z_max; }));
    b.push_back(Binding{
        "noise", "jump_profile",
        [](RunConfig& c, const std::string& v, const std::string& name) {
          const auto t = trim(v);
          if (t == "constant") c.noise.jumps.profile = JumpProfile::constant;
          else if (t == "linear") c.noise.jumps.profile = JumpProfile::linear;
          else throw ConfigError(name + " = '" + t + "' must be constant or linear");
        },
        [](const RunConfig& c) {
          return std::string(c.noise.jumps.profile == JumpProfile::constant ? "constant" : "linear");
        }});
    b.push_back(real("noise", "smoothing", [](RunConfig& c) -> double& { return c.noise.jumps.smoothing; }));

    b.push_back(real("stepper", "dt", [](RunConfig& c) -> double& { return c.stepper.dt; }));
    b.push_back(real("stepper", "T", [](RunConfig& c) -> double& { return c.stepper.horizon; }));
    b.push_back(flag("stepper", "record_noise", [](RunConfig& c) -> bool& { return c.stepper.record_noise; }));

    b.push_back(real("monitor", "N", [](RunConfig& c) -> double& { return c.monitor.threshold; }));
    b.push_back(real("monitor", "s", [](RunConfig& c) -> double& { return c.monitor.s; }));
    b.push_back(real("monitor", "divergence_level", [](RunConfig& c) -> double& { return c.monitor.divergence_level; }));
    b.push_back(flag("monitor", "stop_at_threshold", [](RunConfig& c) -> bool& { return c.monitor.stop_at_threshold; }));

    b.push_back(count("seeds", "master", [](RunConfig& c) -> std::uint64_t& { return c.master_seed; }));

    b.push_back(count("ensemble", "runs", [](RunConfig& c) -> std::uint64_t& { return c.ensemble.runs; }));
    b.push_back(list("ensemble", "deltas", [](RunConfig& c) -> std::vector<double>& { return c.ensemble.deltas; }));
    b.push_back(count("ensemble", "threads", [](RunConfig& c) -> unsigned& { return c.ensemble.threads; }));

    b.push_back(list("refine", "cutoffs", [](RunConfig& c) -> std::vector<double>& { return c.refine.cutoffs; }));
    b.push_back(count("refine", "paths", [](RunConfig& c) -> std::uint64_t& { return c.refine.paths; }));
    b.push_back(real("refine", "data_radius", [](RunConfig& c) -> double& { return c.refine.data_radius; }));
    return b;
  }();
  return table;
}

inline const Binding* find_binding(const std::string& section, const std::string& key) {
  for (const auto& b : bindings()) {
    if (b.section == section && b.key == key) return &b;
  }
  return nullptr;
}

}  // namespace config_detail

/// Parses INI text. Missing keys keep their defaults; unknown sections or
/// keys are errors. The result is not validated.
inline RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: " + e.message() + " at line " + std::to_string(e.line()));
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      const auto name = config_detail::key_name(section, key);
      const auto* binding = config_detail::find_binding(section, key);
      if (!binding) throw ConfigError("config: unknown key " + name);
      if (!value.empty()) throw ConfigError("config: nested key under " + name);
      binding->read(cfg, value.data(), name);
    }
  }
  return cfg;
}

/// Canonical INI text; parse_config(serialize_config(c)) reproduces c exactly.
inline std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  std::string current;
  for (const auto& b : config_detail::bindings()) {
    if (b.section != current) {
      if (!current.empty()) out += '\n';
      out += "[" + b.section + "]\n";
      current = b.section;
    }
    out += b.key + " = " + b.write(cfg) + '\n';
  }
  return out;
}

/// FNV-1a over the canonical text without the seeds section, so the hash
/// identifies the physical setup independently of the master seed.
inline std::uint64_t config_hash(const RunConfig& cfg) {
  RunConfig copy = cfg;
  copy.master_seed = 0;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(copy)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Provenance provenance(const RunConfig& cfg) { return {config_hash(cfg), cfg.master_seed}; }

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

/// Field-by-field equality through the canonical serialization.
inline bool same_config(const RunConfig& a, const RunConfig& b) { return serialize_config(a) == serialize_config(b); }

}  // namespace oldroyd
