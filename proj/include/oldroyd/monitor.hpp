#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oldroyd/dynamics.hpp"

namespace oldroyd {

struct MonitorConfig {
  double threshold = 1e3;            ///< N in the stopping time rho_N
  double s = 2.0;                    ///< Sobolev index of the energy
  double divergence_level = 1e12;    ///< E_N above this (or non-finite) is divergence
  bool stop_at_threshold = true;

  void validate() const {
    if (!(threshold > 0.0)) throw std::invalid_argument("monitor.N must be > 0");
    if (!std::isfinite(s)) throw std::invalid_argument("monitor.s must be finite");
    if (!(divergence_level > 0.0)) throw std::invalid_argument("monitor.divergence_level must be > 0");
  }
};

struct EnergyRecord {
  double t = 0.0;
  double v_hs2 = 0.0;
  double tau_hs2 = 0.0;
  double gradv_hs2 = 0.0;
  double cum_diss = 0.0;
  double energy = 0.0;  ///< E_N
  double sym_defect = 0.0;

  bool operator==(const EnergyRecord&) const = default;
};

/// Energy functional at one instant given the dissipation integral so far.
inline EnergyRecord energy(const FlowState& state, double s, const PhysicalParams& params, double cum_diss = 0.0) {
  EnergyRecord r;
  r.t = state.t;
  r.v_hs2 = spectral::hs_norm_squared(state.v, s);
  r.tau_hs2 = spectral::hs_norm_squared(state.tau, s);
  r.gradv_hs2 = spectral::hs_norm_squared(spectral::gradient(state.v), s);
  r.cum_diss = cum_diss;
  r.energy = params.mu2 * r.v_hs2 + params.mu1 * r.tau_hs2 + 2.0 * params.mu2 * params.nu * cum_diss;
  // flagged tensors are mirrored exactly, so their defect is exactly zero
  r.sym_defect = state.tau.symmetric() ? 0.0 : spectral::symmetry_defect(state.tau);
  return r;
}

/// Accumulates the record series; the dissipation integral uses the left
/// endpoint, cum(t_k) = sum_{i<k} dt * gradv(t_i).
class EnergyMonitor {
 public:
  EnergyMonitor(MonitorConfig config, PhysicalParams params, double dt)
      : config_(config), params_(params), dt_(dt) {}

  const EnergyRecord& observe(const FlowState& state) {
    double cum = 0.0;
    if (!records_.empty()) cum = records_.back().cum_diss + dt_ * records_.back().gradv_hs2;
    records_.push_back(energy(state, config_.s, params_, cum));
    return records_.back();
  }

  /// Seeds the series with a previously recorded entry (checkpoint resume).
  void restore(const EnergyRecord& last) {
    records_.clear();
    records_.push_back(last);
  }

  const std::vector<EnergyRecord>& records() const { return records_; }
  const MonitorConfig& config() const { return config_; }

 private:
  MonitorConfig config_;
  PhysicalParams params_;
  double dt_;
  std::vector<EnergyRecord> records_;
};

enum class StopKind { threshold, divergence, horizon };

inline const char* to_string(StopKind kind) {
  switch (kind) {
    case StopKind::threshold: return "threshold_N";
    case StopKind::divergence: return "divergence";
    case StopKind::horizon: return "horizon";
  }
  return "unknown";
}

inline StopKind stop_kind_from_string(const std::string& s) {
  if (s == "threshold_N") return StopKind::threshold;
  if (s == "divergence") return StopKind::divergence;
  if (s == "horizon") return StopKind::horizon;
  throw std::invalid_argument("unknown stop kind '" + s + "'");
}

struct StoppingEvent {
  StopKind kind = StopKind::horizon;
  double t_stop = 0.0;
  double energy = 0.0;
  std::uint64_t step = 0;  ///< step count at the stopping sample

  bool operator==(const StoppingEvent&) const = default;
};

inline bool is_divergent(const EnergyRecord& r, double level) {
  const double vals[] = {r.v_hs2, r.tau_hs2, r.gradv_hs2, r.cum_diss, r.energy};
  for (double x : vals) {
    if (!std::isfinite(x)) return true;
  }
  return r.energy > level;
}

/// Classifies one sample: divergence takes precedence over crossing N.
inline std::optional<StopKind> classify(const EnergyRecord& r, double threshold, double divergence_level) {
  if (is_divergent(r, divergence_level)) return StopKind::divergence;
  if (r.energy > threshold) return StopKind::threshold;
  return std::nullopt;
}

/// First sample with E_N > N (strict) or divergence; empty on survival.
inline std::optional<StoppingEvent> detect_stop(const std::vector<EnergyRecord>& records, double threshold,
                                                double divergence_level = 1e12) {
  if (!(threshold > 0.0)) throw std::invalid_argument("detect_stop: N must be > 0");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (const auto kind = classify(records[i], threshold, divergence_level)) {
      return StoppingEvent{*kind, records[i].t, records[i].energy, i};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- output

/// Shortest round-trip decimal form; locale independent.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, x >>= 4) s[static_cast<std::size_t>(i)] = digits[x & 0xF];
  return s;
}

/// Provenance stamped on every output: config hash and master seed.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;

  std::string comment_line() const {
    return "# config_hash=" + hex64(config_hash) + " master_seed=" + std::to_string(master_seed);
  }
  nlohmann::json to_json() const { return {{"config_hash", hex64(config_hash)}, {"master_seed", master_seed}}; }
};

inline constexpr const char* kEnergyCsvHeader = "t,v_hs2,tau_hs2,gradv_hs2,cum_diss,E_N,sym_defect";

inline void write_energy_csv(std::ostream& os, const std::vector<EnergyRecord>& records, const Provenance& prov) {
  os << prov.comment_line() << '\n' << kEnergyCsvHeader << '\n';
  for (const auto& r : records) {
    os << format_double(r.t) << ',' << format_double(r.v_hs2) << ',' << format_double(r.tau_hs2) << ','
       << format_double(r.gradv_hs2) << ',' << format_double(r.cum_diss) << ',' << format_double(r.energy) << ','
       << format_double(r.sym_defect) << '\n';
  }
}

inline constexpr int kStopEventSchema = 1;

inline nlohmann::json to_json(const StoppingEvent& e, const Provenance& prov) {
  nlohmann::json j;
  j["schema_version"] = kStopEventSchema;
  j["kind"] = to_string(e.kind);
  j["t_stop"] = e.t_stop;
  j["E_N"] = std::isfinite(e.energy) ? nlohmann::json(e.energy) : nlohmann::json(format_double(e.energy));
  j["provenance"] = prov.to_json();
  return j;
}

inline StoppingEvent stopping_event_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kStopEventSchema) {
    throw std::runtime_error("stopping event: unsupported schema version");
  }
  StoppingEvent e;
  e.kind = stop_kind_from_string(j.at("kind").get<std::string>());
  e.t_stop = j.at("t_stop").get<double>();
  const auto& en = j.at("E_N");
  e.energy = en.is_string() ? std::stod(en.get<std::string>()) : en.get<double>();
  return e;
}

}  // namespace oldroyd
