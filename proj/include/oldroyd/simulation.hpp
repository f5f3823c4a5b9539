#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "oldroyd/binary_io.hpp"
#include "oldroyd/integrator.hpp"
#include "oldroyd/monitor.hpp"
#include "oldroyd/noise_path.hpp"

namespace oldroyd {

struct SimulationSetup {
  GridPtr grid;
  PhysicalParams params;
  NoiseConfig noise;
  StepperConfig stepper;
  MonitorConfig monitor;

  void validate() const {
    if (!grid) throw std::invalid_argument("simulation: grid missing");
    params.validate();
    noise.validate();
    stepper.validate();
    monitor.validate();
  }
};

struct SimulationResult {
  FlowState final_state;
  std::vector<EnergyRecord> records;
  StoppingEvent stop;
  std::optional<NoisePath> noise_path;
  std::uint64_t steps_taken = 0;
  double actual_horizon = 0.0;
};

/// Full spectral state plus RNG state; enough to continue a run bitwise.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  int dim = 2;
  int modes = 0;
  double box_length = 0.0;
  double truncation_radius = 0.0;
  double dt = 0.0;
  std::uint64_t step = 0;
  bool tau_symmetric = true;
  std::vector<Complex> v;    ///< component-major coefficients
  std::vector<Complex> tau;
  std::string rng_state;
  EnergyRecord last_record;
};

/// Sequential driver: one NoiseIncrement per step from either a sampler or a
/// recorded path, an energy sample after every step, and a stop check.
class Simulation {
 public:
  Simulation(const FlowState& initial, SimulationSetup setup, std::uint64_t noise_seed)
      : Simulation(Bare{}, initial, std::move(setup), 0) {
    sampler_.emplace(setup_.noise, setup_.stepper.dt, noise_seed);
    start();
  }

  /// Replay driver; the path must match dt and the noise basis.
  Simulation(const FlowState& initial, SimulationSetup setup, const NoisePath& path)
      : Simulation(Bare{}, initial, std::move(setup), 0) {
    path.check_compatible(setup_.grid->dim(), setup_.noise, setup_.stepper.dt);
    if (path.steps.size() < setup_.stepper.steps()) {
      throw std::invalid_argument("noise path has " + std::to_string(path.steps.size()) + " steps, run needs " +
                                  std::to_string(setup_.stepper.steps()));
    }
    replay_ = &path;
    start();
  }

  static Simulation resume(const Checkpoint& ckpt, SimulationSetup setup) {
    const auto& g = *setup.grid;
    if (ckpt.dim != g.dim() || ckpt.modes != g.modes() || ckpt.box_length != g.box_length() ||
        ckpt.truncation_radius != g.truncation_radius()) {
      throw std::invalid_argument("checkpoint: grid mismatch");
    }
    if (ckpt.dt != setup.stepper.dt) throw std::invalid_argument("checkpoint: time step mismatch");
    FlowState state(setup.grid);
    auto unpack = [&](auto& field, const std::vector<Complex>& data) {
      if (data.size() != static_cast<std::size_t>(field.components()) * g.size()) throw std::runtime_error("checkpoint: field size mismatch");
      for (int c = 0; c < field.components(); ++c) {
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * g.size()), g.size(), field.component(c).begin());
      }
    };
    unpack(state.v, ckpt.v);
    unpack(state.tau, ckpt.tau);
    state.tau.set_symmetric(ckpt.tau_symmetric);
    Simulation sim(Bare{}, state, std::move(setup), ckpt.step);
    sim.sampler_.emplace(sim.setup_.noise, sim.setup_.stepper.dt, 0);
    sim.sampler_->load_state(ckpt.rng_state);
    sim.monitor_.restore(ckpt.last_record);
    sim.check_stop();
    return sim;
  }

  bool finished() const { return stop_.has_value(); }

  /// Advances at most `max_steps` steps; returns true when the run is over.
  bool run(std::uint64_t max_steps = std::numeric_limits<std::uint64_t>::max()) {
    for (std::uint64_t i = 0; i < max_steps && !finished(); ++i) advance();
    return finished();
  }

  void advance() {
    if (finished()) return;
    const auto k = stepper_.step_index();
    NoiseIncrement inc = replay_ ? replay_->steps[k] : sampler_->next(k, stepper_.state().t);
    if (path_) path_->steps.push_back(inc);
    stepper_.advance(inc);
    monitor_.observe(stepper_.state());
    check_stop();
  }

  Checkpoint checkpoint() const {
    if (!sampler_) throw std::logic_error("checkpoint: replay runs carry no RNG state");
    const auto& g = *setup_.grid;
    Checkpoint c;
    c.dim = g.dim();
    c.modes = g.modes();
    c.box_length = g.box_length();
    c.truncation_radius = g.truncation_radius();
    c.dt = setup_.stepper.dt;
    c.step = stepper_.step_index();
    const auto& s = stepper_.state();
    c.tau_symmetric = s.tau.symmetric();
    for (int i = 0; i < s.v.components(); ++i) c.v.insert(c.v.end(), s.v.component(i).begin(), s.v.component(i).end());
    for (int i = 0; i < s.tau.components(); ++i) {
      c.tau.insert(c.tau.end(), s.tau.component(i).begin(), s.tau.component(i).end());
    }
    c.rng_state = sampler_->save_state();
    c.last_record = monitor_.records().back();
    return c;
  }

  const FlowState& state() const { return stepper_.state(); }
  const std::vector<EnergyRecord>& records() const { return monitor_.records(); }
  std::uint64_t step_index() const { return stepper_.step_index(); }

  SimulationResult result() const {
    SimulationResult r{stepper_.state(), monitor_.records(), stop_.value_or(StoppingEvent{}), path_,
                       stepper_.step_index(), setup_.stepper.actual_horizon()};
    return r;
  }

 private:
  struct Bare {};

  Simulation(Bare, const FlowState& initial, SimulationSetup setup, std::uint64_t first_step)
      : setup_(validated(std::move(setup))),
        stepper_(checked_state(initial, *setup_.grid), setup_.params,
                 std::make_shared<const NoiseOperators>(setup_.grid, setup_.noise), setup_.stepper.dt, first_step),
        monitor_(setup_.monitor, setup_.params, setup_.stepper.dt) {}

  static SimulationSetup validated(SimulationSetup s) {
    s.validate();
    return s;
  }

  static FlowState checked_state(const FlowState& s, const SpectralGrid& grid) {
    if (!(s.v.grid() == grid) || !(s.tau.grid() == grid)) {
      throw std::invalid_argument("simulation: initial state lives on a different grid");
    }
    return s;
  }

  void start() {
    if (setup_.stepper.record_noise) {
      path_ = NoisePath::for_config(setup_.grid->dim(), setup_.noise, setup_.stepper.dt);
    }
    monitor_.observe(stepper_.state());
    check_stop();
  }

  void check_stop() {
    const auto& r = monitor_.records().back();
    const auto index = stepper_.step_index();
    if (const auto kind = classify(r, setup_.monitor.threshold, setup_.monitor.divergence_level)) {
      if (*kind == StopKind::divergence || setup_.monitor.stop_at_threshold) {
        stop_ = StoppingEvent{*kind, r.t, r.energy, index};
        return;
      }
      if (!first_crossing_) first_crossing_ = StoppingEvent{*kind, r.t, r.energy, index};
    }
    if (stepper_.step_index() >= setup_.stepper.steps()) {
      stop_ = first_crossing_.value_or(StoppingEvent{StopKind::horizon, r.t, r.energy, index});
    }
  }

  SimulationSetup setup_;
  Stepper stepper_;
  EnergyMonitor monitor_;
  std::optional<NoiseSampler> sampler_;
  const NoisePath* replay_ = nullptr;
  std::optional<NoisePath> path_;
  std::optional<StoppingEvent> stop_;
  std::optional<StoppingEvent> first_crossing_;
};

inline SimulationResult simulate(const FlowState& initial, const SimulationSetup& setup, std::uint64_t noise_seed) {
  Simulation sim(initial, setup, noise_seed);
  sim.run();
  return sim.result();
}

/// Drives the run with a recorded noise path, possibly on a finer grid.
inline SimulationResult simulate_replay(const FlowState& initial, const SimulationSetup& setup,
                                        const NoisePath& path) {
  Simulation sim(initial, setup, path);
  sim.run();
  return sim.result();
}

// ---------------------------------------------------------------- checkpoint files
//
// "OLDCKPT\0" | u32 version | u32 dim | u32 M | f64 L | f64 n | f64 dt |
// u64 step | u32 symmetric | u64 len, len x (f64 re, f64 im) for v and tau |
// bytes rng | 7 x f64 last record

inline void write_checkpoint(std::ostream& os, const Checkpoint& c) {
  binary::put_magic(os, "OLDCKPT_");
  binary::put_u32(os, Checkpoint::kVersion);
  binary::put_u32(os, static_cast<std::uint32_t>(c.dim));
  binary::put_u32(os, static_cast<std::uint32_t>(c.modes));
  binary::put_f64(os, c.box_length);
  binary::put_f64(os, c.truncation_radius);
  binary::put_f64(os, c.dt);
  binary::put_u64(os, c.step);
  binary::put_u32(os, c.tau_symmetric ? 1 : 0);
  for (const auto* data : {&c.v, &c.tau}) {
    binary::put_u64(os, data->size());
    for (const auto& z : *data) {
      binary::put_f64(os, z.real());
      binary::put_f64(os, z.imag());
    }
  }
  binary::put_bytes(os, c.rng_state);
  const auto& r = c.last_record;
  for (double x : {r.t, r.v_hs2, r.tau_hs2, r.gradv_hs2, r.cum_diss, r.energy, r.sym_defect}) binary::put_f64(os, x);
}

inline Checkpoint read_checkpoint(std::istream& is) {
  binary::expect_magic(is, "OLDCKPT_", "checkpoint");
  const auto version = binary::get_u32(is);
  if (version != Checkpoint::kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.dim = static_cast<int>(binary::get_u32(is));
  c.modes = static_cast<int>(binary::get_u32(is));
  c.box_length = binary::get_f64(is);
  c.truncation_radius = binary::get_f64(is);
  c.dt = binary::get_f64(is);
  c.step = binary::get_u64(is);
  c.tau_symmetric = binary::get_u32(is) != 0;
  for (auto* data : {&c.v, &c.tau}) {
    const auto n = binary::get_u64(is);
    if (n > (1ull << 32)) throw std::runtime_error("checkpoint: field length out of range");
    data->resize(static_cast<std::size_t>(n));
    for (auto& z : *data) {
      const double re = binary::get_f64(is);
      const double im = binary::get_f64(is);
      z = Complex(re, im);
    }
  }
  c.rng_state = binary::get_bytes(is);
  auto& r = c.last_record;
  for (double* x : {&r.t, &r.v_hs2, &r.tau_hs2, &r.gradv_hs2, &r.cum_diss, &r.energy, &r.sym_defect}) {
    *x = binary::get_f64(is);
  }
  return c;
}

inline void save_checkpoint(const std::string& file, const Checkpoint& c) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + file + " for writing");
  write_checkpoint(os, c);
  if (!os) throw std::runtime_error("failed writing " + file);
}

inline Checkpoint load_checkpoint(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file);
  return read_checkpoint(is);
}

}  // namespace oldroyd
