#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "oldroyd/dynamics.hpp"
#include "oldroyd/noise.hpp"
#include "oldroyd/noise_path.hpp"

namespace oldroyd {

/// Fixed-step semi-implicit Euler-Maruyama settings. The horizon is rounded
/// up to a whole number of steps.
struct StepperConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  bool record_noise = false;

  std::uint64_t steps() const {
    if (horizon <= 0.0) return 0;
    return static_cast<std::uint64_t>(std::ceil(horizon / dt - 1e-9));
  }

  double actual_horizon() const { return static_cast<double>(steps()) * dt; }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("stepper.dt must be > 0");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("stepper.T must be >= 0");
  }
};

namespace detail {

inline bool has_wiener_velocity_noise(const NoiseConfig& cfg) {
  return cfg.wiener.lambda0 != 0.0 && (cfg.sigma.c0 != 0.0 || cfg.sigma.c1 != 0.0);
}

inline bool has_stress_noise(const NoiseConfig& cfg) { return cfg.stress.scale != 0.0; }

inline bool has_jumps(const NoiseConfig& cfg) { return cfg.jumps.rate != 0.0 && cfg.jumps.gamma0 != 0.0; }

}  // namespace detail

/// One step from t to t + dt driven by `inc`:
///   v* = v + dt (F(v, tau) - compensator) + sigma(v) dW1
///   v* += G(v*-, z_k) for each jump in time order
///   v_new = J_n P [ v* / (1 + nu dt |xi|^2) ]
///   tau_new = J_n [ tau + dt stress_drift + S(tau) dW2 ]
inline FlowState step(const FlowState& state, const PhysicalParams& params, const NoiseOperators& noise,
                      const NoiseIncrement& inc, double dt) {
  const auto& grid = state.v.grid();
  const double n = grid.truncation_radius();
  const auto& cfg = noise.config();

  const auto drift = drift_terms(state, params, noise);

  VectorField v = state.v;
  v.add_scaled(dt, drift.velocity);
  if (detail::has_jumps(cfg)) v.add_scaled(-dt, noise.compensator(state.v));
  if (detail::has_wiener_velocity_noise(cfg)) v += noise.apply_sigma(state.v, inc.dw1);
  if (detail::has_jumps(cfg)) {
    for (const auto& jump : inc.jumps) v += noise.jump_increment(v, jump.mark);
  }
  const double nu_dt = params.nu * dt;
  v = spectral::apply_multiplier(v, [&](std::size_t m) { return 1.0 / (1.0 + nu_dt * grid.xi_squared(m)); });
  v = spectral::truncate(spectral::leray_project(v), n);

  TensorField tau = state.tau;
  tau.add_scaled(dt, drift.stress);
  if (detail::has_stress_noise(cfg)) tau += noise.stress_noise(state.tau, inc.dw2);
  tau = spectral::truncate(tau, n);
  tau.set_symmetric(state.tau.symmetric() && noise.preserves_symmetry());

  return FlowState(state.t + dt, std::move(v), std::move(tau));
}

/// Sequential stepping state machine. Time is step_index * dt, never
/// accumulated, so replays at any cutoff share the same time grid.
class Stepper {
 public:
  Stepper(FlowState initial, PhysicalParams params, std::shared_ptr<const NoiseOperators> noise, double dt,
          std::uint64_t first_step = 0)
      : state_(std::move(initial)), params_(params), noise_(std::move(noise)), dt_(dt), step_(first_step) {
    params_.validate();
    if (!(dt_ > 0.0)) throw std::invalid_argument("Stepper: dt must be positive");
    if (!noise_ || !state_.v.grid().same_discretization(*noise_->grid_ptr()) ||
        state_.v.grid().truncation_radius() != noise_->grid_ptr()->truncation_radius()) {
      throw std::invalid_argument("Stepper: noise operators built for a different grid");
    }
    state_.t = static_cast<double>(step_) * dt_;
  }

  void advance(const NoiseIncrement& inc) {
    state_ = step(state_, params_, *noise_, inc, dt_);
    ++step_;
    state_.t = static_cast<double>(step_) * dt_;
  }

  const FlowState& state() const { return state_; }
  std::uint64_t step_index() const { return step_; }
  double dt() const { return dt_; }
  const PhysicalParams& params() const { return params_; }
  const NoiseOperators& noise() const { return *noise_; }

 private:
  FlowState state_;
  PhysicalParams params_;
  std::shared_ptr<const NoiseOperators> noise_;
  double dt_;
  std::uint64_t step_;
};

/// Projects arbitrary initial data into the admissible set: v solenoidal and
/// in the truncation ball, tau truncated and, if requested, symmetrized.
inline FlowState admissible_state(FlowState s) {
  const double n = s.v.grid().truncation_radius();
  s.v = spectral::truncate(spectral::leray_project(s.v), n);
  s.tau = spectral::truncate(s.tau, n);
  return s;
}

/// Re-expresses a state on another grid with the same box (zero padding or
/// truncation), then truncates to the target ball.
inline FlowState transfer_state(const FlowState& s, const GridPtr& target) {
  const auto& src = s.v.grid();
  if (src.dim() != target->dim() || src.box_length() != target->box_length()) {
    throw std::invalid_argument("transfer_state: grids differ in dimension or box");
  }
  auto move_field = [&](const auto& f) {
    using FieldT = std::decay_t<decltype(f)>;
    FieldT out(target);
    const int kmax = std::min(src.max_retained_index(), target->max_retained_index());
    for (std::size_t m = 0; m < src.size(); ++m) {
      const auto& k = src.index(m);
      bool inside = true;
      for (int a = 0; a < src.dim(); ++a) inside = inside && std::abs(k[a]) <= kmax;
      if (!inside) continue;
      const auto t = target->flat_index(k);
      for (int c = 0; c < f.components(); ++c) out.component(c)[t] = f.component(c)[m];
    }
    return spectral::truncate(out, target->truncation_radius());
  };
  FlowState out(s.t, move_field(s.v), move_field(s.tau));
  out.tau.set_symmetric(s.tau.symmetric());
  return out;
}

}  // namespace oldroyd
