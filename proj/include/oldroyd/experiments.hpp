#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "oldroyd/random_field.hpp"
#include "oldroyd/simulation.hpp"

namespace oldroyd {

inline constexpr int kExperimentSchema = 1;

// ---------------------------------------------------------------- initial data

/// Deterministic or per-run random initial data. Amplitudes are L2 norms.
struct InitialData {
  double velocity_amplitude = 0.5;
  double stress_amplitude = 0.5;
  double decay = 6.0;     ///< coefficient decay exponent alpha
  bool randomize = false; ///< fresh draw per ensemble run

  void validate() const {
    if (!(velocity_amplitude >= 0.0) || !std::isfinite(velocity_amplitude)) {
      throw std::invalid_argument("initial.velocity_amplitude must be >= 0");
    }
    if (!(stress_amplitude >= 0.0) || !std::isfinite(stress_amplitude)) {
      throw std::invalid_argument("initial.stress_amplitude must be >= 0");
    }
    if (!std::isfinite(decay)) throw std::invalid_argument("initial.decay must be finite");
  }

  InitialData scaled(double factor) const {
    InitialData d = *this;
    d.velocity_amplitude *= factor;
    d.stress_amplitude *= factor;
    return d;
  }
};

namespace detail {

template <class Kind>
void normalize_l2(spectral::Field<Kind>& f, double amplitude) {
  const double norm = spectral::hs_norm(f, 0.0);
  if (norm == 0.0 || amplitude == 0.0) {
    f *= 0.0;
    return;
  }
  f *= amplitude / norm;
}

}  // namespace detail

/// Initial state for ensemble member `run`. Without randomization every run
/// shares the draw of run 0.
inline FlowState make_initial_state(const GridPtr& grid, const InitialData& init, std::uint64_t master_seed,
                                    std::uint64_t run = 0) {
  init.validate();
  const std::uint64_t index = init.randomize ? run : 0;
  auto v = spectral::random_solenoidal(grid, init.decay, derive_seed(master_seed, SeedStream::initial_velocity, index));
  auto tau = spectral::random_symmetric(grid, init.decay, derive_seed(master_seed, SeedStream::initial_stress, index));
  detail::normalize_l2(v, init.velocity_amplitude);
  detail::normalize_l2(tau, init.stress_amplitude);
  return admissible_state(FlowState(0.0, std::move(v), std::move(tau)));
}

// ---------------------------------------------------------------- parallel loop

namespace detail {

/// Calls body(i) for i in [0, count) on `threads` workers. Results must be
/// written by index; the first exception is rethrown.
inline void parallel_for(std::uint64_t count, unsigned threads, const std::function<void(std::uint64_t)>& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::uint64_t>(count, 1))));
  if (threads == 1) {
    for (std::uint64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// ||f - g||^2 in H^s for fields on grids with the same discretization.
template <class Kind>
double hs_distance_squared(const spectral::Field<Kind>& f, const spectral::Field<Kind>& g, double s) {
  const auto& grid = f.grid();
  if (!grid.same_discretization(g.grid())) throw std::invalid_argument("hs_distance: discretizations differ");
  double acc = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    double local = 0.0;
    for (int c = 0; c < f.components(); ++c) local += std::norm(f.component(c)[m] - g.component(c)[m]);
    if (local != 0.0) acc += spectral::bessel_weight(grid.xi_squared(m), s) * local;
  }
  return acc;
}

/// ||grad (f - g)||_{L2}^2 for vector fields.
inline double gradient_distance_squared(const VectorField& f, const VectorField& g) {
  const auto& grid = f.grid();
  double acc = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    double local = 0.0;
    for (int c = 0; c < f.components(); ++c) local += std::norm(f.component(c)[m] - g.component(c)[m]);
    acc += grid.xi_squared(m) * local;
  }
  return acc;
}

/// Least-squares slope of y against x.
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx == 0.0 ? std::numeric_limits<double>::quiet_NaN() : sxy / sxx;
}

inline nlohmann::json number_or_string(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_double(x));
}

}  // namespace detail

// ---------------------------------------------------------------- ensemble

struct WilsonInterval {
  double lower = 0.0;
  double upper = 1.0;
};

/// Wilson score interval for a binomial proportion (95% by default).
inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054) {
  if (trials == 0) return {};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct EnsembleOptions {
  std::uint64_t runs = 200;
  std::vector<double> deltas{0.01, 0.02, 0.05, 0.1};
  unsigned threads = 1;

  static constexpr std::uint64_t kMinRuns = 30;

  void validate(double horizon) const {
    if (runs < kMinRuns) {
      throw std::invalid_argument("ensemble.runs = " + std::to_string(runs) + " below minimum " +
                                  std::to_string(kMinRuns));
    }
    if (deltas.empty()) throw std::invalid_argument("ensemble.deltas must not be empty");
    for (double d : deltas) {
      if (!(d >= 0.0) || !(d <= horizon)) {
        throw std::invalid_argument("ensemble.deltas entry " + format_double(d) + " outside [0, stepper.T]");
      }
    }
  }
};

struct RunOutcome {
  std::uint64_t run = 0;
  std::uint64_t seed = 0;
  StoppingEvent stop;
};

struct EnsembleResult {
  double threshold = 0.0;
  std::uint64_t runs = 0;
  std::vector<double> deltas;
  std::vector<std::uint64_t> survivors;
  std::vector<double> survival;
  std::vector<WilsonInterval> intervals;
  std::uint64_t divergences = 0;
  std::uint64_t threshold_stops = 0;
  std::vector<RunOutcome> outcomes;  ///< in run-index order

  /// rho_N as the survival test sees it: infinity when the run reached the horizon.
  static double stopping_time(const StoppingEvent& e) {
    return e.kind == StopKind::horizon ? std::numeric_limits<double>::infinity() : e.t_stop;
  }

  nlohmann::json to_json(const Provenance& prov) const {
    nlohmann::json j;
    j["schema_version"] = kExperimentSchema;
    j["experiment"] = "ensemble";
    j["provenance"] = prov.to_json();
    j["N"] = threshold;
    j["runs"] = runs;
    j["divergences"] = divergences;
    j["threshold_stops"] = threshold_stops;
    auto& rows = j["survival"] = nlohmann::json::array();
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      rows.push_back({{"delta", deltas[i]},
                      {"survivors", survivors[i]},
                      {"p_hat", survival[i]},
                      {"ci_lower", intervals[i].lower},
                      {"ci_upper", intervals[i].upper}});
    }
    auto& per_run = j["runs_detail"] = nlohmann::json::array();
    for (const auto& o : outcomes) {
      per_run.push_back({{"run", o.run},
                         {"seed", o.seed},
                         {"kind", to_string(o.stop.kind)},
                         {"t_stop", o.stop.t_stop},
                         {"E_N", detail::number_or_string(o.stop.energy)}});
    }
    return j;
  }
};

/// Folds per-run outcomes (already in run-index order) into survival estimates.
inline EnsembleResult summarize_ensemble(double threshold, const std::vector<double>& deltas,
                                         std::vector<RunOutcome> outcomes) {
  EnsembleResult r;
  r.threshold = threshold;
  r.runs = outcomes.size();
  r.deltas = deltas;
  for (double delta : deltas) {
    std::uint64_t alive = 0;
    for (const auto& o : outcomes) alive += EnsembleResult::stopping_time(o.stop) > delta ? 1 : 0;
    r.survivors.push_back(alive);
    r.survival.push_back(r.runs ? static_cast<double>(alive) / static_cast<double>(r.runs) : 1.0);
    r.intervals.push_back(wilson_interval(alive, r.runs));
  }
  for (const auto& o : outcomes) {
    if (o.stop.kind == StopKind::divergence) ++r.divergences;
    if (o.stop.kind == StopKind::threshold) ++r.threshold_stops;
  }
  r.outcomes = std::move(outcomes);
  return r;
}

/// Independent seeded runs of the same setup. Run r draws its noise from
/// derive_seed(master, noise, r); each run is integrated up to max(deltas)
/// since later behaviour cannot change any survival indicator.
inline EnsembleResult run_ensemble(const SimulationSetup& setup, const InitialData& init, const EnsembleOptions& options,
                                   std::uint64_t master_seed) {
  setup.validate();
  options.validate(setup.stepper.horizon);
  SimulationSetup local = setup;
  local.stepper.horizon = *std::max_element(options.deltas.begin(), options.deltas.end());
  local.stepper.record_noise = false;
  local.monitor.stop_at_threshold = true;

  std::vector<RunOutcome> outcomes(options.runs);
  detail::parallel_for(options.runs, options.threads, [&](std::uint64_t r) {
    const auto seed = derive_seed(master_seed, SeedStream::noise, r);
    Simulation sim(make_initial_state(local.grid, init, master_seed, r), local, seed);
    sim.run();
    outcomes[r] = RunOutcome{r, seed, sim.result().stop};
  });
  return summarize_ensemble(setup.monitor.threshold, options.deltas, std::move(outcomes));
}

/// Per-delta check that `candidate` survives at least as well as `base`:
/// either the point estimate does not drop or the Wilson intervals overlap.
inline std::vector<bool> survival_not_worse(const EnsembleResult& base, const EnsembleResult& candidate) {
  if (base.deltas != candidate.deltas) throw std::invalid_argument("survival_not_worse: delta grids differ");
  std::vector<bool> ok;
  for (std::size_t i = 0; i < base.deltas.size(); ++i) {
    const bool improved = candidate.survival[i] >= base.survival[i];
    const bool overlap = candidate.intervals[i].upper >= base.intervals[i].lower &&
                         base.intervals[i].upper >= candidate.intervals[i].lower;
    ok.push_back(improved || overlap);
  }
  return ok;
}

inline bool survival_nonincreasing(const EnsembleResult& r) {
  std::vector<std::size_t> order(r.deltas.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.deltas[a] < r.deltas[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (r.survival[order[i]] > r.survival[order[i - 1]]) return false;
  }
  return true;
}

// ---------------------------------------------------------------- refinement

struct RefinementOptions {
  std::vector<double> cutoffs{8, 16, 32};
  std::uint64_t paths = 20;
  unsigned threads = 1;
  double data_radius = 0.0;  ///< initial data cut to this ball; 0 means the finest cutoff

  void validate(const SpectralGrid& grid) const {
    if (cutoffs.size() < 2) throw std::invalid_argument("refine.cutoffs needs at least two entries");
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
      if (!(cutoffs[i] > 0.0)) throw std::invalid_argument("refine.cutoffs entries must be > 0");
      if (i > 0 && !(cutoffs[i] > cutoffs[i - 1])) throw std::invalid_argument("refine.cutoffs must be strictly increasing");
    }
    if (cutoffs.back() > grid.dealias_radius_limit() * (1.0 + 1e-12)) {
      throw std::invalid_argument("refine.cutoffs entry " + format_double(cutoffs.back()) +
                                  " exceeds the dealiased range of grid.M = " + std::to_string(grid.modes()));
    }
    if (paths < 1) throw std::invalid_argument("refine.paths must be >= 1");
    if (data_radius < 0.0 || data_radius > cutoffs.back()) {
      throw std::invalid_argument("refine.data_radius must lie in [0, largest cutoff]");
    }
  }
};

/// Differences between successive cutoffs over the comparison window.
struct RefinementPair {
  double n = 0.0;
  double m = 0.0;
  std::vector<double> sup_v;    ///< per path: sup_t ||v_n - v_m||_{L2}
  std::vector<double> sup_tau;  ///< per path: sup_t ||tau_n - tau_m||_{L2}
  std::vector<double> dissipation;  ///< per path: int ||grad(v_n - v_m)||^2 dt
  double mean_sup_v = 0.0;
  double mean_sup_tau = 0.0;
  double mean_dissipation = 0.0;
  double var_sup_v = 0.0;  ///< sample variance of sup_v across paths
};

struct RefinementResult {
  std::vector<double> cutoffs;
  std::vector<RefinementPair> pairs;
  std::vector<double> windows;  ///< per path: end of [0, min rho_N ^ T]
  std::vector<bool> shrunk;     ///< per path: window ended before T
  std::vector<double> ratios;   ///< mean_sup_v of pair i+1 over pair i
  double fitted_rate = 0.0;     ///< d -log(mean_sup_v) / d log(n)

  nlohmann::json to_json(const Provenance& prov) const {
    nlohmann::json j;
    j["schema_version"] = kExperimentSchema;
    j["experiment"] = "refine";
    j["provenance"] = prov.to_json();
    j["cutoffs"] = cutoffs;
    j["windows"] = windows;
    j["window_shrunk"] = shrunk;
    j["ratios"] = ratios;
    j["fitted_rate"] = detail::number_or_string(fitted_rate);
    auto& rows = j["pairs"] = nlohmann::json::array();
    for (const auto& p : pairs) {
      rows.push_back({{"n", p.n},
                      {"m", p.m},
                      {"mean_sup_v", p.mean_sup_v},
                      {"mean_sup_tau", p.mean_sup_tau},
                      {"mean_dissipation", p.mean_dissipation},
                      {"var_sup_v", p.var_sup_v},
                      {"sup_v", p.sup_v},
                      {"sup_tau", p.sup_tau},
                      {"dissipation", p.dissipation}});
    }
    return j;
  }
};

namespace detail {

struct PathDifferences {
  std::vector<double> sup_v, sup_tau, diss;
  double window = 0.0;
  bool shrunk = false;
};

/// One noise path driving every cutoff in lockstep with a shared increment.
inline PathDifferences refinement_path(const SimulationSetup& setup, const InitialData& init,
                                       const RefinementOptions& options, std::uint64_t master_seed,
                                       std::uint64_t path) {
  const auto& cutoffs = options.cutoffs;
  const std::size_t levels = cutoffs.size();
  const double data_radius = options.data_radius > 0.0 ? options.data_radius : cutoffs.back();
  const FlowState initial =
      make_initial_state(spectral::with_truncation(*setup.grid, data_radius), init, master_seed, path);

  std::vector<Stepper> steppers;
  std::vector<EnergyMonitor> monitors;
  for (double n : cutoffs) {
    const auto grid = spectral::with_truncation(*setup.grid, n);
    steppers.emplace_back(transfer_state(initial, grid), setup.params,
                          std::make_shared<const NoiseOperators>(grid, setup.noise), setup.stepper.dt);
    monitors.emplace_back(setup.monitor, setup.params, setup.stepper.dt);
  }

  PathDifferences out;
  out.sup_v.assign(levels - 1, 0.0);
  out.sup_tau.assign(levels - 1, 0.0);
  out.diss.assign(levels - 1, 0.0);
  std::vector<double> grad_prev(levels - 1, 0.0);

  // returns false when some level has crossed N or diverged at this sample
  auto sample = [&](bool first) {
    bool stopped = false;
    bool divergent = false;
    for (std::size_t i = 0; i < levels; ++i) {
      const auto& r = monitors[i].observe(steppers[i].state());
      if (const auto kind = classify(r, setup.monitor.threshold, setup.monitor.divergence_level)) {
        stopped = true;
        divergent = divergent || *kind == StopKind::divergence;
      }
    }
    if (divergent) return false;
    for (std::size_t i = 0; i + 1 < levels; ++i) {
      const auto& a = steppers[i].state();
      const auto& b = steppers[i + 1].state();
      out.sup_v[i] = std::max(out.sup_v[i], std::sqrt(hs_distance_squared(a.v, b.v, 0.0)));
      out.sup_tau[i] = std::max(out.sup_tau[i], std::sqrt(hs_distance_squared(a.tau, b.tau, 0.0)));
      if (!first) out.diss[i] += setup.stepper.dt * grad_prev[i];
      grad_prev[i] = gradient_distance_squared(a.v, b.v);
    }
    out.window = steppers[0].state().t;
    return !stopped;
  };

  NoiseSampler sampler(setup.noise, setup.stepper.dt, derive_seed(master_seed, SeedStream::noise, path));
  bool alive = sample(true);
  const auto steps = setup.stepper.steps();
  for (std::uint64_t k = 0; alive && k < steps; ++k) {
    const auto inc = sampler.next(k, steppers[0].state().t);
    for (auto& s : steppers) s.advance(inc);
    alive = sample(false);
  }
  out.shrunk = out.window < setup.stepper.actual_horizon();
  return out;
}

}  // namespace detail

/// Common-noise runs at increasing cutoffs on one discretization. Path p uses
/// noise seed derive_seed(master, noise, p) at every cutoff; the comparison
/// window for a path ends at the first threshold crossing of any cutoff.
inline RefinementResult refinement_study(const SimulationSetup& setup, const InitialData& init,
                                         const RefinementOptions& options, std::uint64_t master_seed) {
  setup.validate();
  init.validate();
  options.validate(*setup.grid);
  const std::size_t pairs = options.cutoffs.size() - 1;

  std::vector<detail::PathDifferences> per_path(options.paths);
  detail::parallel_for(options.paths, options.threads, [&](std::uint64_t p) {
    per_path[p] = detail::refinement_path(setup, init, options, master_seed, p);
  });

  RefinementResult r;
  r.cutoffs = options.cutoffs;
  const double count = static_cast<double>(options.paths);
  for (std::size_t i = 0; i < pairs; ++i) {
    RefinementPair pair;
    pair.n = options.cutoffs[i];
    pair.m = options.cutoffs[i + 1];
    for (const auto& d : per_path) {
      pair.sup_v.push_back(d.sup_v[i]);
      pair.sup_tau.push_back(d.sup_tau[i]);
      pair.dissipation.push_back(d.diss[i]);
    }
    pair.mean_sup_v = std::accumulate(pair.sup_v.begin(), pair.sup_v.end(), 0.0) / count;
    pair.mean_sup_tau = std::accumulate(pair.sup_tau.begin(), pair.sup_tau.end(), 0.0) / count;
    pair.mean_dissipation = std::accumulate(pair.dissipation.begin(), pair.dissipation.end(), 0.0) / count;
    if (options.paths > 1) {
      double acc = 0.0;
      for (double x : pair.sup_v) acc += (x - pair.mean_sup_v) * (x - pair.mean_sup_v);
      pair.var_sup_v = acc / (count - 1.0);
    }
    r.pairs.push_back(std::move(pair));
  }
  for (const auto& d : per_path) {
    r.windows.push_back(d.window);
    r.shrunk.push_back(d.shrunk);
  }
  std::vector<double> logn, logd;
  for (std::size_t i = 0; i < pairs; ++i) {
    if (i > 0) {
      const double prev = r.pairs[i - 1].mean_sup_v;
      r.ratios.push_back(prev > 0.0 ? r.pairs[i].mean_sup_v / prev : 0.0);
    }
    if (r.pairs[i].mean_sup_v > 0.0) {
      logn.push_back(std::log(r.pairs[i].n));
      logd.push_back(std::log(r.pairs[i].mean_sup_v));
    }
  }
  r.fitted_rate = -detail::fitted_slope(logn, logd);
  return r;
}

// ---------------------------------------------------------------- twin runs

struct TwinReport {
  double identical_max_difference = 0.0;     ///< same seed, same data
  double zero_perturbation_max_distance = 0.0;
  double perturbation = 0.0;
  double perturbed_max_distance = 0.0;
  double growth_rate = 0.0;  ///< fitted d log ||dv|| / dt
  double window = 0.0;
  std::vector<double> times;
  std::vector<double> distances;

  nlohmann::json to_json(const Provenance& prov) const {
    nlohmann::json j;
    j["schema_version"] = kExperimentSchema;
    j["experiment"] = "twin";
    j["provenance"] = prov.to_json();
    j["identical_max_difference"] = identical_max_difference;
    j["zero_perturbation_max_distance"] = zero_perturbation_max_distance;
    j["perturbation"] = perturbation;
    j["perturbed_max_distance"] = detail::number_or_string(perturbed_max_distance);
    j["growth_rate"] = detail::number_or_string(growth_rate);
    j["window"] = window;
    return j;
  }
};

/// Two same-seed runs, a zero-perturbation twin and a perturbed twin under
/// common noise. The perturbation is a random solenoidal field with L2 norm
/// `perturbation`. Stops early if the reference run crosses N.
inline TwinReport twin_uniqueness(const SimulationSetup& setup, const InitialData& init, std::uint64_t seed,
                                  double perturbation = 1e-6) {
  setup.validate();
  const auto grid = setup.grid;
  const FlowState base = make_initial_state(grid, init, seed);
  auto dv = spectral::random_solenoidal(grid, init.decay, derive_seed(seed, SeedStream::verification, 7));
  detail::normalize_l2(dv, perturbation);
  FlowState perturbed = base;
  perturbed.v += dv;
  perturbed = admissible_state(perturbed);
  FlowState zero = base;
  zero.v.add_scaled(0.0, dv);

  auto ops = std::make_shared<const NoiseOperators>(grid, setup.noise);
  const double dt = setup.stepper.dt;
  Stepper ref(base, setup.params, ops, dt), same(base, setup.params, ops, dt);
  Stepper zero_twin(zero, setup.params, ops, dt), pert_twin(perturbed, setup.params, ops, dt);
  const auto noise_seed = derive_seed(seed, SeedStream::noise, 0);
  NoiseSampler s1(setup.noise, dt, noise_seed), s2(setup.noise, dt, noise_seed);
  EnergyMonitor monitor(setup.monitor, setup.params, dt);

  TwinReport rep;
  rep.perturbation = perturbation;
  auto record = [&] {
    const auto& a = ref.state();
    auto dist = [&](const FlowState& b) { return std::sqrt(detail::hs_distance_squared(a.v, b.v, 0.0)); };
    const double identical = std::max(dist(same.state()), std::sqrt(detail::hs_distance_squared(a.tau, same.state().tau, 0.0)));
    rep.identical_max_difference = std::max(rep.identical_max_difference, identical);
    rep.zero_perturbation_max_distance = std::max(rep.zero_perturbation_max_distance, dist(zero_twin.state()));
    const double d = dist(pert_twin.state());
    rep.perturbed_max_distance = std::max(rep.perturbed_max_distance, d);
    rep.times.push_back(a.t);
    rep.distances.push_back(d);
    rep.window = a.t;
    return !classify(monitor.observe(a), setup.monitor.threshold, setup.monitor.divergence_level);
  };

  bool alive = record();
  for (std::uint64_t k = 0; alive && k < setup.stepper.steps(); ++k) {
    const auto inc = s1.next(k, ref.state().t);
    const auto inc2 = s2.next(k, same.state().t);
    ref.advance(inc);
    same.advance(inc2);
    zero_twin.advance(inc);
    pert_twin.advance(inc);
    alive = record();
  }
  std::vector<double> t, logd;
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    if (rep.distances[i] > 0.0 && std::isfinite(rep.distances[i])) {
      t.push_back(rep.times[i]);
      logd.push_back(std::log(rep.distances[i]));
    }
  }
  rep.growth_rate = detail::fitted_slope(t, logd);
  return rep;
}

// ---------------------------------------------------------------- inequality suite

struct SuiteCheck {
  std::string name;
  double worst = 0.0;      ///< largest observed violation measure
  double tolerance = 0.0;
  bool passed = true;
};

struct FittedConstant {
  std::string name;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;

  void add(double r) {
    min_ratio = std::min(min_ratio, r);
    max_ratio = std::max(max_ratio, r);
  }
};

struct SuiteOptions {
  int dim = 2;
  int modes = 64;
  double s = 2.0;
  std::uint64_t trials = 100;
  double tolerance = 1e-10;
  double leray_tolerance = 1e-12;

  static constexpr std::uint64_t kMinTrials = 100;

  void validate() const {
    if (trials < kMinTrials) {
      throw std::invalid_argument("verify.trials = " + std::to_string(trials) + " below minimum " +
                                  std::to_string(kMinTrials));
    }
    if (dim != 2 && dim != 3) throw std::invalid_argument("verify.dim must be 2 or 3");
    if (modes < 8) throw std::invalid_argument("verify.M must be >= 8");
    if (!(s > 0.0)) throw std::invalid_argument("verify.s must be > 0");
  }
};

struct SuiteReport {
  std::vector<SuiteCheck> checks;
  std::vector<FittedConstant> constants;
  std::uint64_t trials = 0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  const SuiteCheck& check(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return c;
    }
    throw std::out_of_range("no check named " + name);
  }

  nlohmann::json to_json(const Provenance& prov) const {
    nlohmann::json j;
    j["schema_version"] = kExperimentSchema;
    j["experiment"] = "verify";
    j["provenance"] = prov.to_json();
    j["trials"] = trials;
    j["passed"] = passed();
    auto& cs = j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
      cs.push_back({{"name", c.name}, {"worst", detail::number_or_string(c.worst)}, {"tolerance", c.tolerance},
                    {"passed", c.passed}});
    }
    auto& fc = j["fitted_constants"] = nlohmann::json::array();
    for (const auto& c : constants) {
      fc.push_back({{"name", c.name}, {"min", detail::number_or_string(c.min_ratio)},
                    {"max", detail::number_or_string(c.max_ratio)}});
    }
    return j;
  }
};

namespace detail {

inline double relative(double err, double scale) { return scale > 0.0 ? err / scale : err; }

template <class Kind>
double max_coefficient_difference(const spectral::Field<Kind>& a, const spectral::Field<Kind>& b) {
  double worst = 0.0;
  for (int c = 0; c < a.components(); ++c) {
    for (std::size_t m = 0; m < a.size(); ++m) worst = std::max(worst, std::abs(a.component(c)[m] - b.component(c)[m]));
  }
  return worst;
}

template <class Kind>
double max_coefficient(const spectral::Field<Kind>& a) {
  double worst = 0.0;
  for (int c = 0; c < a.components(); ++c) {
    for (const auto& z : a.component(c)) worst = std::max(worst, std::abs(z));
  }
  return worst;
}

/// Random vector field without the divergence-free constraint.
inline VectorField random_vector(const GridPtr& grid, double decay, std::uint64_t seed) {
  VectorField out(grid);
  for (int c = 0; c < grid->dim(); ++c) {
    const auto comp = spectral::random_scalar(grid, decay, splitmix64(seed + static_cast<std::uint64_t>(c)));
    std::copy(comp.component(0).begin(), comp.component(0).end(), out.component(c).begin());
  }
  return out;
}

}  // namespace detail

/// Randomized verification of the exact spectral identities (asserted at
/// `tolerance`, relative) plus fitted constants for the constant-bearing
/// inequalities (reported only, except for their scale invariance).
inline SuiteReport inequality_suite(std::uint64_t seed, const SuiteOptions& options = {}) {
  using namespace spectral;
  options.validate();
  const double s = options.s;
  const double tol = options.tolerance;
  const auto coarse = make_grid(options.dim, options.modes, kTwoPi, 1.0);
  const auto grid = with_truncation(*coarse, coarse->dealias_radius_limit());
  const int kmax = grid->max_retained_index();

  SuiteCheck leray{"leray_divergence", 0.0, options.leray_tolerance};
  SuiteCheck leray_idem{"leray_idempotence", 0.0, tol};
  SuiteCheck skew{"advection_skew_symmetry", 0.0, tol};
  SuiteCheck coupling{"coupling_cancellation", 0.0, tol};
  SuiteCheck contraction{"truncation_contraction", 0.0, tol};
  SuiteCheck idempotence{"truncation_idempotence", 0.0, 0.0};
  SuiteCheck composition{"truncation_composition", 0.0, 0.0};
  SuiteCheck decay{"truncation_decay", 0.0, tol};
  SuiteCheck interpolation{"interpolation", 0.0, tol};
  SuiteCheck bilinear{"commutator_bilinearity", 0.0, tol};
  SuiteCheck homogeneous{"commutator_homogeneity", 0.0, tol};
  SuiteCheck kp_stable{"kato_ponce_scale_invariance", 0.0, 2.0};
  SuiteCheck tame_stable{"tame_scale_invariance", 0.0, 2.0};

  FittedConstant kato_ponce{"kato_ponce"}, transport{"transport_commutator"}, algebra{"algebra"}, tame{"tame"};

  std::mt19937_64 rng(derive_seed(seed, SeedStream::verification));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::uint64_t trial = 0; trial < options.trials; ++trial) {
    const auto base = derive_seed(seed, SeedStream::verification, trial + 1);
    const double alpha = 1.0 + 3.0 * unit(rng);
    const auto f = random_solenoidal(grid, alpha, splitmix64(base ^ 1));
    const auto g = random_solenoidal(grid, alpha, splitmix64(base ^ 2));
    const auto tau = random_symmetric(grid, alpha, splitmix64(base ^ 3));
    const auto fs = random_scalar(grid, alpha, splitmix64(base ^ 4));
    const auto gs = random_scalar(grid, alpha, splitmix64(base ^ 5));
    const auto w = oldroyd::detail::random_vector(grid, alpha, splitmix64(base ^ 6));

    // Leray projection
    const auto pw = leray_project(w);
    leray.worst = std::max(leray.worst, divergence_defect(pw));
    leray_idem.worst = std::max(leray_idem.worst,
                                oldroyd::detail::relative(oldroyd::detail::max_coefficient_difference(leray_project(pw), pw),
                                                 oldroyd::detail::max_coefficient(pw)));

    // ((f.grad) J^s g, J^s g) = 0
    const auto jg = bessel_potential(g, s);
    const double skew_scale = hs_norm(f, 0.0) * hs_norm(gradient(jg), 0.0) * hs_norm(jg, 0.0);
    skew.worst = std::max(skew.worst, oldroyd::detail::relative(std::abs(hs_inner(advect(f, jg), jg, 0.0)), skew_scale));

    // (div tau, v) + (D(v), tau) = 0
    const double c = hs_inner(divergence(tau), f, 0.0) + hs_inner(deformation(f), tau, 0.0);
    coupling.worst = std::max(coupling.worst,
                              oldroyd::detail::relative(std::abs(c), hs_norm(tau, 0.0) * hs_norm(gradient(f), 0.0)));

    // truncation
    const double n1 = 1.0 + (kmax - 1) * unit(rng);
    const double n2 = 1.0 + (kmax - 1) * unit(rng);
    const auto t1 = truncate(fs, n1);
    contraction.worst = std::max(contraction.worst, oldroyd::detail::relative(hs_norm(t1, s) - hs_norm(fs, s), hs_norm(fs, s)));
    idempotence.worst = std::max(idempotence.worst, oldroyd::detail::max_coefficient_difference(truncate(t1, n1), t1));
    composition.worst = std::max(composition.worst, oldroyd::detail::max_coefficient_difference(truncate(truncate(fs, n2), n1),
                                                                                       truncate(fs, std::min(n1, n2))));
    for (int k : {1, 2}) {
      const double lhs = hs_norm(fs - t1, s);
      const double rhs = std::pow(1.0 / n1, k) * hs_norm(fs, s + k);
      decay.worst = std::max(decay.worst, oldroyd::detail::relative(lhs - rhs, rhs));
    }

    // ||f||_{s'} <= ||f||_0^{1 - s'/s} ||f||_s^{s'/s}
    const double sp = s * unit(rng);
    const double theta = sp / s;
    const double interp_rhs = std::pow(hs_norm(fs, 0.0), 1.0 - theta) * std::pow(hs_norm(fs, s), theta);
    interpolation.worst = std::max(interpolation.worst, oldroyd::detail::relative(hs_norm(fs, sp) - interp_rhs, interp_rhs));

    // commutators are bilinear and homogeneous
    const double lambda = 0.5 + 2.0 * unit(rng);
    const auto gs2 = random_scalar(grid, alpha, splitmix64(base ^ 7));
    {
      auto sum = fs;
      sum.add_scaled(lambda, gs2);
      auto expected = bessel_commutator(fs, gs, s);
      expected.add_scaled(lambda, bessel_commutator(gs2, gs, s));
      const auto got = bessel_commutator(sum, gs, s);
      bilinear.worst = std::max(bilinear.worst, oldroyd::detail::relative(oldroyd::detail::max_coefficient_difference(got, expected),
                                                                 oldroyd::detail::max_coefficient(expected)));
      auto scaled_g = gs;
      scaled_g *= lambda;
      auto expected_h = bessel_commutator(fs, gs, s);
      expected_h *= lambda;
      homogeneous.worst = std::max(
          homogeneous.worst, oldroyd::detail::relative(oldroyd::detail::max_coefficient_difference(bessel_commutator(fs, scaled_g, s), expected_h),
                                              oldroyd::detail::max_coefficient(expected_h)));
    }
    {
      auto fl = f;
      fl *= lambda;
      auto expected = transport_commutator(f, g, s);
      expected *= lambda;
      homogeneous.worst = std::max(
          homogeneous.worst, oldroyd::detail::relative(oldroyd::detail::max_coefficient_difference(transport_commutator(fl, g, s), expected),
                                              oldroyd::detail::max_coefficient(expected)));
      auto f2 = random_solenoidal(grid, alpha, splitmix64(base ^ 8));
      auto sum = f;
      sum.add_scaled(lambda, f2);
      auto lin = transport_commutator(f, g, s);
      lin.add_scaled(lambda, transport_commutator(f2, g, s));
      bilinear.worst = std::max(bilinear.worst,
                                oldroyd::detail::relative(oldroyd::detail::max_coefficient_difference(transport_commutator(sum, g, s), lin),
                                                 oldroyd::detail::max_coefficient(lin)));
    }

    // fitted constants; scale invariance across amplitudes 0.1 .. 10
    auto kp_ratio = [&](const ScalarField& a, const ScalarField& b) {
      const double num = hs_norm(bessel_commutator(a, b, s), 0.0);
      const double den = linf_norm(gradient(a)) * hs_norm(b, s - 1.0) + hs_norm(a, s) * linf_norm(b);
      return num / den;
    };
    auto tame_ratio = [&](const TensorField& t, const VectorField& v) {
      const auto gv = gradient(v);
      const double num = hs_norm(q_form(t, v, 0.5), s);
      const double den = linf_norm(t) * hs_norm(gv, s) + linf_norm(gv) * hs_norm(t, s);
      return num / den;
    };
    double kp_lo = std::numeric_limits<double>::infinity(), kp_hi = 0.0;
    double tame_lo = kp_lo, tame_hi = 0.0;
    for (double amp : {0.1, 1.0, 10.0}) {
      auto a = fs, b = gs;
      a *= amp;
      b *= 1.0 / std::sqrt(amp);
      const double r = kp_ratio(a, b);
      kato_ponce.add(r);
      kp_lo = std::min(kp_lo, r);
      kp_hi = std::max(kp_hi, r);
      auto t = tau;
      auto v = f;
      t *= amp;
      v *= amp;
      const double q = tame_ratio(t, v);
      tame.add(q);
      tame_lo = std::min(tame_lo, q);
      tame_hi = std::max(tame_hi, q);
    }
    kp_stable.worst = std::max(kp_stable.worst, kp_hi / kp_lo);
    tame_stable.worst = std::max(tame_stable.worst, tame_hi / tame_lo);

    {
      const auto gradf = gradient(f);
      const auto gradg = gradient(g);
      const double num = hs_norm(transport_commutator(f, g, s), 0.0);
      const double den = linf_norm(gradf) * hs_norm(g, s) + hs_norm(f, s) * linf_norm(gradg);
      transport.add(num / den);
    }
    algebra.add(hs_norm(dealiased_product(fs, gs), s) / (hs_norm(fs, s) * hs_norm(gs, s)));
  }

  SuiteReport report;
  report.trials = options.trials;
  for (auto* c : {&leray, &leray_idem, &skew, &coupling, &contraction, &idempotence, &composition, &decay,
                  &interpolation, &bilinear, &homogeneous, &kp_stable, &tame_stable}) {
    c->passed = c->worst <= c->tolerance;
    report.checks.push_back(*c);
  }
  report.constants = {kato_ponce, transport, algebra, tame};
  return report;
}

}  // namespace oldroyd
