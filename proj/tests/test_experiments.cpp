#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "oldroyd/experiments.hpp"

namespace {

using namespace oldroyd;
using namespace oldroyd::spectral;

SimulationSetup desk_setup(const GridPtr& grid, double dt, double horizon) {
  SimulationSetup s;
  s.grid = grid;
  s.stepper.dt = dt;
  s.stepper.horizon = horizon;
  s.params = {0.1, 0.0, 0.0, 1.0, 1.0, true};
  s.monitor.threshold = 50.0;
  s.monitor.s = 1.0;
  return s;
}

SimulationSetup noisy(SimulationSetup s) {
  s.noise.wiener = {1.0, 6};
  s.noise.sigma = {0.5, 0.3};
  s.noise.stress.scale = 0.2;
  s.noise.jumps.rate = 10.0;
  s.noise.jumps.gamma0 = 0.1;
  return s;
}

RunOutcome outcome(std::uint64_t run, StopKind kind, double t) { return RunOutcome{run, run, {kind, t, 0.0, 0}}; }

TEST(Wilson, KnownValues) {
  const auto half = wilson_interval(50, 100);
  EXPECT_NEAR(half.lower, 0.40383, 1e-5);
  EXPECT_NEAR(half.upper, 0.59617, 1e-5);
  const auto none = wilson_interval(0, 30);
  EXPECT_EQ(none.lower, 0.0);
  EXPECT_NEAR(none.upper, 3.841459 / 33.841459, 1e-6);
  const auto all = wilson_interval(30, 30);
  EXPECT_NEAR(all.lower, 1.0 - none.upper, 1e-12);
  EXPECT_NEAR(all.upper, 1.0, 1e-15);
}

TEST(Ensemble, SummaryCountsAndMonotonicity) {
  std::vector<RunOutcome> runs;
  for (std::uint64_t r = 0; r < 40; ++r) {
    if (r % 4 == 0) runs.push_back(outcome(r, StopKind::threshold, 0.01 * static_cast<double>(r % 8 + 1)));
    else if (r == 5) runs.push_back(outcome(r, StopKind::divergence, 0.03));
    else runs.push_back(outcome(r, StopKind::horizon, 0.1));
  }
  const auto res = summarize_ensemble(10.0, {0.0, 0.01, 0.03, 0.05, 0.1}, runs);
  EXPECT_EQ(res.runs, 40u);
  EXPECT_EQ(res.divergences, 1u);
  EXPECT_EQ(res.threshold_stops, 10u);
  EXPECT_EQ(res.survivors[0], 40u);
  // stops at 0.01 (r%8==0) are not > 0.01
  EXPECT_EQ(res.survivors[1], 35u);
  EXPECT_EQ(res.survivors[2], 34u);
  EXPECT_EQ(res.survivors[3], 29u);
  EXPECT_EQ(res.survivors[4], 29u);
  EXPECT_TRUE(survival_nonincreasing(res));
  for (std::size_t i = 0; i < res.deltas.size(); ++i) {
    EXPECT_LE(res.intervals[i].lower, res.survival[i]);
    EXPECT_GE(res.intervals[i].upper, res.survival[i]);
  }
}

TEST(Ensemble, ZeroDataZeroNoiseAlwaysSurvives) {
  const auto grid = make_grid(2, 16, kTwoPi, 5);
  auto setup = desk_setup(grid, 1e-2, 0.1);
  setup.monitor.threshold = 1e-12;
  InitialData zero{0.0, 0.0};
  EnsembleOptions opt;
  opt.runs = 30;
  opt.deltas = {0.0, 0.05, 0.1};
  const auto res = run_ensemble(setup, zero, opt, 11);
  for (double p : res.survival) EXPECT_EQ(p, 1.0);
  EXPECT_EQ(res.divergences, 0u);
}

TEST(Ensemble, RejectsTooFewRunsAndBadDeltas) {
  const auto grid = make_grid(2, 16, kTwoPi, 5);
  const auto setup = desk_setup(grid, 1e-2, 0.1);
  EnsembleOptions opt;
  opt.runs = 10;
  EXPECT_THROW(run_ensemble(setup, {}, opt, 1), std::invalid_argument);
  opt.runs = 30;
  opt.deltas = {0.2};
  EXPECT_THROW(run_ensemble(setup, {}, opt, 1), std::invalid_argument);
}

TEST(Ensemble, IndependentOfThreadCount) {
  const auto grid = make_grid(2, 16, kTwoPi, 5);
  auto setup = noisy(desk_setup(grid, 1e-2, 0.1));
  setup.monitor.threshold = 2.0;
  InitialData init{1.0, 1.0, 2.0, true};
  EnsembleOptions opt;
  opt.runs = 32;
  opt.deltas = {0.02, 0.05, 0.1};
  opt.threads = 1;
  const auto serial = run_ensemble(setup, init, opt, 99);
  opt.threads = 4;
  const auto parallel = run_ensemble(setup, init, opt, 99);
  ASSERT_EQ(serial.outcomes.size(), parallel.outcomes.size());
  for (std::size_t r = 0; r < serial.outcomes.size(); ++r) {
    EXPECT_EQ(serial.outcomes[r].seed, parallel.outcomes[r].seed);
    EXPECT_EQ(serial.outcomes[r].stop, parallel.outcomes[r].stop);
  }
  EXPECT_EQ(serial.survival, parallel.survival);
  EXPECT_EQ(serial.to_json({1, 99}).dump(), parallel.to_json({1, 99}).dump());
  EXPECT_TRUE(survival_nonincreasing(serial));
}

TEST(Ensemble, PairedComparison) {
  EnsembleResult base = summarize_ensemble(1.0, {0.1}, {});
  base.runs = 100;
  base.survival = {0.5};
  base.intervals = {wilson_interval(50, 100)};
  EnsembleResult better = base;
  better.survival = {0.6};
  better.intervals = {wilson_interval(60, 100)};
  EnsembleResult much_worse = base;
  much_worse.survival = {0.1};
  much_worse.intervals = {wilson_interval(10, 100)};
  EXPECT_TRUE(survival_not_worse(base, better)[0]);
  EXPECT_TRUE(survival_not_worse(better, base)[0]);
  EXPECT_FALSE(survival_not_worse(base, much_worse)[0]);
}

TEST(InitialData, AmplitudeIsL2Norm) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  const auto s = make_initial_state(grid, {0.7, 0.3, 3.0, false}, 5);
  EXPECT_NEAR(hs_norm(s.v, 0.0), 0.7, 1e-14);
  EXPECT_NEAR(hs_norm(s.tau, 0.0), 0.3, 1e-14);
  EXPECT_LT(divergence_defect(s.v), 1e-14);
  EXPECT_EQ(symmetry_defect(s.tau), 0.0);
  const auto again = make_initial_state(grid, {0.7, 0.3, 3.0, false}, 5, 17);
  EXPECT_TRUE(s.v == again.v);
  const auto fresh = make_initial_state(grid, {0.7, 0.3, 3.0, true}, 5, 17);
  EXPECT_FALSE(s.v == fresh.v);
  const auto zero = make_initial_state(grid, {0.0, 0.0}, 5);
  EXPECT_EQ(hs_norm(zero.v, 0.0), 0.0);
}

TEST(Refinement, StokesWithLowModeDataIsExactlyZero) {
  const auto grid = make_grid(2, 48, kTwoPi, 16);
  auto setup = desk_setup(grid, 1e-2, 0.2);
  setup.params.nonlinear = false;
  setup.monitor.threshold = 1e300;
  RefinementOptions opt;
  opt.cutoffs = {4, 8, 16};
  opt.paths = 3;
  opt.data_radius = 4;
  const auto res = refinement_study(setup, {1.0, 1.0, 2.0}, opt, 3);
  for (const auto& p : res.pairs) {
    for (double x : p.sup_v) EXPECT_EQ(x, 0.0);
    for (double x : p.sup_tau) EXPECT_EQ(x, 0.0);
    for (double x : p.dissipation) EXPECT_EQ(x, 0.0);
  }
  for (bool s : res.shrunk) EXPECT_FALSE(s);
}

TEST(Refinement, DifferencesShrinkWithCutoff) {
  const auto grid = make_grid(2, 48, kTwoPi, 16);
  auto setup = noisy(desk_setup(grid, 2e-3, 0.05));
  setup.monitor.threshold = 1e6;
  RefinementOptions opt;
  opt.cutoffs = {4, 8, 16};
  opt.paths = 3;
  const auto res = refinement_study(setup, {1.0, 1.0, 5.0}, opt, 4);
  ASSERT_EQ(res.pairs.size(), 2u);
  ASSERT_EQ(res.ratios.size(), 1u);
  EXPECT_GT(res.pairs[0].mean_sup_v, 0.0);
  EXPECT_LT(res.ratios[0], 0.75);
  EXPECT_GT(res.fitted_rate, 0.0);
  for (const auto& p : res.pairs) {
    for (double x : p.dissipation) EXPECT_GE(x, 0.0);
    EXPECT_EQ(p.sup_v.size(), 3u);
  }
  const auto j = res.to_json({0, 4});
  EXPECT_EQ(j.at("schema_version"), kExperimentSchema);
  EXPECT_EQ(j.at("pairs").size(), 2u);
}

TEST(Refinement, WindowShrinksWhenARunStops) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  auto setup = noisy(desk_setup(grid, 1e-2, 0.5));
  setup.monitor.threshold = 1.0;
  RefinementOptions opt;
  opt.cutoffs = {4, 8};
  opt.paths = 2;
  const auto res = refinement_study(setup, {2.0, 2.0, 3.0}, opt, 5);
  for (std::size_t p = 0; p < res.windows.size(); ++p) {
    EXPECT_TRUE(res.shrunk[p]);
    EXPECT_LT(res.windows[p], 0.5);
  }
}

TEST(Refinement, RejectsBadCutoffs) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  const auto setup = desk_setup(grid, 1e-2, 0.1);
  RefinementOptions opt;
  opt.cutoffs = {8, 4};
  EXPECT_THROW(refinement_study(setup, {}, opt, 1), std::invalid_argument);
  opt.cutoffs = {4, 16};
  EXPECT_THROW(refinement_study(setup, {}, opt, 1), std::invalid_argument);
}

TEST(Twin, IdenticalAndPerturbedRuns) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  auto setup = noisy(desk_setup(grid, 1e-3, 0.1));
  setup.monitor.threshold = 1e6;
  const auto rep = twin_uniqueness(setup, {0.5, 0.5, 3.0}, 21, 1e-6);
  EXPECT_EQ(rep.identical_max_difference, 0.0);
  EXPECT_EQ(rep.zero_perturbation_max_distance, 0.0);
  EXPECT_NEAR(rep.distances.front(), 1e-6, 1e-12);
  EXPECT_LT(rep.perturbed_max_distance, 1e-2);
  EXPECT_TRUE(std::isfinite(rep.growth_rate));
  EXPECT_NEAR(rep.window, 0.1, 1e-12);
}

TEST(InequalitySuite, PassesAndReportsConstants) {
  SuiteOptions opt;
  opt.modes = 32;
  const auto rep = inequality_suite(2024, opt);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << " worst " << c.worst;
  EXPECT_TRUE(rep.passed());
  EXPECT_LT(rep.check("leray_divergence").worst, 1e-12);
  EXPECT_EQ(rep.check("truncation_idempotence").worst, 0.0);
  EXPECT_EQ(rep.check("truncation_composition").worst, 0.0);
  for (const auto& c : rep.constants) {
    EXPECT_TRUE(std::isfinite(c.max_ratio)) << c.name;
    EXPECT_GT(c.min_ratio, 0.0) << c.name;
  }
  EXPECT_EQ(rep.to_json({}).at("checks").size(), rep.checks.size());
}

TEST(InequalitySuite, RejectsTooFewTrials) {
  SuiteOptions opt;
  opt.trials = 99;
  EXPECT_THROW(inequality_suite(1, opt), std::invalid_argument);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(oldroyd::detail::parallel_for(10, 3,
                                    [](std::uint64_t i) {
                                      if (i == 7) throw std::runtime_error("boom");
                                    }),
               std::runtime_error);
}

}  // namespace
