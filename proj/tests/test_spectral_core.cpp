#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oldroyd/random_field.hpp"
#include "oldroyd/spectral_ops.hpp"
#include "test_support.hpp"

namespace {

using namespace oldroyd::spectral;
using oldroyd::testing::direct_synthesis;
using oldroyd::testing::max_abs_difference;
using oldroyd::testing::set_real_mode;

TEST(Grid, AcceptsDefaultDesktopGrid) {
  const auto grid = make_grid(2, 64, kTwoPi, 16);
  EXPECT_EQ(grid->max_retained_index(), 21);
  EXPECT_EQ(grid->size(), 64u * 64u);
  EXPECT_NEAR(grid->dealias_radius_limit(), 21.3333333333, 1e-9);
}

TEST(Grid, RejectsInvalidConfigurations) {
  EXPECT_THROW(make_grid(2, 7, kTwoPi, 2), std::invalid_argument);
  EXPECT_THROW(make_grid(3, 32, kTwoPi, 20), std::invalid_argument);
  EXPECT_THROW(make_grid(2, 32, 0.0, 2), std::invalid_argument);
  EXPECT_THROW(make_grid(2, 32, -1.0, 2), std::invalid_argument);
  EXPECT_THROW(make_grid(4, 32, kTwoPi, 2), std::invalid_argument);
  EXPECT_THROW(make_grid(2, 6, kTwoPi, 1), std::invalid_argument);
}

TEST(Grid, RadiusAtExactDealiasLimitIsAccepted) {
  // 2/3 * 48 = 32 exactly in real arithmetic; rounding must not reject it.
  const auto grid = make_grid(2, 96, kTwoPi, 32);
  EXPECT_EQ(grid->max_retained_index(), 32);
}

TEST(Grid, WavevectorsAndMirror) {
  const auto grid = make_grid(2, 8, 2.0 * kTwoPi, 1.0);
  const auto m = grid->flat_index({3, -2, 0});
  EXPECT_EQ(grid->index(m)[0], 3);
  EXPECT_EQ(grid->index(m)[1], -2);
  EXPECT_DOUBLE_EQ(grid->xi(m, 0), 1.5);
  EXPECT_DOUBLE_EQ(grid->xi(m, 1), -1.0);
  const auto p = grid->mirror(m);
  EXPECT_EQ(grid->index(p)[0], -3);
  EXPECT_EQ(grid->index(p)[1], 2);
  const auto nyq = grid->flat_index({-4, 0, 0});
  EXPECT_EQ(grid->mirror(nyq), nyq);
}

TEST(HsNorm, MeanModeHasUnitNormForEveryOrder) {
  const auto grid = make_grid(2, 16, kTwoPi, 4);
  ScalarField f(grid);
  f.component(0)[0] = 1.0;
  for (double s : {-1.5, 0.0, 0.5, 2.0, 3.7}) EXPECT_DOUBLE_EQ(hs_norm(f, s), 1.0);
}

TEST(HsNorm, SingleModeMultiplier) {
  const auto grid = make_grid(3, 8, kTwoPi, 2);
  ScalarField f(grid);
  f.component(0)[grid->flat_index({1, 1, 1})] = 1.0;
  EXPECT_DOUBLE_EQ(hs_norm(f, 2.0), 4.0);
  EXPECT_DOUBLE_EQ(hs_norm(f, 1.0), 2.0);
}

TEST(HsNorm, PlancherelAgainstDirectQuadrature) {
  const auto grid = make_grid(2, 16, kTwoPi, 5);
  const auto f = random_scalar(grid, 1.0, 7);
  const auto values = direct_synthesis(*grid, f.component(0));
  double acc = 0.0;
  for (const auto& x : values) acc += std::norm(x);
  const double rms = std::sqrt(acc / static_cast<double>(values.size()));
  EXPECT_NEAR(hs_norm(f, 0.0), rms, 1e-12 * rms);

  const auto v = random_solenoidal(grid, 1.0, 8);
  EXPECT_NEAR(hs_norm(v, 0.0), physical_rms(v), 1e-12 * physical_rms(v));
  const auto t = random_symmetric(grid, 1.0, 9);
  EXPECT_NEAR(hs_norm(t, 0.0), physical_rms(t), 1e-12 * physical_rms(t));
}

TEST(HsNorm, InnerProductMatchesPolarization) {
  const auto grid = make_grid(2, 32, kTwoPi, 8);
  const auto f = random_scalar(grid, 1.5, 1);
  const auto g = random_scalar(grid, 1.5, 2);
  for (double s : {0.0, 1.0, 2.5}) {
    const double polar = 0.25 * (hs_norm_squared(f + g, s) - hs_norm_squared(f - g, s));
    EXPECT_NEAR(hs_inner(f, g, s), polar, 1e-12 * hs_norm(f, s) * hs_norm(g, s));
  }
}

TEST(HsNorm, RejectsGridMismatch) {
  const auto a = make_grid(2, 16, kTwoPi, 4);
  const auto b = make_grid(2, 32, kTwoPi, 4);
  EXPECT_THROW(hs_inner(ScalarField(a), ScalarField(b), 0.0), std::invalid_argument);
}

TEST(Truncation, IdentityInsideBallAndZeroOutside) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  const auto f = random_scalar(grid, 1.0, 3);  // supported in |xi| <= 10
  EXPECT_TRUE(truncate(f, 10.0) == f);

  ScalarField g(grid);
  set_real_mode(g, 0, {5, 0, 0}, 1.0);  // |xi| = n + 1 for n = 4
  EXPECT_EQ(hs_norm(truncate(g, 4.0), 0.0), 0.0);
  // boundary mode of the closed ball is kept
  EXPECT_EQ(hs_norm(truncate(g, 5.0), 0.0), hs_norm(g, 0.0));
}

TEST(Truncation, ExactAlgebraicProperties) {
  const auto grid = make_grid(2, 64, kTwoPi, 21);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = random_scalar(grid, 1.2, seed);
    for (double n : {3.0, 7.5, 12.0}) {
      EXPECT_TRUE(truncate(truncate(f, n), n) == truncate(f, n));
      for (double m : {5.0, 16.0}) {
        EXPECT_TRUE(truncate(truncate(f, n), m) == truncate(f, std::min(n, m)));
      }
      for (double s : {0.0, 1.0, 2.0}) EXPECT_LE(hs_norm(truncate(f, n), s), hs_norm(f, s));
    }
  }
}

TEST(Truncation, DifferenceDecayWithUnitConstant) {
  const auto grid = make_grid(2, 64, kTwoPi, 21);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = random_scalar(grid, 1.0, 100 + seed);
    for (int k : {1, 2}) {
      for (double s : {0.0, 1.0}) {
        const double n = 4.0, m = 11.0;
        const double lhs = hs_norm(truncate(f, n) - truncate(f, m), s);
        const double rhs = std::max(std::pow(1.0 / n, k), std::pow(1.0 / m, k)) * hs_norm(f, s + k);
        EXPECT_LE(lhs, rhs);
      }
    }
  }
}

TEST(Interpolation, UnitConstantHolderOnSpectrum) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = random_scalar(grid, 0.5 + 0.02 * static_cast<double>(seed), seed);
    for (auto [sp, s] : {std::pair{0.5, 2.0}, std::pair{1.0, 3.0}, std::pair{1.7, 1.9}}) {
      const double lhs = hs_norm(f, sp);
      const double rhs = std::pow(hs_norm(f, 0.0), 1.0 - sp / s) * std::pow(hs_norm(f, s), sp / s);
      EXPECT_LE(lhs, rhs * (1.0 + 1e-13));
    }
  }
}

TEST(Derivatives, ConstantFieldHasZeroGradient) {
  const auto grid = make_grid(2, 16, kTwoPi, 4);
  ScalarField c(grid);
  c.component(0)[0] = 3.5;
  EXPECT_EQ(hs_norm(gradient(c), 0.0), 0.0);
  VectorField v(grid);
  v.component(0)[0] = 1.0;
  v.component(1)[0] = -2.0;
  EXPECT_EQ(hs_norm(gradient(v), 0.0), 0.0);
}

TEST(Derivatives, TransverseModeIsDivergenceFree) {
  const auto grid = make_grid(2, 32, kTwoPi, 6);
  VectorField v(grid);
  // xi0 = (2, 1), amplitude direction (-1, 2)
  set_real_mode(v, 0, {2, 1, 0}, Complex(-1.0, 0.5));
  set_real_mode(v, 1, {2, 1, 0}, Complex(2.0, -1.0));
  EXPECT_EQ(hs_norm(divergence(v), 0.0), 0.0);
}

TEST(Derivatives, DoubleDivergenceOfSingleModeTensor) {
  const auto grid = make_grid(2, 32, kTwoPi, 6);
  TensorField t(grid);
  const ModeIndex k{2, -3, 0};
  const Complex a(1.0, 0.2), b(-0.4, 0.7), c(0.3, -1.1);
  set_real_mode(t, 0, k, a);
  set_real_mode(t, 1, k, b);
  set_real_mode(t, 2, k, b);
  set_real_mode(t, 3, k, c);
  const auto dd = divergence(divergence(t));
  // -xi^T tau xi at xi = (2, -3)
  const Complex expected = -(4.0 * a + 2.0 * (2.0 * -3.0) * b + 9.0 * c);
  const auto m = grid->flat_index(k);
  EXPECT_NEAR(std::abs(dd.component(0)[m] - expected), 0.0, 1e-13);
}

TEST(Leray, FixedPointsKernelAndProjection) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  const auto v = random_solenoidal(grid, 1.0, 11);
  EXPECT_LE(max_abs_difference(leray_project(v), v), 1e-14);

  const auto phi = random_scalar(grid, 1.0, 12);
  const auto g = gradient(phi);
  EXPECT_LE(hs_norm(leray_project(g), 0.0), 1e-14 * hs_norm(g, 0.0));

  VectorField w(grid);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t m = 0; m < grid->size(); ++m) w.component(c)[m] = Complex(n01(rng), n01(rng));
  }
  const auto pw = leray_project(w);
  EXPECT_LE(divergence_defect(pw), 1e-12);
  EXPECT_LE(max_abs_difference(leray_project(pw), pw), 1e-12 * hs_norm(w, 0.0));
  EXPECT_LE(hs_norm(pw, 0.0), hs_norm(w, 0.0));
}

TEST(Leray, SelfAdjointInL2) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  const auto a = random_solenoidal(grid, 1.0, 1) + gradient(random_scalar(grid, 2.0, 2));
  const auto b = random_solenoidal(grid, 1.0, 3) + gradient(random_scalar(grid, 2.0, 4));
  const double lhs = hs_inner(leray_project(a), b, 0.0);
  const double rhs = hs_inner(a, leray_project(b), 0.0);
  EXPECT_NEAR(lhs, rhs, 1e-12 * hs_norm(a, 0.0) * hs_norm(b, 0.0));
}

TEST(Products, MultiplicationByOne) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  ScalarField one(grid);
  one.component(0)[0] = 1.0;
  const auto g = random_scalar(grid, 1.0, 21);
  EXPECT_LE(max_abs_difference(dealiased_product(one, g), g), 1e-15);
}

TEST(Products, ConvolutionOfTwoModes) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  ScalarField f(grid), g(grid);
  f.component(0)[grid->flat_index({3, -1, 0})] = Complex(2.0, 1.0);
  g.component(0)[grid->flat_index({4, 5, 0})] = Complex(0.5, -1.0);
  const auto fg = dealiased_product(f, g);
  const auto m = grid->flat_index({7, 4, 0});
  EXPECT_NEAR(std::abs(fg.component(0)[m] - Complex(2.0, 1.0) * Complex(0.5, -1.0)), 0.0, 1e-14);
  EXPECT_NEAR(hs_norm(fg, 0.0), std::abs(Complex(2.0, 1.0) * Complex(0.5, -1.0)), 1e-14);
}

TEST(Products, ModesBeyondDealiasBoxAreRemoved) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  ScalarField f(grid);
  f.component(0)[grid->flat_index({8, 0, 0})] = 1.0;
  const auto ff = dealiased_product(f, f);  // lands on k = 16 > 10
  EXPECT_EQ(hs_norm(ff, 0.0), 0.0);
}

TEST(Products, AdvectionSkewSymmetry) {
  const auto grid = make_grid(2, 64, kTwoPi, 21);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = random_solenoidal(grid, 1.0, seed);
    const auto g = random_solenoidal(grid, 1.0, 1000 + seed);
    for (double s : {0.0, 1.5}) {
      const auto jg = bessel_potential(g, s);
      const double val = hs_inner(advect(f, jg), jg, 0.0);
      const double scale = linf_norm(f) * hs_norm(gradient(jg), 0.0) * hs_norm(jg, 0.0);
      EXPECT_LE(std::abs(val), 1e-10 * scale);
    }
  }
}

TEST(Products, AdvectionEqualsDivergenceOfOuterProduct) {
  const auto grid = make_grid(2, 64, kTwoPi, 21);
  const auto f = random_solenoidal(grid, 1.0, 1);
  const auto g = random_solenoidal(grid, 1.0, 2);
  // (f.grad) g = div(g ⊗ f) with the row-wise divergence
  const auto lhs = advect(f, g);
  const auto rhs = divergence(outer_product(g, f));
  EXPECT_LE(hs_norm(lhs - rhs, 0.0), 1e-12 * hs_norm(lhs, 0.0));
}

TEST(Hermitian, PreservedByEveryOperation) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  const auto f = random_scalar(grid, 1.0, 1);
  const auto v = random_solenoidal(grid, 1.0, 2);
  const auto t = random_symmetric(grid, 1.0, 3);
  EXPECT_TRUE(is_hermitian(f));
  EXPECT_TRUE(is_hermitian(v));
  EXPECT_TRUE(is_hermitian(t));
  EXPECT_TRUE(is_hermitian(gradient(f)));
  EXPECT_TRUE(is_hermitian(gradient(v)));
  EXPECT_TRUE(is_hermitian(divergence(t)));
  EXPECT_TRUE(is_hermitian(leray_project(v + gradient(f))));
  EXPECT_TRUE(is_hermitian(truncate(v, 4.0)));
  EXPECT_TRUE(is_hermitian(bessel_potential(t, 1.3)));
  EXPECT_TRUE(is_hermitian(dealiased_product(f, f)));
  EXPECT_TRUE(is_hermitian(dealiased_product(f, t)));
  EXPECT_TRUE(is_hermitian(advect(v, t)));
  EXPECT_TRUE(is_hermitian(matrix_product(t, t)));
  EXPECT_TRUE(is_hermitian(outer_product(v, v)));
}

TEST(Symmetry, FlagDescribesDataExactly) {
  const auto grid = make_grid(2, 32, kTwoPi, 10);
  const auto t = random_symmetric(grid, 1.0, 5);
  EXPECT_TRUE(t.symmetric());
  EXPECT_EQ(symmetry_defect(t), 0.0);
  const auto v = random_solenoidal(grid, 1.0, 6);
  const auto adv = advect(v, t);
  EXPECT_TRUE(adv.symmetric());
  EXPECT_EQ(symmetry_defect(adv), 0.0);
}

TEST(RandomField, DeterministicAndResolutionStable) {
  const auto g32 = make_grid(2, 32, kTwoPi, 10);
  const auto g64 = make_grid(2, 64, kTwoPi, 10);
  EXPECT_TRUE(random_scalar(g32, 8.0, 42) == random_scalar(g32, 8.0, 42));
  EXPECT_FALSE(random_scalar(g32, 8.0, 42) == random_scalar(g32, 8.0, 43));
  for (double s : {0.0, 1.0, 3.0}) {
    const double a = hs_norm(random_scalar(g32, 8.0, 42), s);
    const double b = hs_norm(random_scalar(g64, 8.0, 42), s);
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_NEAR(a, b, 1e-14 * a);
    const double va = hs_norm(random_solenoidal(g32, 8.0, 42), s);
    const double vb = hs_norm(random_solenoidal(g64, 8.0, 42), s);
    EXPECT_NEAR(va, vb, 1e-14 * va);
  }
}

TEST(RandomField, SolenoidalKindSatisfiesInvariant) {
  const auto grid = make_grid(3, 16, kTwoPi, 5);
  const auto v = random_solenoidal(grid, 2.0, 9);
  EXPECT_GT(hs_norm(v, 0.0), 0.0);
  EXPECT_LE(divergence_defect(v), 1e-12);
  EXPECT_TRUE(supported_in_ball(v, 5.0));
}

TEST(Commutator, KatoPonceLeftSideIsBilinear) {
  const auto grid = make_grid(2, 64, kTwoPi, 21);
  const auto f = random_scalar(grid, 2.0, 1);
  const auto g = random_scalar(grid, 2.0, 2);
  const double s = 1.5;
  const auto base = bessel_commutator(f, g, s);
  for (double lambda : {0.1, 3.0, 10.0}) {
    const auto scaled_f = bessel_commutator(lambda * f, g, s);
    const auto scaled_g = bessel_commutator(f, lambda * g, s);
    EXPECT_LE(hs_norm(scaled_f - lambda * base, 0.0), 1e-13 * lambda * hs_norm(base, 0.0));
    EXPECT_LE(hs_norm(scaled_g - lambda * base, 0.0), 1e-13 * lambda * hs_norm(base, 0.0));
  }
}

}  // namespace
