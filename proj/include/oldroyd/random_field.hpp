#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "oldroyd/field.hpp"
#include "oldroyd/seeding.hpp"
#include "oldroyd/spectral_ops.hpp"

namespace oldroyd::spectral {

enum class RandomFieldKind { scalar, divergence_free_vector, symmetric_tensor };

namespace detail {

/// Coefficient drawn from a generator seeded by (seed, k, component) only, so
/// the same seed yields the same coefficient on every grid containing k.
inline Complex random_coefficient(std::uint64_t seed, const ModeIndex& k, int component,
                                  double amplitude, bool self_conjugate) {
  std::uint64_t h = splitmix64(seed);
  for (int a = 0; a < 3; ++a) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(k[a])));
  h = splitmix64(h ^ static_cast<std::uint64_t>(component));
  std::mt19937_64 rng(h);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  const double theta = phase(rng);
  if (self_conjugate) return Complex(amplitude * std::cos(theta), 0.0);
  return std::polar(amplitude, theta);
}

template <class Kind>
void fill_random(Field<Kind>& f, double decay, std::uint64_t seed, bool skip_mean,
                 bool upper_triangle_only) {
  const auto& grid = f.grid();
  const int d = grid.dim();
  const double radius = grid.truncation_radius();
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const std::size_t p = grid.mirror(m);
    if (p < m) continue;
    if (!grid.in_ball(m, radius) || !grid.dealiased(m)) continue;
    if (skip_mean && grid.xi_squared(m) == 0.0) continue;
    const double amp = std::pow(1.0 + grid.xi_squared(m), -0.5 * decay);
    for (int c = 0; c < f.components(); ++c) {
      if (upper_triangle_only && (c % d) < (c / d)) continue;
      const Complex z = random_coefficient(seed, grid.index(m), c, amp, p == m);
      f.component(c)[m] = z;
      f.component(c)[p] = std::conj(z);
    }
  }
}

}  // namespace detail

/// Random real field with |f(xi)| proportional to (1+|xi|^2)^{-decay/2} and
/// uniformly random phases, supported in the grid's truncation ball.
/// Vector fields are Leray-projected and mean-free; tensors are symmetric.
template <class Kind>
Field<Kind> random_field(const GridPtr& grid, double decay, std::uint64_t seed) {
  Field<Kind> f(grid);
  if constexpr (Kind::rank == 0) {
    detail::fill_random(f, decay, seed, false, false);
  } else if constexpr (Kind::rank == 1) {
    detail::fill_random(f, decay, seed, true, false);
    f = leray_project(f);
  } else {
    detail::fill_random(f, decay, seed, false, true);
    mirror_upper_triangle(f);
  }
  return f;
}

inline ScalarField random_scalar(const GridPtr& grid, double decay, std::uint64_t seed) {
  return random_field<ScalarKind>(grid, decay, seed);
}
inline VectorField random_solenoidal(const GridPtr& grid, double decay, std::uint64_t seed) {
  return random_field<VectorKind>(grid, decay, seed);
}
inline TensorField random_symmetric(const GridPtr& grid, double decay, std::uint64_t seed) {
  return random_field<TensorKind>(grid, decay, seed);
}

}  // namespace oldroyd::spectral
