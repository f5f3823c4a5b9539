#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "oldroyd/fft.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/spectral_grid.hpp"

namespace oldroyd::spectral {

/// Bessel-potential weight (1 + |xi|^2)^s.
inline double bessel_weight(double xi2, double s) {
  if (s == 0.0) return 1.0;
  if (s == 1.0) return 1.0 + xi2;
  if (s == 2.0) return (1.0 + xi2) * (1.0 + xi2);
  return std::pow(1.0 + xi2, s);
}

/// H^s inner product sum_xi (1+|xi|^2)^s Re(f(xi) conj g(xi)), summed over
/// components. With s = 0 this is the mean of f.g over the box.
template <class Kind>
double hs_inner(const Field<Kind>& f, const Field<Kind>& g, double s) {
  check_same_grid(f.grid(), g.grid());
  const auto& grid = f.grid();
  std::vector<double> w(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) w[m] = bessel_weight(grid.xi_squared(m), s);
  double acc = 0.0;
  for (int c = 0; c < f.components(); ++c) {
    const auto a = f.component(c);
    const auto b = g.component(c);
    for (std::size_t m = 0; m < a.size(); ++m) {
      acc += w[m] * (a[m].real() * b[m].real() + a[m].imag() * b[m].imag());
    }
  }
  return acc;
}

template <class Kind>
double hs_norm_squared(const Field<Kind>& f, double s) {
  const auto& grid = f.grid();
  double acc = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    double mode = 0.0;
    for (int c = 0; c < f.components(); ++c) mode += std::norm(f.component(c)[m]);
    if (mode != 0.0) acc += bessel_weight(grid.xi_squared(m), s) * mode;
  }
  return acc;
}

template <class Kind>
double hs_norm(const Field<Kind>& f, double s) {
  return std::sqrt(hs_norm_squared(f, s));
}

/// Generic Fourier multiplier: out(xi) = symbol(m) * f(xi), all components.
template <class Kind, class Symbol>
Field<Kind> apply_multiplier(const Field<Kind>& f, Symbol&& symbol) {
  Field<Kind> out = f;
  for (int c = 0; c < out.components(); ++c) {
    auto data = out.component(c);
    for (std::size_t m = 0; m < data.size(); ++m) data[m] *= symbol(m);
  }
  return out;
}

/// J^s f, the multiplier (1 + |xi|^2)^{s/2}.
template <class Kind>
Field<Kind> bessel_potential(const Field<Kind>& f, double s) {
  const auto& grid = f.grid();
  return apply_multiplier(f, [&](std::size_t m) { return bessel_weight(grid.xi_squared(m), 0.5 * s); });
}

/// Fourier truncation onto the closed ball |xi| <= n.
template <class Kind>
Field<Kind> truncate(const Field<Kind>& f, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("truncate: radius must be positive");
  Field<Kind> out = f;
  const auto& grid = f.grid();
  for (int c = 0; c < out.components(); ++c) {
    auto data = out.component(c);
    for (std::size_t m = 0; m < data.size(); ++m) {
      if (!grid.in_ball(m, n)) data[m] = Complex{};
    }
  }
  return out;
}

/// Truncation at the grid's own cutoff radius.
template <class Kind>
Field<Kind> truncate(const Field<Kind>& f) {
  return truncate(f, f.grid().truncation_radius());
}

/// True if every nonzero coefficient lies in the ball |xi| <= n.
template <class Kind>
bool supported_in_ball(const Field<Kind>& f, double n) {
  const auto& grid = f.grid();
  for (int c = 0; c < f.components(); ++c) {
    const auto data = f.component(c);
    for (std::size_t m = 0; m < data.size(); ++m) {
      if (data[m] != Complex{} && !grid.in_ball(m, n)) return false;
    }
  }
  return true;
}

inline VectorField gradient(const ScalarField& f) {
  VectorField out(f.grid_ptr());
  const auto& grid = f.grid();
  const auto src = f.component(0);
  for (int j = 0; j < grid.dim(); ++j) {
    auto dst = out.component(j);
    for (std::size_t m = 0; m < grid.size(); ++m) dst[m] = Complex(0.0, grid.xi(m, j)) * src[m];
  }
  return out;
}

/// (grad v)_{ij} = d_j v_i.
inline TensorField gradient(const VectorField& v) {
  TensorField out(v.grid_ptr());
  const auto& grid = v.grid();
  const int d = grid.dim();
  for (int i = 0; i < d; ++i) {
    const auto src = v.component(i);
    for (int j = 0; j < d; ++j) {
      auto dst = out(i, j);
      for (std::size_t m = 0; m < grid.size(); ++m) dst[m] = Complex(0.0, grid.xi(m, j)) * src[m];
    }
  }
  return out;
}

inline ScalarField divergence(const VectorField& v) {
  ScalarField out(v.grid_ptr());
  const auto& grid = v.grid();
  auto dst = out.component(0);
  for (int j = 0; j < grid.dim(); ++j) {
    const auto src = v.component(j);
    for (std::size_t m = 0; m < grid.size(); ++m) dst[m] += Complex(0.0, grid.xi(m, j)) * src[m];
  }
  return out;
}

/// Row-wise divergence (div tau)_i = sum_j d_j tau_{ij}.
inline VectorField divergence(const TensorField& t) {
  VectorField out(t.grid_ptr());
  const auto& grid = t.grid();
  const int d = grid.dim();
  for (int i = 0; i < d; ++i) {
    auto dst = out.component(i);
    for (int j = 0; j < d; ++j) {
      const auto src = t(i, j);
      for (std::size_t m = 0; m < grid.size(); ++m) dst[m] += Complex(0.0, grid.xi(m, j)) * src[m];
    }
  }
  return out;
}

template <class Kind>
Field<Kind> laplacian(const Field<Kind>& f) {
  const auto& grid = f.grid();
  return apply_multiplier(f, [&](std::size_t m) { return -grid.xi_squared(m); });
}

/// Leray projection v -> (I - xi xi^T / |xi|^2) v per mode; the mean mode is
/// left unchanged.
inline VectorField leray_project(const VectorField& v) {
  VectorField out = v;
  const auto& grid = v.grid();
  const int d = grid.dim();
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const double k2 = grid.xi_squared(m);
    if (k2 == 0.0) continue;
    Complex dot{};
    for (int j = 0; j < d; ++j) dot += grid.xi(m, j) * v.component(j)[m];
    if (dot == Complex{}) continue;
    const Complex factor = dot / k2;
    for (int j = 0; j < d; ++j) out.component(j)[m] -= grid.xi(m, j) * factor;
  }
  return out;
}

/// max over modes of |xi . v(xi)| / (|xi| |v(xi)|); zero for a solenoidal field.
inline double divergence_defect(const VectorField& v) {
  const auto& grid = v.grid();
  double worst = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const double k2 = grid.xi_squared(m);
    if (k2 == 0.0) continue;
    Complex dot{};
    double amp2 = 0.0;
    for (int j = 0; j < grid.dim(); ++j) {
      dot += grid.xi(m, j) * v.component(j)[m];
      amp2 += std::norm(v.component(j)[m]);
    }
    if (amp2 == 0.0) continue;
    worst = std::max(worst, std::abs(dot) / std::sqrt(k2 * amp2));
  }
  return worst;
}

/// ||tau - tau^T||_{L2} / ||tau||_{L2}; zero for the zero tensor.
inline double symmetry_defect(const TensorField& t) {
  const double norm = hs_norm(t, 0.0);
  if (norm == 0.0) return 0.0;
  return hs_norm(t - transpose(t), 0.0) / norm;
}

/// Zeroes every mode outside the 2/3-rule box.
template <class Kind>
Field<Kind> dealias(const Field<Kind>& f) {
  const auto& grid = f.grid();
  return apply_multiplier(f, [&](std::size_t m) { return grid.dealiased(m) ? 1.0 : 0.0; });
}

namespace detail {

template <class... Fields>
bool all_hermitian(const Fields&... fields) {
  return (is_hermitian(fields) && ...);
}

}  // namespace detail

/// Pointwise product f g evaluated on the grid and dealiased by the 2/3 rule.
inline ScalarField dealiased_product(const ScalarField& f, const ScalarField& g) {
  check_same_grid(f.grid(), g.grid());
  const auto& grid = f.grid();
  auto pf = to_physical(grid, f.component(0));
  const auto pg = to_physical(grid, g.component(0));
  for (std::size_t x = 0; x < pf.size(); ++x) pf[x] *= pg[x];
  ScalarField out(f.grid_ptr());
  from_physical(grid, pf, out.component(0), detail::all_hermitian(f, g));
  return out;
}

/// Scalar-times-field product, componentwise, dealiased.
template <class Kind>
Field<Kind> dealiased_product(const ScalarField& f, const Field<Kind>& g) {
  check_same_grid(f.grid(), g.grid());
  const auto& grid = f.grid();
  const auto pf = to_physical(grid, f.component(0));
  const bool real = detail::all_hermitian(f, g);
  Field<Kind> out(g.grid_ptr());
  PhysicalArray work(grid.size());
  for (int c = 0; c < g.components(); ++c) {
    backward_transform(grid, g.component(c), work);
    for (std::size_t x = 0; x < work.size(); ++x) work[x] *= pf[x];
    from_physical(grid, work, out.component(c), real);
  }
  if constexpr (Kind::rank == 2) {
    if (g.symmetric()) mirror_upper_triangle(out);
  }
  return out;
}

/// Pointwise matrix product (A B)_{ij} = sum_k A_{ik} B_{kj}, dealiased.
inline TensorField matrix_product(const TensorField& a, const TensorField& b) {
  check_same_grid(a.grid(), b.grid());
  const auto& grid = a.grid();
  const int d = grid.dim();
  const auto pa = to_physical(a);
  const auto pb = to_physical(b);
  const bool real = detail::all_hermitian(a, b);
  TensorField out(a.grid_ptr());
  PhysicalArray work(grid.size());
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      std::fill(work.begin(), work.end(), Complex{});
      for (int k = 0; k < d; ++k) {
        const auto& x = pa[static_cast<std::size_t>(i * d + k)];
        const auto& y = pb[static_cast<std::size_t>(k * d + j)];
        for (std::size_t p = 0; p < work.size(); ++p) work[p] += x[p] * y[p];
      }
      from_physical(grid, work, out(i, j), real);
    }
  }
  return out;
}

/// (a ⊗ b)_{ij} = a_i b_j, dealiased.
inline TensorField outer_product(const VectorField& a, const VectorField& b) {
  check_same_grid(a.grid(), b.grid());
  const auto& grid = a.grid();
  const int d = grid.dim();
  const auto pa = to_physical(a);
  const auto pb = to_physical(b);
  const bool real = detail::all_hermitian(a, b);
  TensorField out(a.grid_ptr());
  PhysicalArray work(grid.size());
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const auto& x = pa[static_cast<std::size_t>(i)];
      const auto& y = pb[static_cast<std::size_t>(j)];
      for (std::size_t p = 0; p < work.size(); ++p) work[p] = x[p] * y[p];
      from_physical(grid, work, out(i, j), real);
    }
  }
  return out;
}

/// Transport term (v . grad) u applied componentwise, dealiased.
template <class Kind>
Field<Kind> advect(const VectorField& v, const Field<Kind>& u) {
  check_same_grid(v.grid(), u.grid());
  const auto& grid = v.grid();
  const int d = grid.dim();
  const auto pv = to_physical(v);
  const bool real = detail::all_hermitian(v, u);
  Field<Kind> out(u.grid_ptr());
  PhysicalArray deriv(grid.size());
  PhysicalArray spectral(grid.size());
  PhysicalArray acc(grid.size());
  const int ncomp = u.components();
  for (int c = 0; c < ncomp; ++c) {
    if constexpr (Kind::rank == 2) {
      // symmetric input: only the upper triangle is computed
      const int i = c / d;
      const int j = c % d;
      if (u.symmetric() && j < i) continue;
    }
    std::fill(acc.begin(), acc.end(), Complex{});
    const auto src = u.component(c);
    for (int j = 0; j < d; ++j) {
      for (std::size_t m = 0; m < grid.size(); ++m) spectral[m] = Complex(0.0, grid.xi(m, j)) * src[m];
      backward_transform(grid, spectral, deriv);
      const auto& vj = pv[static_cast<std::size_t>(j)];
      for (std::size_t x = 0; x < acc.size(); ++x) acc[x] += vj[x] * deriv[x];
    }
    from_physical(grid, acc, out.component(c), real);
  }
  if constexpr (Kind::rank == 2) {
    if (u.symmetric()) mirror_upper_triangle(out);
  }
  return out;
}

/// max over grid points of the pointwise Euclidean (Frobenius) magnitude.
template <class Kind>
double linf_norm(const Field<Kind>& f) {
  const auto phys = to_physical(f);
  double worst = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    double acc = 0.0;
    for (const auto& comp : phys) acc += std::norm(comp[x]);
    worst = std::max(worst, acc);
  }
  return std::sqrt(worst);
}

/// Root-mean-square over grid points, the physical-space counterpart of
/// hs_norm(f, 0).
template <class Kind>
double physical_rms(const Field<Kind>& f) {
  const auto phys = to_physical(f);
  double acc = 0.0;
  for (const auto& comp : phys) {
    for (const auto& x : comp) acc += std::norm(x);
  }
  return std::sqrt(acc / static_cast<double>(f.size()));
}

}  // namespace oldroyd::spectral

namespace oldroyd::spectral {

/// Kato-Ponce commutator J^s(f g) - f J^s g for scalar fields.
inline ScalarField bessel_commutator(const ScalarField& f, const ScalarField& g, double s) {
  return bessel_potential(dealiased_product(f, g), s) - dealiased_product(f, bessel_potential(g, s));
}

/// Transport commutator J^s[(f.grad) g] - (f.grad) J^s g for vector fields.
inline VectorField transport_commutator(const VectorField& f, const VectorField& g, double s) {
  return bessel_potential(advect(f, g), s) - advect(f, bessel_potential(g, s));
}

}  // namespace oldroyd::spectral
