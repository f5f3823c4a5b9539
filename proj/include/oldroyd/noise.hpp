#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oldroyd/field.hpp"
#include "oldroyd/fft.hpp"
#include "oldroyd/seeding.hpp"
#include "oldroyd/spectral_ops.hpp"

namespace oldroyd {

using spectral::Complex;
using spectral::GridPtr;
using spectral::ModeIndex;
using spectral::ScalarField;
using spectral::SpectralGrid;
using spectral::TensorField;
using spectral::VectorField;

/// Q-Wiener velocity noise W1 = sum_j sqrt(lambda_j) beta_j e_j with
/// lambda_j = lambda0 / j^2, j = 1..count.
struct WienerQConfig {
  double lambda0 = 0.0;
  int count = 8;

  double eigenvalue(int j) const { return lambda0 / (static_cast<double>(j) * j); }

  double trace() const {
    double acc = 0.0;
    for (int j = 1; j <= count; ++j) acc += eigenvalue(j);
    return acc;
  }

  /// Bound on the omitted tail sum_{j > count} lambda_j <= lambda0 / count.
  double tail_bound() const { return lambda0 / count; }

  void validate() const {
    if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw std::invalid_argument("noise.lambda0 must be >= 0");
    if (count < 1) throw std::invalid_argument("noise.count must be >= 1");
  }
};

/// sigma(t, v) e_j = c0 psi_j + c1 P(phi_j v): affine in v.
struct SigmaInstance {
  double c0 = 0.0;
  double c1 = 0.0;
};

enum class StressNoiseProfile { identity, bump };

/// Stress noise coefficient h: either scale * I, or a periodic Gaussian bump
/// of the given width (centred in the box) times scale * matrix.
struct StressNoiseConfig {
  StressNoiseProfile profile = StressNoiseProfile::identity;
  double scale = 0.0;
  std::array<double, 9> matrix{1, 0, 0, 0, 1, 0, 0, 0, 1};
  double width = 1.0;
  /// Reject any h that is not a multiple of the identity; this keeps tau exactly symmetric.
  bool identity_only = false;

  void validate() const {
    if (!std::isfinite(scale)) throw std::invalid_argument("noise.h_scale must be finite");
    if (profile == StressNoiseProfile::bump && !(width > 0.0)) {
      throw std::invalid_argument("noise.h_width must be positive");
    }
    if (identity_only && profile != StressNoiseProfile::identity) {
      throw std::invalid_argument("noise.h_kind must be identity when noise.h_identity_only is set");
    }
  }
};

enum class JumpProfile { constant, linear };

/// Compound-Poisson velocity jumps G(v, z) = gamma(z) (kappa * v) with marks
/// uniform on [z_min, z_max], total rate `rate`, gamma(z) = gamma0 (constant)
/// or gamma0 z (linear), and kappa(xi) = 1 / (1 + smoothing^2 |xi|^2).
struct JumpConfig {
  double rate = 0.0;
  double gamma0 = 0.0;
  double z_min = 0.0;
  double z_max = 1.0;
  JumpProfile profile = JumpProfile::linear;
  double smoothing = 1.0;

  double gamma(double z) const { return profile == JumpProfile::constant ? gamma0 : gamma0 * z; }

  /// Integral of gamma against the normalized mark density.
  double mean_gamma() const {
    if (profile == JumpProfile::constant) return gamma0;
    return gamma0 * 0.5 * (z_min + z_max);
  }

  double mean_gamma_squared() const {
    if (profile == JumpProfile::constant) return gamma0 * gamma0;
    return gamma0 * gamma0 * (z_min * z_min + z_min * z_max + z_max * z_max) / 3.0;
  }

  /// Compensator coefficient: int_Z gamma(z) lambda(dz).
  double compensator_coefficient() const { return rate * mean_gamma(); }

  double kernel(double xi2) const { return 1.0 / (1.0 + smoothing * smoothing * xi2); }

  void validate() const {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::invalid_argument("noise.jump_rate must be >= 0");
    if (!std::isfinite(gamma0)) throw std::invalid_argument("noise.gamma0 must be finite");
    if (!(z_min < z_max)) throw std::invalid_argument("noise.z_min must be < noise.z_max");
    if (!(smoothing >= 0.0)) throw std::invalid_argument("noise.smoothing must be >= 0");
  }
};

struct NoiseConfig {
  WienerQConfig wiener;
  SigmaInstance sigma;
  StressNoiseConfig stress;
  JumpConfig jumps;

  void validate() const {
    wiener.validate();
    stress.validate();
    jumps.validate();
  }
};

/// Real Fourier basis function sqrt(2) cos(k.x) or sqrt(2) sin(k.x) with
/// unit mean square.
struct BasisFunction {
  ModeIndex k{0, 0, 0};
  bool sine = false;
};

/// The first `count` basis functions: nonzero integer wavevectors in the
/// half-space (first nonzero entry positive), ordered by |k|^2 then
/// lexicographically, each contributing cos then sin. The list depends on
/// dimension only, never on the grid resolution.
inline std::vector<BasisFunction> noise_basis(int dim, int count) {
  std::vector<ModeIndex> half;
  for (int radius = 1; static_cast<int>(2 * half.size()) < count; ++radius) {
    half.clear();
    const int z_lo = dim == 3 ? -radius : 0;
    const int z_hi = dim == 3 ? radius : 0;
    for (int a = -radius; a <= radius; ++a) {
      for (int b = -radius; b <= radius; ++b) {
        for (int c = z_lo; c <= z_hi; ++c) {
          const ModeIndex k{a, b, c};
          const int first = a != 0 ? a : (b != 0 ? b : c);
          if (first <= 0) continue;
          if (a * a + b * b + c * c > radius * radius) continue;
          half.push_back(k);
        }
      }
    }
  }
  std::sort(half.begin(), half.end(), [](const ModeIndex& x, const ModeIndex& y) {
    const int nx = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    const int ny = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    if (nx != ny) return nx < ny;
    return x < y;
  });
  std::vector<BasisFunction> out;
  for (const auto& k : half) {
    if (static_cast<int>(out.size()) == count) break;
    out.push_back({k, false});
    if (static_cast<int>(out.size()) == count) break;
    out.push_back({k, true});
  }
  return out;
}

/// FNV-1a over the basis description; stored in noise paths to reject
/// replays under a different basis.
inline std::uint64_t basis_signature(int dim, int count) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::int64_t value) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= static_cast<std::uint64_t>(value >> (8 * byte)) & 0xFFULL;
      h *= 1099511628211ULL;
    }
  };
  mix(dim);
  mix(count);
  for (const auto& b : noise_basis(dim, count)) {
    mix(b.k[0]);
    mix(b.k[1]);
    mix(b.k[2]);
    mix(b.sine ? 1 : 0);
  }
  return h;
}

struct JumpEvent {
  double time = 0.0;
  double mark = 0.0;
  bool operator==(const JumpEvent&) const = default;
};

/// All random draws for one time step, indexed by noise-basis j (not by
/// spatial mode), so the same record drives any spatial cutoff.
struct NoiseIncrement {
  std::uint64_t step = 0;
  std::vector<double> dw1;
  double dw2 = 0.0;
  std::vector<JumpEvent> jumps;
  bool operator==(const NoiseIncrement&) const = default;
};

/// Independent N(0, dt) draws for each basis coefficient.
inline std::vector<double> sample_w1_increment(const WienerQConfig& config, double dt, std::mt19937_64& rng,
                                               std::normal_distribution<double>& normal) {
  if (dt < 0.0) throw std::invalid_argument("sample_w1_increment: dt must be >= 0");
  std::vector<double> dw(static_cast<std::size_t>(config.count), 0.0);
  if (dt == 0.0) return dw;
  const double sd = std::sqrt(dt);
  for (auto& x : dw) x = sd * normal(rng);
  return dw;
}

/// Jump times uniform on (t0, t0 + dt], sorted; marks i.i.d. uniform on Z.
inline std::vector<JumpEvent> sample_jumps(const JumpConfig& config, double t0, double dt, std::mt19937_64& rng) {
  std::vector<JumpEvent> out;
  const double mean = config.rate * dt;
  if (!(mean > 0.0)) return out;
  std::poisson_distribution<int> count(mean);
  const int n = count(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = unit(rng);
    const double z = config.z_min + (config.z_max - config.z_min) * unit(rng);
    out.push_back({t0 + dt * (1.0 - u), z});
  }
  std::sort(out.begin(), out.end(), [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  return out;
}

/// Owns the random state of one simulation.
class NoiseSampler {
 public:
  NoiseSampler(const NoiseConfig& config, double dt, std::uint64_t seed)
      : config_(config), dt_(dt), rng_(seed) {
    if (!(dt > 0.0)) throw std::invalid_argument("NoiseSampler: dt must be positive");
  }

  NoiseIncrement next(std::uint64_t step, double t0) {
    NoiseIncrement inc;
    inc.step = step;
    inc.dw1 = sample_w1_increment(config_.wiener, dt_, rng_, normal_);
    inc.dw2 = std::sqrt(dt_) * normal_(rng_);
    inc.jumps = sample_jumps(config_.jumps, t0, dt_, rng_);
    return inc;
  }

  double dt() const { return dt_; }

  /// Text snapshot of engine and distribution state.
  std::string save_state() const {
    std::ostringstream os;
    os << rng_ << ' ' << normal_;
    return os.str();
  }

  void load_state(const std::string& state) {
    std::istringstream is(state);
    is >> rng_ >> normal_;
    if (!is) throw std::runtime_error("NoiseSampler: corrupt RNG state");
  }

 private:
  NoiseConfig config_;
  double dt_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Noise coefficients bound to one grid: basis fields, the stress coefficient
/// h and the jump kernel. Every velocity output is Leray-projected and
/// truncated to the grid's ball, mirroring J_n sigma dW and J_n G.
class NoiseOperators {
 public:
  NoiseOperators(GridPtr grid, NoiseConfig config) : grid_(std::move(grid)), config_(config) {
    config_.validate();
    build_basis();
    build_stress_coefficient();
  }

  const NoiseConfig& config() const { return config_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int basis_size() const { return static_cast<int>(phi_.size()); }
  const ScalarField& multiplier_profile(int j) const { return phi_[static_cast<std::size_t>(j)]; }
  const VectorField& additive_profile(int j) const { return psi_[static_cast<std::size_t>(j)]; }

  /// Sum_j sqrt(lambda_j) dW_j e_j as a scalar field.
  ScalarField assemble_w1(std::span<const double> dw) const {
    check_increment(dw);
    ScalarField out(grid_);
    for (int j = 0; j < basis_size(); ++j) {
      out.add_scaled(std::sqrt(config_.wiener.eigenvalue(j + 1)) * dw[static_cast<std::size_t>(j)], phi_[j]);
    }
    return out;
  }

  /// J_n P [ sum_j sqrt(lambda_j) dW_j (c0 psi_j + c1 phi_j v) ].
  VectorField apply_sigma(const VectorField& v, std::span<const double> dw) const {
    check_increment(dw);
    VectorField acc(grid_);
    if (config_.sigma.c0 != 0.0) {
      for (int j = 0; j < basis_size(); ++j) {
        const double w = std::sqrt(config_.wiener.eigenvalue(j + 1)) * dw[static_cast<std::size_t>(j)];
        acc.add_scaled(config_.sigma.c0 * w, psi_[j]);
      }
    }
    if (config_.sigma.c1 != 0.0) acc += linear_part_unprojected(v, dw);
    return spectral::truncate(spectral::leray_project(acc), grid_->truncation_radius());
  }

  /// The v-dependent part J_n P [ c1 sum_j sqrt(lambda_j) dW_j phi_j v ].
  VectorField apply_sigma_linear(const VectorField& v, std::span<const double> dw) const {
    check_increment(dw);
    if (config_.sigma.c1 == 0.0) return VectorField(grid_);
    return spectral::truncate(spectral::leray_project(linear_part_unprojected(v, dw)),
                              grid_->truncation_radius());
  }

  /// J_n sigma(t, v) e_j for one basis index (without sqrt(lambda_j)).
  VectorField sigma_column(const VectorField& v, int j) const {
    VectorField out(grid_);
    out.add_scaled(config_.sigma.c0, psi_[static_cast<std::size_t>(j)]);
    if (config_.sigma.c1 != 0.0) {
      out.add_scaled(config_.sigma.c1, spectral::dealiased_product(phi_[static_cast<std::size_t>(j)], v));
    }
    return spectral::truncate(spectral::leray_project(out), grid_->truncation_radius());
  }

  /// ||sigma(t, v)||^2 in L_Q(L2, H^s): sum_j lambda_j ||sigma(v) e_j||^2_{H^s}.
  double sigma_hs_squared(const VectorField& v, double s) const {
    double acc = 0.0;
    for (int j = 0; j < basis_size(); ++j) {
      acc += config_.wiener.eigenvalue(j + 1) * spectral::hs_norm_squared(sigma_column(v, j), s);
    }
    return acc;
  }

  /// Analytic Lipschitz factor of v -> phi_j v in H^s for a single-wavevector
  /// profile: sqrt(2) 2^{|s|/2} (1 + |k_j|^2)^{|s|/2} (Peetre's inequality).
  double multiplier_lipschitz(int j, double s) const {
    const auto& k = basis_[static_cast<std::size_t>(j)].k;
    double k2 = 0.0;
    for (int a = 0; a < grid_->dim(); ++a) k2 += std::pow(grid_->wavenumber_unit() * k[a], 2);
    return std::sqrt(2.0) * std::pow(2.0, 0.5 * std::abs(s)) * std::pow(1.0 + k2, 0.5 * std::abs(s));
  }

  /// Growth constant K with ||sigma(v)||^2_{L_Q} + int ||G(v,z)||^2_{H^s} lambda(dz)
  /// <= K (1 + ||v||^2_{H^s}), from (a+b)^2 <= 2a^2 + 2b^2, Peetre, and
  /// the contractivity of P, J_n and dealiasing.
  double growth_constant(double s) const {
    double constant_part = 0.0;
    double linear_part = 0.0;
    for (int j = 0; j < basis_size(); ++j) {
      const double lam = config_.wiener.eigenvalue(j + 1);
      constant_part += 2.0 * lam * config_.sigma.c0 * config_.sigma.c0 *
                       spectral::hs_norm_squared(psi_[static_cast<std::size_t>(j)], s);
      linear_part += 2.0 * lam * config_.sigma.c1 * config_.sigma.c1 * std::pow(multiplier_lipschitz(j, s), 2);
    }
    // kernel <= 1
    linear_part += config_.jumps.rate * config_.jumps.mean_gamma_squared();
    return std::max(constant_part, linear_part);
  }

  /// S(tau) = h tau (pointwise matrix product).
  TensorField stress_operator(const TensorField& tau) const {
    if (config_.stress.profile == StressNoiseProfile::identity) {
      TensorField out = tau;
      out *= config_.stress.scale;
      return out;
    }
    return spectral::matrix_product(h_, tau);
  }

  /// S(tau) dW2.
  TensorField stress_noise(const TensorField& tau, double dw2) const {
    TensorField out = stress_operator(tau);
    out *= dw2;
    return out;
  }

  /// Ito correction (1/2) S^2(tau).
  TensorField ito_correction(const TensorField& tau) const {
    TensorField out = stress_operator(stress_operator(tau));
    out *= 0.5;
    return out;
  }

  const TensorField& stress_coefficient() const { return h_; }

  /// Pointwise max of the Frobenius norm of h.
  double stress_coefficient_linf() const { return h_linf_; }

  bool preserves_symmetry() const { return config_.stress.profile == StressNoiseProfile::identity; }

  /// J_n G(v, z) = gamma(z) J_n (kappa * v).
  VectorField jump_increment(const VectorField& v, double mark) const {
    return smoothed(v, config_.jumps.gamma(mark));
  }

  /// int_Z G(v, z) lambda(dz) = rate * mean_gamma * (kappa * v).
  VectorField compensator(const VectorField& v) const {
    return smoothed(v, config_.jumps.compensator_coefficient());
  }

  /// int_Z ||G(v, z)||^2_{H^s} lambda(dz), evaluated exactly.
  double jump_hs_squared(const VectorField& v, double s) const {
    return config_.jumps.rate * config_.jumps.mean_gamma_squared() * spectral::hs_norm_squared(smoothed(v, 1.0), s);
  }

 private:
  void check_increment(std::span<const double> dw) const {
    if (static_cast<int>(dw.size()) != basis_size()) {
      throw std::invalid_argument("noise increment has " + std::to_string(dw.size()) + " coefficients, basis has " +
                                  std::to_string(basis_size()));
    }
  }

  VectorField linear_part_unprojected(const VectorField& v, std::span<const double> dw) const {
    VectorField out = spectral::dealiased_product(assemble_w1(dw), v);
    out *= config_.sigma.c1;
    return out;
  }

  VectorField smoothed(const VectorField& v, double factor) const {
    const auto& grid = *grid_;
    const double n = grid.truncation_radius();
    return spectral::apply_multiplier(v, [&](std::size_t m) {
      return grid.in_ball(m, n) ? factor * config_.jumps.kernel(grid.xi_squared(m)) : 0.0;
    });
  }

  void build_basis() {
    const auto& grid = *grid_;
    basis_ = noise_basis(grid.dim(), config_.wiener.count);
    const int kmax = grid.max_retained_index();
    const double r = 1.0 / std::sqrt(2.0);
    for (const auto& b : basis_) {
      for (int a = 0; a < grid.dim(); ++a) {
        if (std::abs(b.k[a]) > kmax) {
          throw std::invalid_argument("noise basis wavevector lies outside the dealiased grid; reduce noise.count");
        }
      }
      const auto m = grid.flat_index(b.k);
      const auto p = grid.mirror(m);
      const Complex c = b.sine ? Complex(0.0, -r) : Complex(r, 0.0);
      ScalarField phi(grid_);
      phi.component(0)[m] = c;
      phi.component(0)[p] = std::conj(c);

      // unit direction orthogonal to k
      std::array<double, 3> dir{0, 0, 0};
      if (grid.dim() == 2) {
        const double norm = std::hypot(b.k[0], b.k[1]);
        dir = {-b.k[1] / norm, b.k[0] / norm, 0.0};
      } else {
        // k x e_axis with the axis least aligned with k
        int axis = 0;
        for (int a = 1; a < 3; ++a) {
          if (std::abs(b.k[a]) < std::abs(b.k[axis])) axis = a;
        }
        std::array<double, 3> e{0, 0, 0};
        e[static_cast<std::size_t>(axis)] = 1.0;
        dir = {b.k[1] * e[2] - b.k[2] * e[1], b.k[2] * e[0] - b.k[0] * e[2], b.k[0] * e[1] - b.k[1] * e[0]};
        const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        for (auto& x : dir) x /= norm;
      }
      VectorField psi(grid_);
      for (int a = 0; a < grid.dim(); ++a) {
        psi.component(a)[m] = dir[static_cast<std::size_t>(a)] * c;
        psi.component(a)[p] = std::conj(dir[static_cast<std::size_t>(a)] * c);
      }
      phi_.push_back(std::move(phi));
      psi_.push_back(std::move(psi));
    }
  }

  void build_stress_coefficient() {
    const auto& grid = *grid_;
    const int d = grid.dim();
    const auto& cfg = config_.stress;
    h_ = TensorField(grid_);
    if (cfg.profile == StressNoiseProfile::identity) {
      for (int i = 0; i < d; ++i) h_(i, i)[0] = cfg.scale;
      h_.set_symmetric(true);
      h_linf_ = std::abs(cfg.scale) * std::sqrt(static_cast<double>(d));
      return;
    }
    // periodic Gaussian bump centred in the box, minimum-image distance
    spectral::PhysicalArray bump(grid.size());
    const double L = grid.box_length();
    for (std::size_t x = 0; x < grid.size(); ++x) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        double dx = grid.coordinate(x, a) - 0.5 * L;
        dx -= L * std::round(dx / L);
        r2 += dx * dx;
      }
      bump[x] = std::exp(-0.5 * r2 / (cfg.width * cfg.width));
    }
    ScalarField profile(grid_);
    spectral::from_physical(grid, bump, profile.component(0), true);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double entry = cfg.scale * cfg.matrix[static_cast<std::size_t>(i * 3 + j)];
        auto dst = h_(i, j);
        const auto src = profile.component(0);
        for (std::size_t m = 0; m < grid.size(); ++m) dst[m] = entry * src[m];
      }
    }
    h_linf_ = spectral::linf_norm(h_);
  }

  GridPtr grid_;
  NoiseConfig config_;
  std::vector<BasisFunction> basis_;
  std::vector<ScalarField> phi_;
  std::vector<VectorField> psi_;
  TensorField h_{grid_};
  double h_linf_ = 0.0;
};

}  // namespace oldroyd
