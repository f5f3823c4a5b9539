#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oldroyd/binary_io.hpp"
#include "oldroyd/noise.hpp"

namespace oldroyd {

/// Recorded noise realization: per-step Wiener coefficients, the scalar W2
/// increment and jump events, plus the metadata a replay must match.
///
/// Binary layout (little-endian):
///   "OLDNOISE" | u32 version | u32 dim | u32 count | u64 basis signature |
///   f64 dt | u64 steps | steps x { u64 index | count x f64 dW1 | f64 dW2 |
///   u32 jumps | jumps x { f64 time | f64 mark } }
struct NoisePath {
  static constexpr std::uint32_t kVersion = 1;

  int dim = 2;
  int count = 0;
  std::uint64_t signature = 0;
  double dt = 0.0;
  std::vector<NoiseIncrement> steps;

  static NoisePath for_config(int dim, const NoiseConfig& config, double dt) {
    NoisePath path;
    path.dim = dim;
    path.count = config.wiener.count;
    path.signature = basis_signature(dim, config.wiener.count);
    path.dt = dt;
    return path;
  }

  /// Throws unless this path can drive a run with the given basis and step.
  void check_compatible(int run_dim, const NoiseConfig& config, double run_dt) const {
    if (run_dt != dt) throw std::invalid_argument("noise path: time step mismatch");
    if (run_dim != dim || config.wiener.count != count || basis_signature(run_dim, config.wiener.count) != signature) {
      throw std::invalid_argument("noise path: noise basis mismatch");
    }
  }

  bool operator==(const NoisePath&) const = default;
};

inline void write_noise_path(std::ostream& os, const NoisePath& path) {
  binary::put_magic(os, "OLDNOISE");
  binary::put_u32(os, NoisePath::kVersion);
  binary::put_u32(os, static_cast<std::uint32_t>(path.dim));
  binary::put_u32(os, static_cast<std::uint32_t>(path.count));
  binary::put_u64(os, path.signature);
  binary::put_f64(os, path.dt);
  binary::put_u64(os, path.steps.size());
  for (const auto& inc : path.steps) {
    if (static_cast<int>(inc.dw1.size()) != path.count) {
      throw std::invalid_argument("noise path: step has wrong coefficient count");
    }
    binary::put_u64(os, inc.step);
    for (double w : inc.dw1) binary::put_f64(os, w);
    binary::put_f64(os, inc.dw2);
    binary::put_u32(os, static_cast<std::uint32_t>(inc.jumps.size()));
    for (const auto& j : inc.jumps) {
      binary::put_f64(os, j.time);
      binary::put_f64(os, j.mark);
    }
  }
}

inline NoisePath read_noise_path(std::istream& is) {
  binary::expect_magic(is, "OLDNOISE", "noise path");
  const auto version = binary::get_u32(is);
  if (version != NoisePath::kVersion) {
    throw std::runtime_error("noise path: unsupported version " + std::to_string(version));
  }
  NoisePath path;
  path.dim = static_cast<int>(binary::get_u32(is));
  path.count = static_cast<int>(binary::get_u32(is));
  path.signature = binary::get_u64(is);
  path.dt = binary::get_f64(is);
  const auto n = binary::get_u64(is);
  path.steps.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t s = 0; s < n; ++s) {
    NoiseIncrement inc;
    inc.step = binary::get_u64(is);
    inc.dw1.resize(static_cast<std::size_t>(path.count));
    for (auto& w : inc.dw1) w = binary::get_f64(is);
    inc.dw2 = binary::get_f64(is);
    const auto jumps = binary::get_u32(is);
    inc.jumps.resize(jumps);
    for (auto& j : inc.jumps) {
      j.time = binary::get_f64(is);
      j.mark = binary::get_f64(is);
    }
    path.steps.push_back(std::move(inc));
  }
  return path;
}

inline void save_noise_path(const std::string& file, const NoisePath& path) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + file + " for writing");
  write_noise_path(os, path);
  if (!os) throw std::runtime_error("failed writing " + file);
}

inline NoisePath load_noise_path(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file);
  return read_noise_path(is);
}

}  // namespace oldroyd
