#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "oldroyd/field.hpp"
#include "oldroyd/spectral_grid.hpp"

namespace oldroyd::spectral {

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

/// Process-wide cache of out-of-place FFTW plans keyed by (dim, modes),
/// planned for 64-byte aligned arrays. The planner is not thread-safe, so
/// planning happens under a lock; executing a cached plan on fresh arrays is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  PlanPair get(int dim, int modes) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find({dim, modes});
    if (it != plans_.end()) return it->second;
    std::size_t size = 1;
    int n[3] = {modes, modes, modes};
    for (int a = 0; a < dim; ++a) size *= static_cast<std::size_t>(modes);
    CoeffVector in(size), out(size);
    auto* pin = reinterpret_cast<fftw_complex*>(in.data());
    auto* pout = reinterpret_cast<fftw_complex*>(out.data());
    PlanPair pair;
    pair.forward = fftw_plan_dft(dim, n, pin, pout, FFTW_FORWARD, FFTW_ESTIMATE);
    pair.backward = fftw_plan_dft(dim, n, pin, pout, FFTW_BACKWARD, FFTW_ESTIMATE);
    plans_.emplace(std::make_pair(dim, modes), pair);
    return pair;
  }

  ~PlanCache() {
    for (auto& [key, pair] : plans_) {
      fftw_destroy_plan(pair.forward);
      fftw_destroy_plan(pair.backward);
    }
  }

 private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::pair<int, int>, PlanPair> plans_;
};

inline bool fftw_aligned(const Complex* p) {
  return reinterpret_cast<std::uintptr_t>(p) % AlignedAllocator<Complex>::alignment == 0;
}

/// Runs `plan` from `in` to `out`, staging through aligned scratch when a
/// caller passes foreign storage, so the same codelets run on every input.
inline void execute(fftw_plan plan, std::span<const Complex> in, std::span<Complex> out) {
  if (fftw_aligned(in.data()) && fftw_aligned(out.data()) && in.data() != out.data()) {
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return;
  }
  CoeffVector a(in.begin(), in.end()), b(out.size());
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(a.data()), reinterpret_cast<fftw_complex*>(b.data()));
  std::copy(b.begin(), b.end(), out.begin());
}

}  // namespace detail

/// Physical-space samples of one component on the M^dim grid.
using PhysicalArray = CoeffVector;

/// spectral[k] = (1/N) sum_x physical[x] exp(-i k.x)
inline void forward_transform(const SpectralGrid& grid, std::span<const Complex> physical,
                              std::span<Complex> spectral) {
  const auto plan = detail::PlanCache::instance().get(grid.dim(), grid.modes()).forward;
  detail::execute(plan, physical, spectral);
  const double scale = 1.0 / static_cast<double>(grid.size());
  for (auto& x : spectral) x *= scale;
}

/// physical[x] = sum_k spectral[k] exp(i k.x)
inline void backward_transform(const SpectralGrid& grid, std::span<const Complex> spectral,
                               std::span<Complex> physical) {
  const auto plan = detail::PlanCache::instance().get(grid.dim(), grid.modes()).backward;
  detail::execute(plan, spectral, physical);
}

inline PhysicalArray to_physical(const SpectralGrid& grid, std::span<const Complex> spectral) {
  PhysicalArray out(grid.size());
  backward_transform(grid, spectral, out);
  return out;
}

template <class Kind>
std::vector<PhysicalArray> to_physical(const Field<Kind>& f) {
  std::vector<PhysicalArray> out;
  out.reserve(static_cast<std::size_t>(f.components()));
  for (int c = 0; c < f.components(); ++c) out.push_back(to_physical(f.grid(), f.component(c)));
  return out;
}

/// Forward-transforms one component into a field slot, zeroing modes outside
/// the dealiasing box. With `real_valued`, the result is projected onto
/// exactly Hermitian coefficients.
inline void from_physical(const SpectralGrid& grid, std::span<const Complex> physical,
                          std::span<Complex> spectral, bool real_valued) {
  forward_transform(grid, physical, spectral);
  for (std::size_t m = 0; m < spectral.size(); ++m) {
    if (!grid.dealiased(m)) spectral[m] = Complex{};
  }
  if (real_valued) enforce_hermitian(spectral, grid);
}

}  // namespace oldroyd::spectral
