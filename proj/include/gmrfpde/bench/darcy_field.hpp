#pragma once

#include <cmath>

#include "gmrfpde/core/rng.hpp"
#include "gmrfpde/core/types.hpp"
#include "gmrfpde/fem/grid_io.hpp"

namespace gmrfpde::bench {

/// Synthetic piecewise-constant Darcy coefficient: a smooth random field
/// (low-order random Fourier series) thresholded at zero, taking the value 12
/// where the field is nonnegative and 3 elsewhere. Deterministic per seed.
inline fem::CoefficientGrid darcy_coefficient_field(Index nx, Index ny,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  const int modes = 4;
  std::vector<Real> a((modes + 1) * (modes + 1)), b(a.size()), c(a.size()), d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    c[i] = rng.normal();
    d[i] = rng.normal();
  }
  auto smooth = [&](Real x, Real y) {
    Real s = 0.0;
    for (int p = 0; p <= modes; ++p)
      for (int q = 0; q <= modes; ++q) {
        if (p == 0 && q == 0) continue;
        Real w = 1.0 / (1.0 + p * p + q * q);
        std::size_t k = p * (modes + 1) + q;
        s += w * (a[k] * std::cos(p * M_PI * x) * std::cos(q * M_PI * y) +
                  b[k] * std::sin(p * M_PI * x) * std::sin(q * M_PI * y) +
                  c[k] * std::cos(p * M_PI * x) * std::sin(q * M_PI * y) +
                  d[k] * std::sin(p * M_PI * x) * std::cos(q * M_PI * y));
      }
    return s;
  };

  fem::CoefficientGrid g;
  g.nx = nx;
  g.ny = ny;
  g.values.resize(static_cast<std::size_t>(nx) * ny);
  for (Index iy = 0; iy < ny; ++iy)
    for (Index ix = 0; ix < nx; ++ix) {
      Real x = (ix + 0.5) / nx, y = (iy + 0.5) / ny;
      g.values[iy * nx + ix] = smooth(x, y) >= 0.0 ? 12.0 : 3.0;
    }
  return g;
}

}  // namespace gmrfpde::bench
