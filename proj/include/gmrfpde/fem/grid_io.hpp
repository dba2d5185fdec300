#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gmrfpde/core/types.hpp"
#include "gmrfpde/fem/space.hpp"

namespace gmrfpde::fem {

/// Row-major real grid over the unit square: nx × ny cell values, x fastest.
struct CoefficientGrid {
  Index nx = 0;
  Index ny = 0;
  Vector values;  // size nx * ny

  Real at_cell(Index ix, Index iy) const { return values[iy * nx + ix]; }

  /// Piecewise-constant lookup of the cell containing (x, y) in [0,1]².
  Real at_point(Real x, Real y) const {
    Index ix = std::clamp<Index>(static_cast<Index>(x * nx), 0, nx - 1);
    Index iy = std::clamp<Index>(static_cast<Index>(y * ny), 0, ny - 1);
    return at_cell(ix, iy);
  }
};

/// Text format: header "nx ny", then nx*ny values in row-major order.
inline CoefficientGrid read_grid(std::istream& is) {
  CoefficientGrid g;
  if (!(is >> g.nx >> g.ny) || g.nx < 1 || g.ny < 1)
    throw StructuralError("grid file: bad header (want \"nx ny\")");
  g.values.resize(static_cast<std::size_t>(g.nx) * g.ny);
  for (Real& v : g.values)
    if (!(is >> v)) throw StructuralError("grid file: truncated value list");
  return g;
}

inline CoefficientGrid read_grid_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw StructuralError("cannot open grid file " + path);
  return read_grid(is);
}

inline void write_grid(const CoefficientGrid& g, std::ostream& os) {
  os << g.nx << " " << g.ny << "\n";
  os.precision(17);
  for (Index iy = 0; iy < g.ny; ++iy) {
    for (Index ix = 0; ix < g.nx; ++ix)
      os << g.at_cell(ix, iy) << (ix + 1 < g.nx ? " " : "\n");
  }
}

inline void write_grid_file(const CoefficientGrid& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw StructuralError("cannot open " + path + " for writing");
  write_grid(g, os);
}

/// Per-element coefficients sampled at element centroids.
inline std::vector<Real> coefficients_at_centroids(const FeSpace& space,
                                                   const CoefficientGrid& grid) {
  const Mesh& mesh = space.mesh();
  require(mesh.dim == 2, "coefficient grid import targets 2D meshes");
  std::vector<Real> out(mesh.n_elements());
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const Index* el = mesh.element(e);
    Real cx = (mesh.node_x(el[0]) + mesh.node_x(el[1]) + mesh.node_x(el[2])) / 3.0;
    Real cy = (mesh.node_y(el[0]) + mesh.node_y(el[1]) + mesh.node_y(el[2])) / 3.0;
    out[e] = grid.at_point(cx, cy);
  }
  return out;
}

}  // namespace gmrfpde::fem
